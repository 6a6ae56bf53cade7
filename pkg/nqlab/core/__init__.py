"""
Core functionality for nqlab.
"""
