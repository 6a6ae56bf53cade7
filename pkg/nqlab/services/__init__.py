"""
Service layer for nqlab.
"""
