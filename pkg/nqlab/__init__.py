"""
nqlab

A numerical laboratory for Nevanlinna N_{q_alpha} summability.
"""

__version__ = "0.1.0"
