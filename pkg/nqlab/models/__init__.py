"""
Immutable numerical objects: kernels, series sources, periodic functions
and Fourier models.
"""
