from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FourierModel:
    """
    Coefficients a_0..a_N and b_0..b_N of a Fourier series; b_0 is always 0.
    """

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.a.shape != self.b.shape or self.a.ndim != 1:
            raise ValueError("a and b must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise ValueError("coefficients must be finite")

    @property
    def N(self) -> int:
        return self.a.size - 1
