from typing import Union

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    APP_NAME: str = "nqlab"
    APP_VERSION: str = "0.1.0"
    ENVIRONMENT: str = "development"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"

    # QUADRATURE
    QUAD_EPSABS: float = 1e-10
    QUAD_EPSREL: float = 1e-8
    QUAD_LIMIT: int = 200
    QUAD_RETRIES: int = 3

    # CONCURRENCY
    WORKER_THREADS: int = 1
    TERM_EVALUATION_CAP: int = 200_000_000

    # KERNEL CHECKS
    FD_STEP_MIN: float = 1e-5
    FD_STEP_REL: float = 1e-7
    FD_CONSISTENCY_TOL: float = 1e-4
    CONDITION7_T_MIN: float = 1e-4
    CONDITION7_T_MAX: float = 0.9
    CONDITION7_GROWTH: float = 1.1

    # FOURIER
    U_MIN: float = 1e-10
    DEFAULT_QUAD_NODES: int = 16384
    H0_TOLERANCE: float = 1e-6
    CAUCHY_THRESHOLD: float = 0.05
    CAUCHY_STALL_RATIO: float = 0.9
    TABLE_POINTS_PER_OCTAVE: int = 16

    # DIAGNOSTICS AND BOUND FITS
    DEFAULT_A: float = 1.0
    SLOPE_CONVERGENT: float = -0.1
    TAIL_FRACTION: float = 1e-3
    EXPONENT_TOLERANCE: float = 0.15
    MIN_R_SQUARED: float = 0.9
    CONSTANT_GROWTH_LIMIT: float = 2.0

    # OUTPUT
    CSV_SIGNIFICANT_DIGITS: int = 17

    @field_validator("LOG_LEVEL")
    def normalize_log_level(cls, v: str) -> str:
        level = v.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"Unknown log level: {v}")
        return level

    @field_validator("WORKER_THREADS", "QUAD_RETRIES", "QUAD_LIMIT")
    def must_be_positive(cls, v: Union[int, str]) -> int:
        if int(v) < 1:
            raise ValueError("Value must be at least 1")
        return int(v)

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True)


settings = Settings()
