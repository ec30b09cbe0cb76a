"""Relativistic momentum diffusion of a charged particle in a thermal random field."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    ConvergenceError,
    DomainError,
    InvalidBathError,
    OffShellError,
    ReldiffError,
)
from .spectral import BathParams  # noqa: E402

__all__ = [
    "BathParams",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "InvalidBathError",
    "OffShellError",
    "ReldiffError",
    "__version__",
]
