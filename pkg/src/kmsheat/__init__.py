"""KMS states from heat-trace ratios on discrete spectral data."""

from .errors import KMSHeatError

__version__ = "0.1.0"
__all__ = ["KMSHeatError", "__version__"]
