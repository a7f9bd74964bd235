"""Pointwise adaptive local polynomial regression and the information
complexity of Karhunen-Loeve truncation."""

__version__ = "0.1.0"

from .calibration import CriticalValues, calibrate_mc, risk_constant, theoretical_cv
from .design import DesignGrid, Kernel, LocalizationLadder, build_ladder
from .lepski import AdaptiveResult, select
from .local_model import LocalModel, NoiseModel, PolynomialBasis, ScaleEstimate

__all__ = [
    "AdaptiveResult", "CriticalValues", "DesignGrid", "Kernel", "LocalModel",
    "LocalizationLadder", "NoiseModel", "PolynomialBasis", "ScaleEstimate", "__version__",
    "build_ladder", "calibrate_mc", "risk_constant", "select", "theoretical_cv",
]
