"""Functional GARCH(1, 1): simulation, stationarity diagnostics and least-squares estimation."""

from fgarch.basis import BasisSet, fpca, make_basis, project, reconstruct_curve, reconstruct_kernel
from fgarch.estimation import (
    CoefSeries,
    FitOptions,
    FitResult,
    Theta,
    ThetaBounds,
    asymptotic_cov,
    fit,
    project_sample,
)
from fgarch.function_space import Curve, Grid, Kernel2D
from fgarch.model import FGarchSpec, InnovationGen, simulate
from fgarch.presets import load_preset

__version__ = "0.1.0"
