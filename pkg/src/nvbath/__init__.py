"""Simulation and analysis toolkit for NV-center electron-nuclear entanglement
dynamics under CPMG dynamical decoupling, with a six-carbon nuclear-spin bath,
filter-function noise spectroscopy, two-qubit tomography, and curve fitting."""

__version__ = "0.1.0"

from . import dynamics, fit, model, spectrum, spincore, tomography
from .kernels import BACKEND as kernel_backend

__all__ = [
    "dynamics",
    "fit",
    "kernel_backend",
    "spincore",
    "model",
    "spectrum",
    "tomography",
    "__version__",
]
