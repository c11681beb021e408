"""Dislocation density dynamics: particle, mean-field, slab and curve models."""
from __future__ import annotations

from .elasticity import ElasticConstants, derive_constants, kernel_full_stress, kernel_sigma0

__version__ = "0.1.0"

__all__ = [
    "ElasticConstants",
    "derive_constants",
    "kernel_full_stress",
    "kernel_sigma0",
    "curves",
    "gb2d",
    "gcz1d",
    "micro2d",
    "spectral",
    "sub1d",
    "__version__",
]


def __getattr__(name):
    # submodules load lazily so importing the package stays cheap
    if name in ("curves", "gb2d", "gcz1d", "micro2d", "spectral", "sub1d", "config", "runner", "cli"):
        import importlib

        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(name)
