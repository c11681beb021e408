"""Isotropic elastic constants and the stress field of a straight edge dislocation.

The dislocation line is the x3 axis with Burgers vector e1. All quantities are
plain double precision; no unit system is enforced.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularPointError, ValidationError


@dataclass(frozen=True)
class ElasticConstants:
    """Lame parameters together with every derived scalar used by the models.

    Build instances with :func:`derive_constants`; the derived fields are
    never meant to be set independently.
    """

    lam: float
    mu: float
    nu: float
    a: float
    a_bar: float
    c1: float
    c2: float


def derive_constants(lam: float, mu: float) -> ElasticConstants:
    """Compute Poisson ratio, kernel prefactors and 1D submodel constants.

    Parameters
    ----------
    lam, mu : float
        Lame parameters; requires ``mu > 0`` and ``3*lam + 2*mu > 0``.

    Raises
    ------
    ValidationError
        If either inequality fails (the message names it).
    """
    lam = float(lam)
    mu = float(mu)
    if not (math.isfinite(lam) and math.isfinite(mu)):
        raise ValidationError("Lame parameters must be finite")
    if not mu > 0.0:
        raise ValidationError(f"mu > 0 violated (mu={mu!r})")
    if not 3.0 * lam + 2.0 * mu > 0.0:
        raise ValidationError(f"3*lambda + 2*mu > 0 violated (3*{lam!r} + 2*{mu!r} <= 0)")
    nu = lam / (2.0 * (lam + mu))
    a = mu / (2.0 * math.pi * (1.0 - nu))
    a_bar = 4.0 * mu * (lam + mu) / (lam + 2.0 * mu)
    c1 = mu * (lam + mu) / (lam + 2.0 * mu)
    c2 = mu / (lam + mu)
    return ElasticConstants(lam=lam, mu=mu, nu=nu, a=a, a_bar=a_bar, c1=c1, c2=c2)


def kernel_sigma0(x, constants: ElasticConstants):
    """Shear stress sigma_12 at ``x`` due to a unit edge dislocation at the origin.

    ``x`` may be a single point or an array of points with trailing axis of
    length 2. The value at the origin is exactly 0 (no self-stress).
    """
    x = np.asarray(x, dtype=float)
    x1 = x[..., 0]
    x2 = x[..., 1]
    r2 = x1 * x1 + x2 * x2
    at_origin = r2 == 0.0
    safe = np.where(at_origin, 1.0, r2)
    out = constants.a * x1 * (x1 * x1 - x2 * x2) / (safe * safe)
    out = np.where(at_origin, 0.0, out)
    if out.ndim == 0:
        return float(out)
    return out


def kernel_full_stress(x, constants: ElasticConstants) -> np.ndarray:
    """Full symmetric 3x3 stress matrix of the edge dislocation at a point ``x != 0``."""
    x1, x2 = (float(v) for v in np.asarray(x, dtype=float).reshape(2))
    r2 = x1 * x1 + x2 * x2
    if r2 == 0.0:
        raise SingularPointError("stress of an edge dislocation is singular at the origin")
    r4 = r2 * r2
    a = constants.a
    s11 = -a * x2 * (3.0 * x1 * x1 + x2 * x2) / r4
    s12 = a * x1 * (x1 * x1 - x2 * x2) / r4
    s22 = a * x2 * (x1 * x1 - x2 * x2) / r4
    return np.array([[s11, s12, 0.0], [s12, s22, 0.0], [0.0, 0.0, 0.0]])
