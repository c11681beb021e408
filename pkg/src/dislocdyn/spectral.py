"""Fourier multipliers on the unit torus T^2 = R^2 / Z^2.

Grids are uniform, ``values[i, j]`` sampling the point ``(i/n1, j/n2)``.
Integer frequencies run over ``{-n/2, ..., n/2 - 1}`` per axis (numpy's FFT
layout). Coefficients are normalized so that the zero mode is the torus mean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .elasticity import ElasticConstants
from .errors import ValidationError

ZYGMUND_TOL = 1e-10
_ZYGMUND_LOWER = 1e-300


@dataclass(frozen=True, eq=False)
class PeriodicField2D:
    """Real scalar samples on a uniform ``n1 x n2`` grid over the unit torus."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 2 or v.shape[1] < 2:
            raise ValidationError(f"field needs shape (n1, n2) with n1, n2 >= 2, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n1(self) -> int:
        return self.values.shape[0]

    @property
    def n2(self) -> int:
        return self.values.shape[1]

    @property
    def cell_area(self) -> float:
        return 1.0 / (self.n1 * self.n2)

    def integral(self) -> float:
        """Rectangle-rule quadrature over the torus (spectrally accurate)."""
        return float(self.values.mean())

    def l2_norm(self) -> float:
        return math.sqrt(float(np.mean(self.values**2)))

    @classmethod
    def from_function(cls, f, n1: int, n2: int | None = None) -> "PeriodicField2D":
        """Sample ``f(x1, x2)`` (vectorized) on the grid."""
        x1, x2 = grid_points(n1, n1 if n2 is None else n2)
        return cls(f(x1, x2))

    def __add__(self, other: "PeriodicField2D") -> "PeriodicField2D":
        return PeriodicField2D(self.values + other.values)

    def __sub__(self, other: "PeriodicField2D") -> "PeriodicField2D":
        return PeriodicField2D(self.values - other.values)

    def __mul__(self, s: float) -> "PeriodicField2D":
        return PeriodicField2D(self.values * s)

    __rmul__ = __mul__


def grid_points(n1: int, n2: int) -> tuple[np.ndarray, np.ndarray]:
    """Meshgrid (``indexing='ij'``) of sample coordinates."""
    return np.meshgrid(np.arange(n1) / n1, np.arange(n2) / n2, indexing="ij")


def wavenumbers(n1: int, n2: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer frequency arrays ``(k1, k2)`` broadcast to the FFT layout."""
    k1 = np.fft.fftfreq(n1, 1.0 / n1)
    k2 = np.fft.fftfreq(n2, 1.0 / n2)
    return k1[:, None] * np.ones((1, n2)), np.ones((n1, 1)) * k2[None, :]


def _nyquist_mask(k: np.ndarray, n: int) -> np.ndarray:
    if n % 2:
        return np.zeros(k.shape, dtype=bool)
    return k == -(n // 2)


def _apply(values: np.ndarray, multiplier: np.ndarray) -> np.ndarray:
    out = np.fft.ifft2(np.fft.fft2(values) * multiplier)
    return out.real


def riesz_multiplier(n1: int, n2: int, axis: int) -> np.ndarray:
    """Symbol of the real-valued Riesz transform along ``axis`` (1 or 2).

    Off the Nyquist line the symbol is ``-i k_axis/|k|``, whose magnitude is
    ``|k_axis|/|k|``; the phase keeps real fields real. On the Nyquist line of
    an even axis the two aliased modes coincide, so the symbol there is the
    real number ``k_axis/|k|`` with ``k_axis = -n/2``.
    """
    if axis not in (1, 2):
        raise ValidationError(f"axis must be 1 or 2, got {axis!r}")
    k1, k2 = wavenumbers(n1, n2)
    kk = np.hypot(k1, k2)
    kk[0, 0] = 1.0
    k, n = (k1, n1) if axis == 1 else (k2, n2)
    m = (-1j * k / kk).astype(complex)
    nyq = _nyquist_mask(k, n)
    m[nyq] = (k / kk)[nyq]
    m[0, 0] = 0.0
    return m


def riesz_transform(f: PeriodicField2D, axis: int) -> PeriodicField2D:
    """Riesz transform ``R_axis f``; the zero mode is annihilated."""
    return PeriodicField2D(_apply(f.values, riesz_multiplier(f.n1, f.n2, axis)))


def sigma12_multiplier(n1: int, n2: int) -> np.ndarray:
    """``k1^2 k2^2 / |k|^4`` with 0 at the zero mode (without the ``a_bar`` factor)."""
    k1, k2 = wavenumbers(n1, n2)
    kk2 = k1 * k1 + k2 * k2
    kk2[0, 0] = 1.0
    m = (k1 * k1) * (k2 * k2) / (kk2 * kk2)
    m[0, 0] = 0.0
    return m


def sigma12_from_rho_diff(rho_diff: PeriodicField2D, constants: ElasticConstants) -> PeriodicField2D:
    """Periodic shear stress ``a_bar * R1^2 R2^2 (rho+ - rho-)``."""
    m = constants.a_bar * sigma12_multiplier(rho_diff.n1, rho_diff.n2)
    return PeriodicField2D(_apply(rho_diff.values, m))


def antiderivative_multiplier(n1: int, n2: int) -> np.ndarray:
    """``1 / (2 pi i k1)``; zero where ``k1 = 0`` and on the x1 Nyquist line."""
    k1, _ = wavenumbers(n1, n2)
    safe = np.where(k1 == 0, 1.0, k1)
    m = 1.0 / (2j * math.pi * safe)
    m[(k1 == 0) | _nyquist_mask(k1, n1)] = 0.0
    return m


def antiderivative_x1(theta_diff: PeriodicField2D) -> PeriodicField2D:
    """Periodic primitive along x1 of a field, discarding its ``k1 = 0`` modes.

    The discarded modes play no role downstream because the stress multiplier
    vanishes on them.
    """
    m = antiderivative_multiplier(theta_diff.n1, theta_diff.n2)
    return PeriodicField2D(_apply(theta_diff.values, m))


def derivative_x1(f: PeriodicField2D) -> PeriodicField2D:
    """Spectral x1 derivative (Nyquist line dropped, as for the primitive)."""
    k1, _ = wavenumbers(f.n1, f.n2)
    m = (2j * math.pi * k1).astype(complex)
    m[_nyquist_mask(k1, f.n1)] = 0.0
    return PeriodicField2D(_apply(f.values, m))


def stress_from_density_diff(theta_diff: np.ndarray, constants: ElasticConstants) -> np.ndarray:
    """sigma_12 directly from ``theta+ - theta-`` samples in a single FFT round trip.

    Equivalent to ``sigma12_from_rho_diff(antiderivative_x1(theta_diff))``.
    """
    n1, n2 = theta_diff.shape
    m = constants.a_bar * sigma12_multiplier(n1, n2) * antiderivative_multiplier(n1, n2)
    return _apply(theta_diff, m)


def r1r2_multiplier(n1: int, n2: int) -> np.ndarray:
    """Symbol ``k1 k2 / |k|^2`` of the (real, even) composite ``R1 R2``."""
    k1, k2 = wavenumbers(n1, n2)
    kk2 = k1 * k1 + k2 * k2
    kk2[0, 0] = 1.0
    m = k1 * k2 / kk2
    m[0, 0] = 0.0
    return m


def _luxemburg_integral(absf: np.ndarray, gamma: float) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        u = absf / gamma
        val = float(np.mean(u * np.log(math.e + u)))
    return math.inf if not math.isfinite(val) else val


def zygmund_norm(f: PeriodicField2D | np.ndarray, tol: float = ZYGMUND_TOL) -> float:
    """Luxemburg norm of ``f`` in the Zygmund space L log L on the torus.

    Finds ``gamma`` with ``mean(|f|/gamma * ln(e + |f|/gamma)) = 1`` by geometric
    bisection until the bracket's relative width is below ``tol``.
    """
    if not tol > 0:
        raise ValidationError("tol > 0 required")
    values = f.values if isinstance(f, PeriodicField2D) else np.asarray(f, dtype=float)
    absf = np.abs(values)
    top = float(absf.max())
    if top == 0.0:
        return 0.0
    lo, hi = _ZYGMUND_LOWER, 10.0 * top
    while hi / lo - 1.0 > tol:
        mid = math.sqrt(lo * hi)
        if _luxemburg_integral(absf, mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)
