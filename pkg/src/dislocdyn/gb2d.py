"""Periodic 2D Groma-Balogh model: signed densities transported along x1 by +-sigma_12.

The conservative form ``theta+-_t + (+-sigma_12 theta+-)_{x1} = 0`` is discretized
by first-order upwinding with face-averaged velocities and forward Euler. The
scheme is positivity preserving under the step limit of :func:`admissible_dt`
and conserves mass row by row.
"""
from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Iterator
from dataclasses import dataclass

import numpy as np

from .elasticity import ElasticConstants
from .errors import InvalidStateError, StepSizeError, ValidationError
from .spectral import (
    PeriodicField2D,
    grid_points,
    r1r2_multiplier,
    stress_from_density_diff,
    zygmund_norm,
)

NEGATIVE_TOL = 1e-12
ROW_DENSITY_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class GBState:
    theta_plus: PeriodicField2D
    theta_minus: PeriodicField2D
    time: float
    line_density_L: float

    def __post_init__(self):
        if self.theta_plus.values.shape != self.theta_minus.values.shape:
            raise ValidationError("theta_plus and theta_minus must share a grid")
        if not self.line_density_L > 0:
            raise ValidationError("line density L > 0 required")
        for name, f in (("theta_plus", self.theta_plus), ("theta_minus", self.theta_minus)):
            if f.values.min() < -NEGATIVE_TOL:
                raise InvalidStateError(f"{name} has negative values (min {f.values.min():.3g})")
            rows = row_line_density(f)
            worst = float(np.max(np.abs(rows - self.line_density_L)))
            if worst > ROW_DENSITY_RTOL * self.line_density_L:
                raise InvalidStateError(
                    f"{name}: x1-integral of some row differs from L={self.line_density_L:g} by {worst:.3g}"
                )

    @property
    def shape(self) -> tuple[int, int]:
        return self.theta_plus.values.shape

    @classmethod
    def from_arrays(cls, theta_plus, theta_minus, line_density_L: float, time: float = 0.0) -> "GBState":
        return cls(PeriodicField2D(theta_plus), PeriodicField2D(theta_minus), time, line_density_L)


def row_line_density(f: PeriodicField2D) -> np.ndarray:
    """x1-quadrature of ``f`` along each x2 row (length ``n2``)."""
    return f.values.mean(axis=0)


def compute_stress(state: GBState, constants: ElasticConstants) -> PeriodicField2D:
    """Self-consistent shear stress sigma_12 of the current densities (zero mean)."""
    diff = state.theta_plus.values - state.theta_minus.values
    return PeriodicField2D(stress_from_density_diff(diff, constants))


def face_velocity(sigma: np.ndarray) -> np.ndarray:
    """x1-face values ``u[i] = (sigma[i] + sigma[i+1]) / 2`` (face ``i+1/2``)."""
    return 0.5 * (sigma + np.roll(sigma, -1, axis=0))


def _outflow_rate(u_face: np.ndarray) -> np.ndarray:
    # per cell: right face exports when u > 0, left face exports when u < 0
    return np.maximum(u_face, 0.0) + np.maximum(-np.roll(u_face, 1, axis=0), 0.0)


def admissible_dt(state: GBState, constants: ElasticConstants, sigma: np.ndarray | None = None) -> float:
    """Largest admissible explicit step.

    Two limits apply. The transport limit keeps every cell from exporting more
    than its content, ``dt * (u+_{i+1/2} + u-_{i-1/2}) / dx1 <= 1``; it is implied
    by ``dt * max|sigma_12| / dx1 <= 1/2`` and is usually close to
    ``dt * max|sigma_12| / dx1 <= 1``. The stress-relaxation limit
    ``dt * a_bar * max(theta+ + theta-) / 4 <= 1`` bounds the linearized decay
    rate of ``theta+ - theta-`` (the stress symbol never exceeds 1/4); beyond it
    forward Euler overshoots and the density difference flips sign from step
    to step instead of relaxing.
    """
    if sigma is None:
        sigma = compute_stress(state, constants).values
    u = face_velocity(sigma)
    rate = float(np.max(np.maximum(_outflow_rate(u), _outflow_rate(-u))))
    dx = 1.0 / state.shape[0]
    transport = math.inf if rate == 0.0 else dx / rate
    kappa_max = float(np.max(state.theta_plus.values + state.theta_minus.values))
    relax = math.inf if kappa_max <= 0.0 else 4.0 / (constants.a_bar * kappa_max)
    return min(transport, relax)


def upwind_update(theta: np.ndarray, u_face: np.ndarray, dt: float) -> np.ndarray:
    """First-order upwind step of ``theta_t + (u theta)_{x1} = 0`` on a periodic grid.

    ``u_face[i]`` is the velocity on face ``i+1/2``; the flux there takes
    ``theta`` from the upstream cell.
    """
    lam = dt * theta.shape[0]
    flux = np.maximum(u_face, 0.0) * theta + np.minimum(u_face, 0.0) * np.roll(theta, -1, axis=0)
    return theta - lam * (flux - np.roll(flux, 1, axis=0))


def step(state: GBState, dt: float, constants: ElasticConstants) -> GBState:
    """Advance both densities by one explicit step with the stress frozen at the old state."""
    sigma = compute_stress(state, constants).values
    limit = admissible_dt(state, constants, sigma)
    if not dt > 0:
        raise ValidationError(f"dt > 0 required, got {dt!r}")
    if dt > limit * (1 + 1e-12):
        raise StepSizeError(f"dt={dt:.6g} violates the step restriction; admissible dt <= {limit:.6g}", limit)
    u = face_velocity(sigma)
    tp = upwind_update(state.theta_plus.values, u, dt)
    tm = upwind_update(state.theta_minus.values, -u, dt)
    return GBState.from_arrays(tp, tm, state.line_density_L, state.time + dt)


def _xlogx(v: np.ndarray) -> np.ndarray:
    if v.min() < -NEGATIVE_TOL:
        raise InvalidStateError(f"negative density {v.min():.3g} in entropy")
    v = np.maximum(v, 0.0)
    safe = np.where(v > 0, v, 1.0)
    return np.where(v > 0, v * np.log(safe), 0.0)


def density_entropy(theta_plus: np.ndarray, theta_minus: np.ndarray) -> float:
    """``sum_+- int theta ln theta`` over the torus, with ``0 ln 0 = 0``.

    Values down to ``-1e-12`` are treated as zero; anything more negative
    raises :class:`InvalidStateError`.
    """
    return float(_xlogx(np.asarray(theta_plus, float)).mean() + _xlogx(np.asarray(theta_minus, float)).mean())


def entropy(state: GBState) -> float:
    return density_entropy(state.theta_plus.values, state.theta_minus.values)


def dissipation_rate(state: GBState, constants: ElasticConstants) -> float:
    """``a_bar * int (R1 R2 (theta+ - theta-))^2`` over the modes the stress sees.

    The x1 Nyquist line carries no stress (the primitive drops it), so it is
    excluded here too; otherwise a grid-scale checkerboard in x1, which the
    upwind scheme can leave behind at zero stress, would count as dissipation.
    """
    diff = state.theta_plus.values - state.theta_minus.values
    c = np.fft.fft2(diff) / diff.size
    m = r1r2_multiplier(*diff.shape)
    if diff.shape[0] % 2 == 0:
        m[diff.shape[0] // 2, :] = 0.0
    # Parseval: mean of |g|^2 equals the sum of |c_k|^2
    return constants.a_bar * float(np.sum(np.abs(m * c) ** 2))


def entropy_budget(trajectory: Iterable[GBState], constants: ElasticConstants) -> np.ndarray:
    """``B(t) = S(t) + a_bar * int_0^t int (R1R2(theta+ - theta-))^2 - S(0)`` at each snapshot.

    The time integral is the trapezoid rule over the snapshot times; the
    trajectory may be any iterable (it is consumed once, in order).
    """
    out = []
    s0 = None
    acc = 0.0
    prev_t = prev_d = None
    for st in trajectory:
        s = entropy(st)
        d = dissipation_rate(st, constants)
        if s0 is None:
            s0 = s
        else:
            if st.time < prev_t:
                raise ValidationError("trajectory must be time-ordered")
            acc += 0.5 * (st.time - prev_t) * (d + prev_d)
        prev_t, prev_d = st.time, d
        out.append(s + acc - s0)
    return np.array(out)


def simulate(
    state: GBState,
    constants: ElasticConstants,
    n_steps: int,
    cfl: float = 0.5,
    dt: float | None = None,
) -> Iterator[GBState]:
    """Yield the initial state and every subsequent state.

    With ``dt=None`` each step uses ``cfl`` times the admissible step.
    """
    if not 0 < cfl <= 1:
        raise ValidationError("cfl must lie in (0, 1]")
    yield state
    for _ in range(n_steps):
        h = dt if dt is not None else cfl * admissible_dt(state, constants)
        if not math.isfinite(h):
            h = 1.0 / state.shape[0]
        state = step(state, h, constants)
        yield state


def random_smooth_state(
    rng: np.random.Generator,
    n1: int,
    n2: int,
    L: float = 1.0,
    amplitude: float = 0.5,
    max_mode: int = 4,
) -> GBState:
    """Smooth positive densities whose every x1-row integrates to ``L``.

    The perturbation contains only modes with ``k1 != 0`` so row integrals are
    untouched; ``amplitude < 1`` bounds the relative deviation from ``L``.
    """
    if not 0 <= amplitude < 1:
        raise ValidationError("amplitude must lie in [0, 1)")
    x1, x2 = grid_points(n1, n2)
    fields = []
    for _ in range(2):
        p = np.zeros((n1, n2))
        for k1 in range(1, max_mode + 1):
            for k2 in range(-max_mode, max_mode + 1):
                a, b = rng.standard_normal(2) / (k1 * k1 + k2 * k2)
                phase = 2 * math.pi * (k1 * x1 + k2 * x2)
                p += a * np.cos(phase) + b * np.sin(phase)
        p /= max(np.max(np.abs(p)), 1e-300)
        fields.append(L * (1.0 + amplitude * p))
    return GBState.from_arrays(fields[0], fields[1], L)


def _bump(n1: int, n2: int, center, width: float) -> np.ndarray:
    x1, x2 = grid_points(n1, n2)
    d1 = (x1 - center[0] + 0.5) % 1.0 - 0.5
    d2 = (x2 - center[1] + 0.5) % 1.0 - 0.5
    return np.exp(-0.5 * (d1 * d1 + d2 * d2) / width**2)


def mollified_pair_state(
    n: int,
    plus_site,
    minus_site,
    width: float,
    L: float = 1.0,
    weight: float = 0.9,
) -> GBState:
    """Background ``L`` plus one positive and one negative Gaussian dislocation.

    Each bump is paired with an equal dip half a period away along x1, so every
    row keeps x1-integral ``L``; the dip sits where the periodic x1-kernel
    changes sign and barely affects the stress at the bump.
    """
    def signed_bump(site):
        b = _bump(n, n, site, width) - _bump(n, n, (site[0] + 0.5, site[1]), width)
        return weight * L * b / np.max(np.abs(b))

    return GBState.from_arrays(L + signed_bump(plus_site), L + signed_bump(minus_site), L)


def sample_periodic(field: np.ndarray, point) -> float:
    """Trigonometric interpolation of grid samples at an arbitrary point."""
    n1, n2 = field.shape
    c = np.fft.fft2(field) / field.size
    k1 = np.fft.fftfreq(n1, 1.0 / n1)
    k2 = np.fft.fftfreq(n2, 1.0 / n2)
    e1 = np.exp(2j * math.pi * k1 * point[0])
    e2 = np.exp(2j * math.pi * k2 * point[1])
    return float((e1 @ c @ e2).real)


def write_snapshot_csv(path, state: GBState, constants: ElasticConstants) -> None:
    """Columns ``x1, x2, theta_plus, theta_minus, sigma12``."""
    sigma = compute_stress(state, constants).values
    x1, x2 = grid_points(*state.shape)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x1", "x2", "theta_plus", "theta_minus", "sigma12"])
        cols = (x1, x2, state.theta_plus.values, state.theta_minus.values, sigma)
        for row in zip(*(c.ravel() for c in cols)):
            w.writerow([f"{v:.17g}" for v in row])


def diagnostics_row(state: GBState, budget: float) -> dict:
    return {
        "t": state.time,
        "S": entropy(state),
        "B": budget,
        "zygmund_plus": zygmund_norm(state.theta_plus),
        "zygmund_minus": zygmund_norm(state.theta_minus),
    }
