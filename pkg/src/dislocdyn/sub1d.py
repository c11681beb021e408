"""1D translation-invariant submodel for the primitives rho+-(y, t).

    rho+_t = -v rho+_y,    rho-_t = +v rho-_y,
    v = c1 * [(rho+ - rho-) + c2 * int_0^1 (rho+ - rho-) dz + f(t)]

Unknowns are stored as their 1-periodic parts ``rho+- - L*y`` sampled at
``y_j = j/n``. The scheme is a nonconservative first-order upwind update that
acts on the reconstructed, nondecreasing profiles.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .elasticity import ElasticConstants
from .errors import InvalidStateError, StepSizeError, ValidationError

MONOTONE_TOL = 1e-12
ORDER_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Sub1DState:
    rho_plus: np.ndarray
    rho_minus: np.ndarray
    line_density_L: float
    time: float = 0.0

    def __post_init__(self):
        rp = np.array(self.rho_plus, dtype=float)
        rm = np.array(self.rho_minus, dtype=float)
        if rp.ndim != 1 or rp.shape != rm.shape or len(rp) < 2:
            raise ValidationError("rho_plus and rho_minus must be 1D arrays of equal length >= 2")
        if not self.line_density_L > 0:
            raise ValidationError("line density L > 0 required")
        if not (np.all(np.isfinite(rp)) and np.all(np.isfinite(rm))):
            raise ValidationError("profiles must be finite")
        rp.setflags(write=False)
        rm.setflags(write=False)
        object.__setattr__(self, "rho_plus", rp)
        object.__setattr__(self, "rho_minus", rm)
        for name, p in (("rho_plus", rp), ("rho_minus", rm)):
            jumps = backward_slope(p, self.line_density_L) / self.n
            if jumps.min() < -MONOTONE_TOL:
                raise InvalidStateError(f"reconstructed {name} decreases (min increment {jumps.min():.3g})")

    @property
    def n(self) -> int:
        return len(self.rho_plus)

    @property
    def y(self) -> np.ndarray:
        return np.arange(self.n) / self.n

    def reconstructed(self) -> tuple[np.ndarray, np.ndarray]:
        """Full profiles ``rho+-(y_j) = periodic part + L*y_j``."""
        ly = self.line_density_L * self.y
        return self.rho_plus + ly, self.rho_minus + ly


def backward_slope(p: np.ndarray, L: float) -> np.ndarray:
    """``(rho_j - rho_{j-1}) / dy`` of the reconstructed profile (periodic wrap)."""
    n = len(p)
    return (p - np.roll(p, 1)) * n + L


def forward_slope(p: np.ndarray, L: float) -> np.ndarray:
    """``(rho_{j+1} - rho_j) / dy`` of the reconstructed profile (periodic wrap)."""
    n = len(p)
    return (np.roll(p, -1) - p) * n + L


def forcing_value(t: float, amplitude: float = 0.0, period: float = 1.0) -> float:
    """Time-periodic applied-stress term added to ``rho+ - rho-``."""
    if amplitude == 0.0:
        return 0.0
    return amplitude * math.sin(2.0 * math.pi * t / period)


def velocity_field(
    state: Sub1DState,
    constants: ElasticConstants,
    c2: float | None = None,
    forcing: float = 0.0,
) -> np.ndarray:
    """Nodal velocity ``v(y_j)``; ``rho+`` travels with speed ``+v``, ``rho-`` with ``-v``.

    ``c2`` overrides the material value (the comparison harness passes 0).
    The integral term is the periodic trapezoid rule, i.e. the sample mean.
    """
    c2 = constants.c2 if c2 is None else c2
    d = state.rho_plus - state.rho_minus
    return constants.c1 * (d + c2 * d.mean() + forcing)


def stable_dt(
    state: Sub1DState,
    constants: ElasticConstants,
    c2: float | None = None,
    forcing: float = 0.0,
) -> float:
    """Step bound keeping the scheme monotone and order preserving.

    Requires ``dt * (2 max|v| / dy + c1 * max rho_y) <= 1``: the first term keeps
    neighbouring updates from crossing, the second covers the dependence of
    ``v`` on the other species.
    """
    v = velocity_field(state, constants, c2, forcing)
    slope = max(
        backward_slope(state.rho_plus, state.line_density_L).max(),
        backward_slope(state.rho_minus, state.line_density_L).max(),
    )
    rate = 2.0 * np.max(np.abs(v)) * state.n + constants.c1 * slope
    return math.inf if rate == 0 else 1.0 / rate


def step(
    state: Sub1DState,
    dt: float,
    constants: ElasticConstants,
    c2: float | None = None,
    forcing: float = 0.0,
) -> Sub1DState:
    """One explicit upwind step.

    Raises :class:`StepSizeError` if ``dt * max|v| / dy > 1``. Monotonicity and
    order preservation are only guaranteed below :func:`stable_dt`.
    """
    if not dt > 0:
        raise ValidationError(f"dt > 0 required, got {dt!r}")
    v = velocity_field(state, constants, c2, forcing)
    vmax = float(np.max(np.abs(v)))
    if dt * vmax * state.n > 1.0 + 1e-12:
        raise StepSizeError(
            f"dt={dt:.6g} violates dt*max|v|/dy <= 1; admissible dt <= {1.0 / (vmax * state.n):.6g}",
            1.0 / (vmax * state.n),
        )
    L = state.line_density_L
    up, um = state.rho_plus, state.rho_minus
    pos = v > 0
    # rho+ moves with +v: upwind side is j-1 for v > 0
    dplus = np.where(pos, backward_slope(up, L), forward_slope(up, L))
    # rho- moves with -v: upwind side is j+1 for v > 0
    dminus = np.where(pos, forward_slope(um, L), backward_slope(um, L))
    return Sub1DState(up - dt * v * dplus, um + dt * v * dminus, L, state.time + dt)


def evolve(
    state: Sub1DState,
    constants: ElasticConstants,
    t_final: float,
    cfl: float = 0.9,
    c2: float | None = None,
    forcing_amplitude: float = 0.0,
    forcing_period: float = 1.0,
    snapshot_every: int = 1,
) -> list[Sub1DState]:
    """Integrate to ``t_final`` with ``cfl * stable_dt`` steps (last one clipped)."""
    traj = [state]
    k = 0
    while state.time < t_final - 1e-14:
        f = forcing_value(state.time, forcing_amplitude, forcing_period)
        h = min(cfl * stable_dt(state, constants, c2, f), t_final - state.time)
        state = step(state, h, constants, c2, f)
        k += 1
        if k % snapshot_every == 0 or state.time >= t_final - 1e-14:
            traj.append(state)
    return traj


def _ordered(a: Sub1DState, b: Sub1DState, tol: float) -> bool:
    return bool(np.all(a.rho_plus <= b.rho_plus + tol) and np.all(a.rho_minus <= b.rho_minus + tol))


def comparison_check(
    pair_a: Sub1DState,
    pair_b: Sub1DState,
    t_final: float,
    constants: ElasticConstants,
    cfl: float = 0.9,
) -> bool:
    """Evolve both states with ``c2 = 0`` on a shared step schedule and test the ordering.

    Returns True when ``rho_a <= rho_b + 1e-10`` holds for both species at every
    grid point after every step.

    Raises
    ------
    ValidationError
        If the grids or line densities differ, or ``pair_a <= pair_b`` fails at t=0.
    """
    if pair_a.n != pair_b.n or pair_a.line_density_L != pair_b.line_density_L:
        raise ValidationError("compared states must share grid size and L")
    if not _ordered(pair_a, pair_b, 0.0):
        raise ValidationError("initial ordering rho_a <= rho_b is violated")
    a, b = pair_a, pair_b
    t = 0.0
    while t < t_final - 1e-14:
        h = cfl * min(stable_dt(a, constants, 0.0), stable_dt(b, constants, 0.0))
        h = min(h, t_final - t)
        a = step(a, h, constants, c2=0.0)
        b = step(b, h, constants, c2=0.0)
        t += h
        if not _ordered(a, b, ORDER_TOL):
            return False
    return True


def max_slope(state: Sub1DState) -> float:
    """Discrete Lipschitz constant of the reconstructed profiles."""
    L = state.line_density_L
    return float(max(backward_slope(state.rho_plus, L).max(), backward_slope(state.rho_minus, L).max()))


def random_monotone_state(
    rng: np.random.Generator,
    n: int,
    L: float = 1.0,
    amplitude: float = 0.8,
    max_mode: int = 4,
    offset_scale: float = 0.1,
) -> Sub1DState:
    """Random smooth nondecreasing profiles with ``rho(y+1) - rho(y) = L``."""
    y = np.arange(n) / n
    out = []
    for _ in range(2):
        p = np.zeros(n)
        for k in range(1, max_mode + 1):
            a, b = rng.standard_normal(2) / k
            p += a * np.cos(2 * math.pi * k * y) + b * np.sin(2 * math.pi * k * y)
        slopes = L * (1.0 + amplitude * p / max(np.max(np.abs(p)), 1e-300))
        slopes *= L / slopes.mean()
        rho = np.concatenate(([0.0], np.cumsum(slopes[:-1]) / n))
        out.append(rho - L * y + offset_scale * rng.standard_normal())
    return Sub1DState(out[0], out[1], L)


def random_ordered_pair(rng: np.random.Generator, n: int, L: float = 1.0) -> tuple[Sub1DState, Sub1DState]:
    """Two independent random states, the second lifted so that ``a <= b`` pointwise."""
    a = random_monotone_state(rng, n, L)
    b = random_monotone_state(rng, n, L)
    lift_p = max(0.0, float(np.max(a.rho_plus - b.rho_plus))) + 0.05 * rng.random()
    lift_m = max(0.0, float(np.max(a.rho_minus - b.rho_minus))) + 0.05 * rng.random()
    return a, Sub1DState(b.rho_plus + lift_p, b.rho_minus + lift_m, L)


def write_snapshot_csv(path, state: Sub1DState, constants: ElasticConstants, c2: float | None = None, forcing: float = 0.0) -> None:
    """Columns ``y, rho_plus, rho_minus, velocity`` (reconstructed profiles)."""
    rp, rm = state.reconstructed()
    v = velocity_field(state, constants, c2, forcing)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "rho_plus", "rho_minus", "velocity"])
        for row in zip(state.y, rp, rm, v):
            w.writerow([f"{x:.17g}" for x in row])
