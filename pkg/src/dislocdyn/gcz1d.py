"""Regularized 1D slab model for rho = rho+ - rho-, kappa = rho+ + rho- on I = (-1, 1).

    rho_t   = (D0 + eps) rho_yy - tau kappa_y
    kappa_t = eps kappa_yy + D0 rho_y rho_yy / kappa_y - tau rho_y

with rho(+-1) = 0, kappa(+-1) = +-c0. Nodes are ``y_j = -1 + j*dy`` for
``j = 0..n+1`` with ``dy = 2/(n+1)``; densities ``theta+- = (kappa_y +- rho_y)/2``
live on the ``n+1`` faces between nodes.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .elasticity import ElasticConstants
from .errors import DegenerateGradientError, InvalidStateError, StepSizeError, ValidationError

POSITIVITY_TOL = 1e-10
DEFAULT_DT_FACTOR = 0.4
GAMMA_FLOOR_FACTOR = 1e-8


@dataclass(frozen=True, eq=False)
class SlabState1D:
    """Node samples of ``rho`` and ``kappa`` including the two pinned boundary nodes."""

    rho: np.ndarray
    kappa: np.ndarray
    c0: float
    tau: float
    epsilon: float
    D0: float = 1.0
    time: float = 0.0

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        kappa = np.array(self.kappa, dtype=float)
        if rho.ndim != 1 or rho.shape != kappa.shape or len(rho) < 3:
            raise ValidationError("rho and kappa must be 1D node arrays of equal length >= 3")
        if not self.c0 > 0:
            raise ValidationError("c0 > 0 required")
        if not self.epsilon > 0:
            raise ValidationError("epsilon > 0 required")
        if not self.D0 > 0:
            raise ValidationError("D0 > 0 required")
        if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(kappa))):
            raise InvalidStateError("rho and kappa must be finite")
        tol = 1e-12 * self.c0
        if abs(rho[0]) > tol or abs(rho[-1]) > tol or abs(kappa[0] + self.c0) > tol or abs(kappa[-1] - self.c0) > tol:
            raise ValidationError("boundary values must satisfy rho(+-1) = 0, kappa(+-1) = +-c0")
        rho[0] = rho[-1] = 0.0
        kappa[0], kappa[-1] = -self.c0, self.c0
        rho.setflags(write=False)
        kappa.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "kappa", kappa)
        tp, tm = _faces_theta(rho, kappa, self.dy)
        worst = min(tp.min(), tm.min())
        if worst < -POSITIVITY_TOL:
            raise InvalidStateError(f"kappa_y >= |rho_y| violated (min theta {worst:.3g})")

    @property
    def n(self) -> int:
        """Number of interior nodes."""
        return len(self.rho) - 2

    @property
    def dy(self) -> float:
        return 2.0 / (self.n + 1)

    @property
    def y(self) -> np.ndarray:
        return -1.0 + self.dy * np.arange(self.n + 2)

    @property
    def y_faces(self) -> np.ndarray:
        return -1.0 + self.dy * (np.arange(self.n + 1) + 0.5)

    def face_gradients(self) -> tuple[np.ndarray, np.ndarray]:
        """``(rho_y, kappa_y)`` on faces."""
        return np.diff(self.rho) / self.dy, np.diff(self.kappa) / self.dy

    def theta(self) -> tuple[np.ndarray, np.ndarray]:
        """Face densities ``(theta+, theta-)``."""
        return _faces_theta(self.rho, self.kappa, self.dy)


def _faces_theta(rho, kappa, dy):
    ry = np.diff(rho) / dy
    ky = np.diff(kappa) / dy
    return 0.5 * (ky + ry), 0.5 * (ky - ry)


def default_dt(n: int, epsilon: float, D0: float = 1.0) -> float:
    """``0.4 * dy^2 / (D0 + eps)``, i.e. 80% of the explicit parabolic limit."""
    dy = 2.0 / (n + 1)
    return DEFAULT_DT_FACTOR * dy * dy / (D0 + epsilon)


def max_stable_dt(state: SlabState1D) -> float:
    return state.dy**2 / (2.0 * (state.D0 + state.epsilon))


@dataclass(frozen=True)
class BackStress:
    values: np.ndarray
    flagged: np.ndarray  # True where theta+ + theta- < floor


def back_stress(
    theta_plus: np.ndarray,
    theta_minus: np.ndarray,
    dy: float,
    D0: float = 1.0,
    floor: float = 1e-8,
) -> BackStress:
    """``tau_b = -D0 (theta+ - theta-)_y / max(theta+ + theta-, floor)``.

    The derivative is ``np.gradient`` (central inside, second-order one-sided at
    the ends). Points where the total density is below ``floor`` are flagged.
    """
    if not D0 > 0 or not floor > 0:
        raise ValidationError("D0 > 0 and floor > 0 required")
    tp = np.asarray(theta_plus, dtype=float)
    tm = np.asarray(theta_minus, dtype=float)
    num = np.gradient(tp - tm, dy, edge_order=2)
    total = tp + tm
    return BackStress(-D0 * num / np.maximum(total, floor), total < floor)


def state_back_stress(state: SlabState1D, floor: float = 1e-8) -> BackStress:
    """Back stress from node densities (``np.gradient`` of ``rho+-``)."""
    tp, tm = node_theta(state)
    return back_stress(tp, tm, state.dy, state.D0, floor)


def node_theta(state: SlabState1D) -> tuple[np.ndarray, np.ndarray]:
    ry = np.gradient(state.rho, state.dy, edge_order=2)
    ky = np.gradient(state.kappa, state.dy, edge_order=2)
    return 0.5 * (ky + ry), 0.5 * (ky - ry)


@njit(cache=True)
def _rhs(rho, kappa, dy, eps, D0, tau, drho, dkappa):
    n2 = rho.shape[0]
    inv2 = 1.0 / (2.0 * dy)
    invsq = 1.0 / (dy * dy)
    for j in range(1, n2 - 1):
        ry = (rho[j + 1] - rho[j - 1]) * inv2
        ryy = (rho[j + 1] - 2.0 * rho[j] + rho[j - 1]) * invsq
        ky = (kappa[j + 1] - kappa[j - 1]) * inv2
        kyy = (kappa[j + 1] - 2.0 * kappa[j] + kappa[j - 1]) * invsq
        drho[j] = (D0 + eps) * ryy - tau * ky
        dkappa[j] = eps * kyy + D0 * ry * ryy / ky - tau * ry
    drho[0] = drho[n2 - 1] = 0.0
    dkappa[0] = dkappa[n2 - 1] = 0.0


@njit(cache=True)
def _face_scan(rho, kappa, dy, gamma_mon):
    """(argmin kappa_y, min kappa_y, min theta, min monitor) over faces."""
    kmin = np.inf
    imin = -1
    tmin = np.inf
    mmin = np.inf
    for j in range(rho.shape[0] - 1):
        ry = (rho[j + 1] - rho[j]) / dy
        ky = (kappa[j + 1] - kappa[j]) / dy
        if ky < kmin:
            kmin = ky
            imin = j
        t = 0.5 * (ky - abs(ry))
        if t < tmin:
            tmin = t
        m = ky - math.sqrt(gamma_mon * gamma_mon + ry * ry)
        if m < mmin:
            mmin = m
    return imin, kmin, tmin, mmin


@njit(cache=True)
def _advance(rho, kappa, dt, n_steps, dy, eps, D0, tau, c0, gamma_floor, gamma_mon, tol):
    """Advance in place for up to ``n_steps`` steps.

    Stops early when the residual ``max|rho_t| + max|kappa_t|`` of the current
    state drops below ``tol`` (no step is taken then) or when ``kappa_y`` falls
    below ``gamma_floor``. Running minima are taken over every visited state.
    """
    n2 = rho.shape[0]
    drho = np.zeros(n2)
    dkappa = np.zeros(n2)
    tmin = np.inf
    kmin = np.inf
    mmin = np.inf
    residual = np.inf
    taken = 0
    bad_index = -1
    bad_value = 0.0
    while True:
        imin, k_lo, t_lo, m_lo = _face_scan(rho, kappa, dy, gamma_mon)
        tmin = min(tmin, t_lo)
        kmin = min(kmin, k_lo)
        mmin = min(mmin, m_lo)
        if k_lo < gamma_floor:
            bad_index = imin
            bad_value = k_lo
            break
        _rhs(rho, kappa, dy, eps, D0, tau, drho, dkappa)
        residual = np.max(np.abs(drho)) + np.max(np.abs(dkappa))
        if residual < tol or taken >= n_steps:
            break
        for j in range(1, n2 - 1):
            rho[j] += dt * drho[j]
            kappa[j] += dt * dkappa[j]
        rho[0] = 0.0
        rho[n2 - 1] = 0.0
        kappa[0] = -c0
        kappa[n2 - 1] = c0
        taken += 1
    return taken, residual, tmin, kmin, mmin, bad_index, bad_value


def _gamma_floor(state: SlabState1D, gamma_floor: float | None) -> float:
    return GAMMA_FLOOR_FACTOR * state.c0 if gamma_floor is None else gamma_floor


def _raise_degenerate(index: int, value: float, state: SlabState1D) -> None:
    y = -1.0 + state.dy * (index + 0.5)
    raise DegenerateGradientError(
        f"kappa_y = {value:.3g} below the floor at face {index} (y = {y:.6g}, t = {state.time:.6g})",
        index=index,
        value=value,
    )


def residual_norm(state: SlabState1D) -> float:
    """``max|rho_t| + max|kappa_t|`` of the discrete right-hand side."""
    drho = np.zeros(state.n + 2)
    dkappa = np.zeros(state.n + 2)
    _rhs(state.rho, state.kappa, state.dy, state.epsilon, state.D0, state.tau, drho, dkappa)
    return float(np.max(np.abs(drho)) + np.max(np.abs(dkappa)))


def step_regularized(
    state: SlabState1D,
    dt: float,
    constants: ElasticConstants | None = None,
    gamma_floor: float | None = None,
) -> SlabState1D:
    """One explicit Euler step with centered differences; boundary values re-pinned.

    Raises
    ------
    StepSizeError
        If ``dt > dy^2 / (2 (D0 + eps))``.
    DegenerateGradientError
        If ``kappa_y`` is below ``gamma_floor`` (default ``1e-8 * c0``) on some face.
    """
    if not dt > 0:
        raise ValidationError(f"dt > 0 required, got {dt!r}")
    limit = max_stable_dt(state)
    if dt > limit * (1 + 1e-12):
        raise StepSizeError(f"dt={dt:.6g} exceeds the parabolic limit {limit:.6g}", limit)
    rho = state.rho.copy()
    kappa = state.kappa.copy()
    taken, _, _, _, _, bad, val = _advance(
        rho, kappa, dt, 1, state.dy, state.epsilon, state.D0, state.tau, state.c0,
        _gamma_floor(state, gamma_floor), 0.0, -1.0,
    )
    if bad >= 0:
        _raise_degenerate(bad, val, state)
    return replace(state, rho=rho, kappa=kappa, time=state.time + dt)


def monitor_lower_bound(state: SlabState1D, gamma: float) -> float:
    """``min_faces kappa_y - sqrt(gamma^2 + rho_y^2)``; nonnegative certifies the bound at level gamma."""
    if gamma < 0:
        raise ValidationError("gamma >= 0 required")
    ry, ky = state.face_gradients()
    return float(np.min(ky - np.sqrt(gamma * gamma + ry * ry)))


def displacement(state: SlabState1D, constants: ElasticConstants) -> np.ndarray:
    """``u2(y) = (tau/mu) y + int_0^y rho dz`` at the nodes (trapezoid rule)."""
    y, rho, h = state.y, state.rho, state.dy
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * h)))
    # exact integral of the piecewise-linear interpolant from -1 to 0
    k = min(int(np.floor(1.0 / h)), state.n)
    s = 0.0 - y[k]
    rho0 = rho[k] + (rho[k + 1] - rho[k]) * s / h
    at_zero = cum[k] + 0.5 * s * (rho[k] + rho0)
    return state.tau / constants.mu * y + (cum - at_zero)


def max_third_difference(state: SlabState1D) -> float:
    """``max |rho_yyy|`` from four-point third differences."""
    if state.n < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(state.rho, 3))) / state.dy**3)


def validate_compact_support(state: SlabState1D, cells: int = 2, tol: float = 1e-12) -> float:
    """Check that ``rho_y`` and ``kappa_y - 2b`` vanish on the ``cells`` faces at each end.

    Returns the background density ``b > 0``. A vanishing ``kappa_y`` would make
    the scheme divide by zero, so compact support is read relative to a
    positive uniform background.
    """
    tp, tm = state.theta()
    ends = np.r_[tp[:cells], tp[-cells:], tm[:cells], tm[-cells:]]
    b = float(ends[0])
    if not b > 0:
        raise ValidationError("background density at the boundary must be positive")
    if np.max(np.abs(ends - b)) > tol * max(1.0, state.c0):
        raise ValidationError(f"theta+- are not equal to a common background on the {cells} faces next to each boundary")
    return b


def bump_initial_state(
    n: int,
    c0: float = 1.0,
    tau: float = 0.5,
    epsilon: float = 0.1,
    D0: float = 1.0,
    background: float = 0.25,
    center: float = 0.4,
    width: float = 0.1,
    cutoff: float = 4.0,
) -> SlabState1D:
    """Uniform background plus compactly supported Gaussian bumps.

    ``theta+`` has a bump at ``-center`` and ``theta-`` its mirror image at
    ``+center``, so ``theta-(y) = theta+(-y)``. The background is
    ``background * c0`` and each field carries total mass ``c0``.
    """
    if not 0 < background < 0.5:
        raise ValidationError("background must lie in (0, 0.5)")
    dy = 2.0 / (n + 1)
    yf = -1.0 + dy * (np.arange(n + 1) + 0.5)

    def bump(y):
        r = (y + center) / width
        g = np.where(np.abs(r) < cutoff, np.exp(-0.5 * r * r) - math.exp(-0.5 * cutoff**2), 0.0)
        return g / (g.sum() * dy)

    mass = c0 * (1.0 - 2.0 * background)
    tp = background * c0 + mass * bump(yf)
    tm = background * c0 + mass * bump(-yf)
    rp = np.concatenate(([-0.5 * c0], -0.5 * c0 + np.cumsum(tp) * dy))
    rm = np.concatenate(([-0.5 * c0], -0.5 * c0 + np.cumsum(tm) * dy))
    rho, kappa = rp - rm, rp + rm
    rho[0] = rho[-1] = 0.0
    kappa[0], kappa[-1] = -c0, c0
    return SlabState1D(rho, kappa, c0, tau, epsilon, D0)


def linear_state(n: int, c0: float = 1.0, tau: float = 0.0, epsilon: float = 0.1, D0: float = 1.0) -> SlabState1D:
    """``rho = 0``, ``kappa = c0 y``: stationary when ``tau = 0``."""
    y = -1.0 + 2.0 / (n + 1) * np.arange(n + 2)
    return SlabState1D(np.zeros(n + 2), c0 * y, c0, tau, epsilon, D0)


@dataclass(frozen=True)
class DiagnosticsRow:
    t: float
    residual: float
    min_theta: float
    min_kappa_y: float
    M_gamma: float
    max_rho_yyy: float
    max_force_imbalance: float


@dataclass
class SteadyRun:
    """Snapshots, per-snapshot diagnostics and the termination report."""

    snapshots: list[SlabState1D]
    diagnostics: list[DiagnosticsRow]
    converged: bool
    reason: str
    steps: int
    final_residual: float
    min_theta: float  # over every step, not only snapshots
    min_kappa_y: float
    min_monitor: float
    dt: float = field(default=0.0)

    @property
    def final(self) -> SlabState1D:
        return self.snapshots[-1]


def force_imbalance(state: SlabState1D, threshold: float = 0.1, floor: float = 1e-8) -> float:
    """``max |tau + tau_b|`` over nodes where ``theta+ + theta-`` exceeds ``threshold`` times its max."""
    tp, tm = node_theta(state)
    total = tp + tm
    mask = total > threshold * total.max()
    tb = back_stress(tp, tm, state.dy, state.D0, floor).values
    return float(np.max(np.abs(state.tau + tb[mask])))


def _diagnostics(state: SlabState1D, gamma: float) -> DiagnosticsRow:
    tp, tm = state.theta()
    return DiagnosticsRow(
        t=state.time,
        residual=residual_norm(state),
        min_theta=float(min(tp.min(), tm.min())),
        min_kappa_y=float(state.face_gradients()[1].min()),
        M_gamma=monitor_lower_bound(state, gamma),
        max_rho_yyy=max_third_difference(state),
        max_force_imbalance=force_imbalance(state),
    )


def run_to_steady(
    initial: SlabState1D,
    constants: ElasticConstants | None = None,
    residual_tol: float = 1e-6,
    t_max: float = 50.0,
    dt: float | None = None,
    snapshot_every: int = 10000,
    monitor_gamma: float = 0.0,
    gamma_floor: float | None = None,
    check_support: bool = True,
) -> SteadyRun:
    """Step until the residual drops below ``residual_tol`` or ``t_max`` is reached.

    Snapshots are kept every ``snapshot_every`` steps plus the initial and
    terminal states. A loss of ``kappa_y`` positivity propagates as
    :class:`DegenerateGradientError`.
    """
    if check_support:
        validate_compact_support(initial)
    dt = default_dt(initial.n, initial.epsilon, initial.D0) if dt is None else dt
    limit = max_stable_dt(initial)
    if dt > limit * (1 + 1e-12):
        raise StepSizeError(f"dt={dt:.6g} exceeds the parabolic limit {limit:.6g}", limit)
    if snapshot_every < 1:
        raise ValidationError("snapshot_every >= 1 required")
    floor = _gamma_floor(initial, gamma_floor)
    total_steps = int(math.ceil((t_max - initial.time) / dt - 1e-9))
    rho, kappa = initial.rho.copy(), initial.kappa.copy()
    snaps = [initial]
    diags = [_diagnostics(initial, monitor_gamma)]
    done = 0
    mins = [np.inf, np.inf, np.inf]
    converged = False
    residual = math.inf
    while True:
        chunk = min(snapshot_every, total_steps - done)
        taken, residual, tmin, kmin, mmin, bad, val = _advance(
            rho, kappa, dt, chunk, initial.dy, initial.epsilon, initial.D0, initial.tau,
            initial.c0, floor, monitor_gamma, residual_tol,
        )
        done += taken
        mins = [min(mins[0], tmin), min(mins[1], kmin), min(mins[2], mmin)]
        t = initial.time + done * dt
        if bad >= 0:
            _raise_degenerate(bad, val, replace(initial, rho=rho.copy(), kappa=kappa.copy(), time=t))
        converged = residual < residual_tol
        if taken or converged or done >= total_steps:
            state = replace(initial, rho=rho.copy(), kappa=kappa.copy(), time=t)
            if taken:
                snaps.append(state)
                diags.append(_diagnostics(state, monitor_gamma))
        if converged or done >= total_steps:
            break
    reason = "residual below tolerance" if converged else "t_max reached"
    return SteadyRun(snaps, diags, converged, reason, done, float(residual), mins[0], mins[1], mins[2], dt)


def write_snapshot_csv(path, state: SlabState1D, constants: ElasticConstants) -> None:
    """Columns ``y, rho, kappa, theta_plus, theta_minus, tau_b, u2`` at the nodes."""
    tp, tm = node_theta(state)
    tb = back_stress(tp, tm, state.dy, state.D0).values
    u2 = displacement(state, constants)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "rho", "kappa", "theta_plus", "theta_minus", "tau_b", "u2"])
        for row in zip(state.y, state.rho, state.kappa, tp, tm, tb, u2):
            w.writerow([f"{x:.17g}" for x in row])


def write_diagnostics_csv(path, rows: list[DiagnosticsRow]) -> None:
    """Columns ``t, residual, min_theta, min_kappa_y, M_gamma, max_rho_yyy``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "residual", "min_theta", "min_kappa_y", "M_gamma", "max_rho_yyy"])
        for r in rows:
            w.writerow([f"{x:.17g}" for x in (r.t, r.residual, r.min_theta, r.min_kappa_y, r.M_gamma, r.max_rho_yyy)])
