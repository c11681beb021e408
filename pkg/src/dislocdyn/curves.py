"""Front tracking of closed polygons and the lifted measures ``(g, kappa)`` on R^2 x S^1.

Conventions: ``n(theta) = (cos, sin)``, ``tau(theta) = (sin, -cos)`` and the
tangent angle is defined by ``dy/ds = tau(theta)``. With these, ``n`` is the
left normal of the traversal: inward for counterclockwise curves. Curves are
moved along their outward normal, so the lifted equations are checked with the
signed speed ``-orientation * c``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np
from shapely.geometry import LinearRing

from .errors import StepSizeError, TopologyError, ValidationError

MIN_VERTICES = 8
TWO_PI = 2.0 * math.pi


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True, eq=False)
class Curve:
    """Closed simple polygon; ``orientation`` is +1 for counterclockwise."""

    vertices: np.ndarray
    orientation: int = field(default=0)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValidationError("vertices must have shape (m, 2)")
        if len(v) < MIN_VERTICES:
            raise ValidationError(f"at least {MIN_VERTICES} vertices required, got {len(v)}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("vertices must be finite")
        if np.any(np.all(v == np.roll(v, -1, axis=0), axis=1)):
            raise ValidationError("consecutive vertices must be distinct")
        if not LinearRing(v).is_simple:
            raise TopologyError("polygon self-intersects")
        sign = 1 if _signed_area(v) > 0 else -1
        if self.orientation not in (0, sign):
            raise ValidationError(f"orientation {self.orientation} disagrees with the signed area")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "orientation", sign)

    def __len__(self) -> int:
        return len(self.vertices)

    def edges(self) -> np.ndarray:
        """``v[i+1] - v[i]``."""
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    def edge_lengths(self) -> np.ndarray:
        return np.hypot(*self.edges().T)

    def perimeter(self) -> float:
        return float(self.edge_lengths().sum())

    def area(self) -> float:
        return abs(_signed_area(self.vertices))

    def outward_normals(self) -> np.ndarray:
        """Unit vertex normals bisecting the adjacent outward edge normals."""
        e = self.edges()
        t = e / np.hypot(*e.T)[:, None]
        # right normal is outward for counterclockwise traversal
        en = self.orientation * np.column_stack([t[:, 1], -t[:, 0]])
        vn = en + np.roll(en, 1, axis=0)
        return vn / np.hypot(*vn.T)[:, None]


def circle(radius: float, m: int, center=(0.0, 0.0), orientation: int = 1, phase: float = 0.0) -> Curve:
    s = phase + orientation * TWO_PI * np.arange(m) / m
    return Curve(np.column_stack([center[0] + radius * np.cos(s), center[1] + radius * np.sin(s)]))


def ellipse(a: float, b: float, m: int, orientation: int = 1) -> Curve:
    s = orientation * TWO_PI * np.arange(m) / m
    return Curve(np.column_stack([a * np.cos(s), b * np.sin(s)]))


class VelocityField(Protocol):
    def value(self, y: np.ndarray, t: float) -> np.ndarray: ...
    def gradient(self, y: np.ndarray, t: float) -> np.ndarray: ...
    def hessian(self, y: np.ndarray, t: float) -> np.ndarray: ...


@dataclass(frozen=True)
class QuadraticVelocity:
    """``c(y) = c0 + g.y + y.H.y / 2`` (time independent)."""

    c0: float = 0.0
    grad: tuple[float, float] = (0.0, 0.0)
    hess: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 0.0), (0.0, 0.0))

    def value(self, y, t=0.0):
        y = np.asarray(y, dtype=float)
        h = np.asarray(self.hess)
        return self.c0 + y @ np.asarray(self.grad) + 0.5 * np.einsum("...i,ij,...j->...", y, h, y)

    def gradient(self, y, t=0.0):
        y = np.asarray(y, dtype=float)
        return np.asarray(self.grad) + y @ np.asarray(self.hess).T

    def hessian(self, y, t=0.0):
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(np.asarray(self.hess, dtype=float), y.shape[:-1] + (2, 2))


def constant_velocity(c: float) -> QuadraticVelocity:
    return QuadraticVelocity(c0=c)


def linear_velocity(c0: float, grad: tuple[float, float]) -> QuadraticVelocity:
    return QuadraticVelocity(c0=c0, grad=grad)


def evolve_curve(curve: Curve, c: VelocityField, t: float, dt: float, redistribute_vertices: bool = False) -> Curve:
    """Move every vertex by ``dt * c(y, t)`` along the outward vertex normal.

    Raises
    ------
    StepSizeError
        If ``dt * max|c|`` exceeds half the shortest edge.
    TopologyError
        If the moved polygon self-intersects.
    """
    if not dt > 0:
        raise ValidationError(f"dt > 0 required, got {dt!r}")
    v = curve.vertices
    speed = np.asarray(c.value(v, t), dtype=float) * np.ones(len(v))
    half_edge = 0.5 * curve.edge_lengths().min()
    if dt * np.max(np.abs(speed)) > half_edge:
        raise StepSizeError(f"dt*max|c| = {dt * np.max(np.abs(speed)):.3g} exceeds half the shortest edge", half_edge / np.max(np.abs(speed)))
    moved = v + dt * speed[:, None] * curve.outward_normals()
    try:
        out = Curve(moved)
    except ValidationError as exc:
        raise TopologyError(f"step produced a degenerate polygon: {exc}") from exc
    if out.orientation != curve.orientation:
        raise TopologyError("step inverted the curve orientation")
    return redistribute(out) if redistribute_vertices else out


def redistribute(curve: Curve) -> Curve:
    """Resample at uniform arclength along the polygon, keeping vertex 0 fixed."""
    v = curve.vertices
    closed = np.vstack([v, v[:1]])
    s = np.concatenate(([0.0], np.cumsum(curve.edge_lengths())))
    target = np.linspace(0.0, s[-1], len(v), endpoint=False)
    return Curve(np.column_stack([np.interp(target, s, closed[:, 0]), np.interp(target, s, closed[:, 1])]))


@dataclass(frozen=True, eq=False)
class LiftedMeasure:
    """Vertex samples ``(y, theta)`` with arclength mass ``g`` and curvature mass ``kappa``."""

    y: np.ndarray
    theta: np.ndarray
    g_weight: np.ndarray
    kappa_weight: np.ndarray

    def pair_g(self, values: np.ndarray) -> float:
        return float(np.dot(self.g_weight, values))

    def pair_kappa(self, values: np.ndarray) -> float:
        return float(np.dot(self.kappa_weight, values))

    def total_turning(self) -> float:
        return float(self.kappa_weight.sum())


def tangent_angle(t: np.ndarray) -> np.ndarray:
    """Angle ``theta`` with ``t = (sin theta, -cos theta)``, in ``[0, 2 pi)``."""
    return np.mod(np.arctan2(t[..., 0], -t[..., 1]), TWO_PI)


def n_of(theta):
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def tau_of(theta):
    return np.stack([np.sin(theta), -np.cos(theta)], axis=-1)


def lift_measures(curve: Curve) -> LiftedMeasure:
    """Vertex-based lift.

    ``g_weight`` is the mean of the two adjacent edge lengths. ``kappa_weight``
    is the turning angle at the vertex, i.e. the wrapped difference of the
    adjacent edge angles, so the weights telescope to ``+-2 pi``. The vertex
    angle is the incoming edge angle plus half the turn.
    """
    e = curve.edges()
    lengths = np.hypot(*e.T)
    edge_theta = tangent_angle(e / lengths[:, None])
    incoming = np.roll(edge_theta, 1)
    turn = np.mod(edge_theta - incoming + math.pi, TWO_PI) - math.pi
    theta = np.mod(incoming + 0.5 * turn, TWO_PI)
    g = 0.5 * (lengths + np.roll(lengths, 1))
    return LiftedMeasure(curve.vertices.copy(), theta, g, turn)


@dataclass(frozen=True)
class GaussianFourier:
    """``phi(y, theta) = exp(-|y - center|^2 / (2 w^2)) * (a0 + a cos(k theta) + b sin(k theta))``."""

    center: tuple[float, float]
    width: float
    a0: float
    a: float
    b: float
    k: int

    def _gauss(self, y):
        d = np.asarray(y, dtype=float) - np.asarray(self.center)
        return np.exp(-0.5 * np.sum(d * d, axis=-1) / self.width**2), d

    def _angular(self, theta):
        return self.a0 + self.a * np.cos(self.k * theta) + self.b * np.sin(self.k * theta)

    def value(self, y, theta):
        gs, _ = self._gauss(y)
        return gs * self._angular(theta)

    def grad_y(self, y, theta):
        gs, d = self._gauss(y)
        return (-(gs * self._angular(theta)) / self.width**2)[..., None] * d

    def d_theta(self, y, theta):
        gs, _ = self._gauss(y)
        return gs * self.k * (-self.a * np.sin(self.k * theta) + self.b * np.cos(self.k * theta))


def default_test_family(
    count: int = 12,
    seed: int = 0,
    center_radius: float = 2.0,
    width_range: tuple[float, float] = (0.4, 0.8),
    max_mode: int = 2,
) -> list[GaussianFourier]:
    """Seeded Gaussian-in-y times low-order Fourier-in-theta test functions."""
    rng = np.random.default_rng(seed)
    fam = []
    for i in range(count):
        r = center_radius * math.sqrt(rng.random())
        ang = TWO_PI * rng.random()
        a0, a, b = rng.uniform(-1.0, 1.0, 3)
        fam.append(
            GaussianFourier(
                center=(r * math.cos(ang), r * math.sin(ang)),
                width=float(rng.uniform(*width_range)),
                a0=float(a0),
                a=float(a),
                b=float(b),
                k=1 + i % max_mode,
            )
        )
    return fam


def compatibility_pairing(measure: LiftedMeasure, phi) -> float:
    """``<g, -tau . grad_y phi> + <kappa, -d_theta phi>`` (unnormalized)."""
    y, th = measure.y, measure.theta
    tdot = np.sum(tau_of(th) * phi.grad_y(y, th), axis=-1)
    return -measure.pair_g(tdot) - measure.pair_kappa(phi.d_theta(y, th))


def compatibility_residual(measure: LiftedMeasure, test_functions: Sequence) -> float:
    """Max over the family of the weak compatibility pairing, divided by the perimeter."""
    per = float(measure.g_weight.sum())
    return max(abs(compatibility_pairing(measure, phi)) for phi in test_functions) / per


def transport_terms(measure: LiftedMeasure, c: VelocityField, phi, t: float = 0.0, sign: float = 1.0) -> dict[str, float]:
    """Spatial pairings of both transport equations for the signed speed ``sign * c``.

    Returned keys (weak forms with ``phi`` independent of time):
    ``g_flux = <g, c n.grad phi>``, ``g_turn = <g, (tau.grad c) d_theta phi>``,
    ``g_source = <kappa, c phi>``, ``k_flux``, ``k_turn``,
    ``k_stretch = <kappa, (n.grad c) phi>``, ``k_hess = <g, (tau tau : hess c) phi>``.
    """
    y, th = measure.y, measure.theta
    n, tv = n_of(th), tau_of(th)
    cv = sign * np.asarray(c.value(y, t), dtype=float) * np.ones(len(th))
    gc = sign * np.asarray(c.gradient(y, t), dtype=float) * np.ones((len(th), 2))
    hc = sign * np.asarray(c.hessian(y, t), dtype=float) * np.ones((len(th), 2, 2))
    pv = phi.value(y, th)
    ndot = np.sum(n * phi.grad_y(y, th), axis=-1)
    tgc = np.sum(tv * gc, axis=-1)
    ngc = np.sum(n * gc, axis=-1)
    tht = np.einsum("ni,nij,nj->n", tv, hc, tv)
    dth = phi.d_theta(y, th)
    return {
        "g_flux": measure.pair_g(cv * ndot),
        "g_turn": measure.pair_g(tgc * dth),
        "g_source": measure.pair_kappa(cv * pv),
        "k_flux": measure.pair_kappa(cv * ndot),
        "k_turn": measure.pair_kappa(tgc * dth),
        "k_stretch": measure.pair_kappa(ngc * pv),
        "k_hess": measure.pair_g(tht * pv),
    }


def transport_residual(
    trajectory: Sequence[tuple[Curve, LiftedMeasure]] | Sequence[Curve],
    c: VelocityField,
    test_functions: Sequence,
    dt: float,
    t0: float = 0.0,
) -> float:
    """Max weak residual of both transport equations over interior snapshots and the family.

    Time derivatives are central differences of the pairings ``<g, phi>`` and
    ``<kappa, phi>``. Each residual is divided by the snapshot perimeter.
    """
    items = [(s, lift_measures(s)) if isinstance(s, Curve) else s for s in trajectory]
    if len(items) < 3:
        raise ValidationError("need at least three snapshots for central differences")
    orient = {cv.orientation for cv, _ in items}
    if len(orient) != 1:
        raise TopologyError("orientation changed along the trajectory")
    sign = -float(orient.pop())
    worst = 0.0
    for phi in test_functions:
        pg = [ms.pair_g(phi.value(ms.y, ms.theta)) for _, ms in items]
        pk = [ms.pair_kappa(phi.value(ms.y, ms.theta)) for _, ms in items]
        for k in range(1, len(items) - 1):
            ms = items[k][1]
            terms = transport_terms(ms, c, phi, t0 + k * dt, sign)
            dg = (pg[k + 1] - pg[k - 1]) / (2 * dt)
            dk = (pk[k + 1] - pk[k - 1]) / (2 * dt)
            r1 = dg - terms["g_flux"] - terms["g_turn"] + terms["g_source"]
            r2 = dk - terms["k_flux"] - terms["k_turn"] - terms["k_stretch"] - terms["k_hess"]
            per = float(ms.g_weight.sum())
            worst = max(worst, abs(r1) / per, abs(r2) / per)
    return worst


def evolve(curve: Curve, c: VelocityField, dt: float, n_steps: int, t0: float = 0.0, redistribute_vertices: bool = False) -> list[Curve]:
    """Fixed-step trajectory including the initial curve."""
    traj = [curve]
    for k in range(n_steps):
        curve = evolve_curve(curve, c, t0 + k * dt, dt, redistribute_vertices)
        traj.append(curve)
    return traj


def mean_radius(curve: Curve, center=(0.0, 0.0)) -> float:
    return float(np.mean(np.hypot(*(curve.vertices - np.asarray(center)).T)))


def write_curve_snapshots_csv(path, trajectory: Sequence[Curve], dt: float, t0: float = 0.0, every: int = 1) -> None:
    """Columns ``t, vertex, x, y, theta, g_weight, kappa_weight``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "vertex", "x", "y", "theta", "g_weight", "kappa_weight"])
        for k, cv in enumerate(trajectory):
            if k % every and k != len(trajectory) - 1:
                continue
            ms = lift_measures(cv)
            t = f"{t0 + k * dt:.17g}"
            for i in range(len(cv)):
                w.writerow([t, i] + [f"{x:.17g}" for x in (ms.y[i, 0], ms.y[i, 1], ms.theta[i], ms.g_weight[i], ms.kappa_weight[i])])


def write_residual_report_csv(path, rows: Sequence[tuple[int, float, float]]) -> None:
    """Columns ``level, compatibility_residual, transport_residual``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "compatibility_residual", "transport_residual"])
        for level, comp, trans in rows:
            w.writerow([level, f"{comp:.17g}", f"{trans:.17g}"])


REFINEMENT_LEVELS: tuple[tuple[int, float], ...] = ((64, 0.04), (128, 0.02), (256, 0.01))


def circle_refinement_study(
    levels: Sequence[tuple[int, float]] = REFINEMENT_LEVELS,
    r0: float = 1.0,
    speed: float = 1.0,
    t_final: float = 1.0,
    test_functions: Sequence | None = None,
) -> list[tuple[int, float, float]]:
    """Compatibility (max over snapshots) and transport residuals for the expanding circle."""
    fam = default_test_family() if test_functions is None else test_functions
    c = constant_velocity(speed)
    rows = []
    for level, (m, dt) in enumerate(levels):
        traj = evolve(circle(r0, m), c, dt, int(round(t_final / dt)))
        items = [(cv, lift_measures(cv)) for cv in traj]
        comp = max(compatibility_residual(ms, fam) for _, ms in items)
        rows.append((level, comp, transport_residual(items, c, fam, dt)))
    return rows
