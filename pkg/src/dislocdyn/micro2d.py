"""Signed point dislocations interacting through the free-space edge kernel.

Each particle moves along e1 with velocity ``sum_{j != i} s_i s_j sigma0(X_i - X_j)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .elasticity import ElasticConstants, kernel_sigma0
from .errors import CollisionError, ValidationError
from .spectral import PeriodicField2D

MIN_SEPARATION = 1e-6


@dataclass(frozen=True, eq=False)
class ParticleSystem:
    """Positions ``(N, 2)``, signs ``(N,)`` in {+1, -1}, and the current time."""

    positions: np.ndarray
    signs: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        sg = np.array(self.signs, dtype=int).reshape(-1)
        if len(pos) != len(sg):
            raise ValidationError(f"{len(pos)} positions but {len(sg)} signs")
        if not np.all(np.isin(sg, (-1, 1))):
            raise ValidationError("signs must be +1 or -1")
        if not np.all(np.isfinite(pos)):
            raise ValidationError("positions must be finite")
        pos.setflags(write=False)
        sg.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "signs", sg)
        _check_distinct(pos, 0.0)

    def __len__(self) -> int:
        return len(self.signs)


def _check_distinct(pos: np.ndarray, min_sep: float) -> None:
    n = len(pos)
    if n < 2:
        return
    d = np.hypot(*(pos[:, None, :] - pos[None, :, :]).transpose(2, 0, 1))
    d[np.diag_indices(n)] = np.inf
    i, j = np.unravel_index(np.argmin(d), d.shape)
    if d[i, j] <= min_sep:
        i, j = sorted((int(i), int(j)))
        raise CollisionError(
            f"particles {i} and {j} are {d[i, j]:.3g} apart (minimum separation {min_sep:g})",
            pair=(i, j),
        )


def pairwise_velocity(system: ParticleSystem, constants: ElasticConstants) -> np.ndarray:
    """x1-velocities of all particles; the x2-velocity is identically zero."""
    pos = system.positions
    if len(pos) < 2:
        return np.zeros(len(pos))
    _check_distinct(pos, 0.0)
    diff = pos[:, None, :] - pos[None, :, :]
    k = kernel_sigma0(diff, constants)  # zero on the diagonal by convention
    s = system.signs.astype(float)
    return s * (k @ s)


def step_particles(
    system: ParticleSystem,
    dt: float,
    constants: ElasticConstants,
    min_separation: float = MIN_SEPARATION,
) -> ParticleSystem:
    """One forward-Euler step of the x1 coordinates."""
    if not dt > 0:
        raise ValidationError(f"dt > 0 required, got {dt!r}")
    v = pairwise_velocity(system, constants)
    pos = system.positions.copy()
    pos[:, 0] += dt * v
    _check_distinct(pos, min_separation)
    return ParticleSystem(pos, system.signs, system.time + dt)


def empirical_density(
    system: ParticleSystem, grid: int | tuple[int, int], smoothing_width: float
) -> tuple[PeriodicField2D, PeriodicField2D]:
    """Mollified densities ``(theta+, theta-)`` on the unit torus.

    Every particle becomes a periodized Gaussian of standard deviation
    ``smoothing_width``, scaled so that its grid quadrature is exactly 1.
    """
    if not smoothing_width > 0:
        raise ValidationError("smoothing_width > 0 required")
    n1, n2 = (grid, grid) if isinstance(grid, (int, np.integer)) else grid
    pos = system.positions
    if len(pos) and (np.any(pos < 0.0) or np.any(pos >= 1.0)):
        raise ValidationError("particles must lie in the unit cell [0, 1)^2")
    out = {1: np.zeros((n1, n2)), -1: np.zeros((n1, n2))}
    for (x1, x2), s in zip(pos, system.signs):
        b = np.outer(_periodic_gaussian(n1, x1, smoothing_width), _periodic_gaussian(n2, x2, smoothing_width))
        out[int(s)] += b / b.mean()
    return PeriodicField2D(out[1]), PeriodicField2D(out[-1])


def _periodic_gaussian(n: int, center: float, width: float) -> np.ndarray:
    x = np.arange(n) / n
    images = int(np.ceil(8 * width)) + 1
    shifts = np.arange(-images, images + 1)
    d = x[:, None] - center - shifts[None, :]
    return np.exp(-0.5 * (d / width) ** 2).sum(axis=1)


def simulate(
    system: ParticleSystem,
    dt: float,
    n_steps: int,
    constants: ElasticConstants,
    min_separation: float = MIN_SEPARATION,
    snapshot_every: int = 1,
) -> list[ParticleSystem]:
    """Fixed-step trajectory, including the initial state."""
    traj = [system]
    for k in range(1, n_steps + 1):
        system = step_particles(system, dt, constants, min_separation)
        if k % snapshot_every == 0 or k == n_steps:
            traj.append(system)
    return traj


def write_snapshots_csv(path, trajectory: list[ParticleSystem]) -> None:
    """CSV rows ``time, index, sign, x1, x2``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "index", "sign", "x1", "x2"])
        for snap in trajectory:
            for i, ((x1, x2), s) in enumerate(zip(snap.positions, snap.signs)):
                w.writerow([f"{snap.time:.17g}", i, int(s), f"{x1:.17g}", f"{x2:.17g}"])


def random_system(rng: np.random.Generator, n_plus: int, n_minus: int) -> ParticleSystem:
    pos = rng.random((n_plus + n_minus, 2))
    signs = np.r_[np.ones(n_plus, dtype=int), -np.ones(n_minus, dtype=int)]
    return ParticleSystem(pos, signs)
