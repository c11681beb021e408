"""Dispatch a validated :class:`SimConfig` to the model drivers and write outputs."""
from __future__ import annotations

import csv
import json
import os
import platform
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from . import __version__
from . import curves, gb2d, gcz1d, micro2d, sub1d
from .config import SimConfig
from .elasticity import derive_constants

OUTPUT_ROOT_ENV = "DISLOCDYN_OUTPUT_ROOT"


@dataclass
class RunResult:
    output_dir: Path
    files: list[str]
    report: dict = field(default_factory=dict)


def resolve_output_dir(config: SimConfig, override: str | os.PathLike | None = None) -> Path:
    """``override`` wins; otherwise a relative ``output_dir`` is placed under ``$DISLOCDYN_OUTPUT_ROOT``."""
    if override is not None:
        return Path(override)
    out = Path(config.output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        return Path(root) / out
    return out


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.17g}"


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def _versions() -> dict[str, str]:
    out = {"dislocdyn": __version__, "python": platform.python_version(), "numpy": np.__version__}
    for pkg in ("numba", "shapely"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            pass
    return out


def _run_micro2d(cfg: SimConfig, out: Path, C) -> dict:
    p, t = cfg.params, cfg.time
    rng = np.random.default_rng(cfg.seed)
    system = micro2d.random_system(rng, p["n_plus"], p["n_minus"])
    traj = micro2d.simulate(system, t["dt"], t["n_steps"], C, p["min_separation"], t["snapshot_every"])
    micro2d.write_snapshots_csv(out / "snapshots.csv", traj)
    rows = []
    for s in traj:
        pos, sg = s.positions, s.signs
        if len(pos) > 1:
            d = np.hypot(*(pos[:, None, :] - pos[None, :, :]).transpose(2, 0, 1))
            d[np.diag_indices(len(pos))] = np.inf
            dmin = d.min()
        else:
            dmin = np.inf
        mp = pos[sg == 1, 0].mean() if np.any(sg == 1) else np.nan
        mm = pos[sg == -1, 0].mean() if np.any(sg == -1) else np.nan
        rows.append((s.time, dmin, mp, mm))
    _write_rows(out / "diagnostics.csv", ["t", "min_distance", "mean_x1_plus", "mean_x1_minus"], rows)
    return {"snapshots": len(traj)}


def _run_gb2d(cfg: SimConfig, out: Path, C) -> dict:
    p, t = cfg.params, cfg.time
    rng = np.random.default_rng(cfg.seed)
    state = gb2d.random_smooth_state(rng, p["n1"], p["n2"], p["L"], p["amplitude"], p["max_mode"])
    every = t["snapshot_every"]
    kept: list[tuple[int, gb2d.GBState]] = []

    def recorded():
        for k, st in enumerate(gb2d.simulate(state, C, t["n_steps"], cfl=t["cfl"])):
            if k % every == 0 or k == t["n_steps"]:
                kept.append((k, st))
            yield st

    budget = gb2d.entropy_budget(recorded(), C)
    rows = []
    for i, (k, st) in enumerate(kept):
        gb2d.write_snapshot_csv(out / f"snapshot_{i:05d}.csv", st, C)
        d = gb2d.diagnostics_row(st, float(budget[k]))
        rows.append((k, d["t"], d["S"], d["B"], d["zygmund_plus"], d["zygmund_minus"]))
    _write_rows(out / "diagnostics.csv", ["step", "t", "S", "B", "zygmund_plus", "zygmund_minus"], rows)
    return {"snapshots": len(kept), "max_budget": float(budget.max())}


def _run_sub1d(cfg: SimConfig, out: Path, C) -> dict:
    p, t = cfg.params, cfg.time
    rng = np.random.default_rng(cfg.seed)
    state = sub1d.random_monotone_state(rng, p["n"], p["L"])
    traj = sub1d.evolve(
        state, C, t["t_max"], t["cfl"], p["c2_override"], p["forcing_amplitude"], p["forcing_period"], t["snapshot_every"]
    )
    rows = []
    for i, st in enumerate(traj):
        f = sub1d.forcing_value(st.time, p["forcing_amplitude"], p["forcing_period"])
        sub1d.write_snapshot_csv(out / f"snapshot_{i:05d}.csv", st, C, p["c2_override"], f)
        v = sub1d.velocity_field(st, C, p["c2_override"], f)
        inc = min(sub1d.forward_slope(st.rho_plus, st.line_density_L).min(), sub1d.forward_slope(st.rho_minus, st.line_density_L).min())
        rows.append((st.time, sub1d.max_slope(st), inc / st.n, np.max(np.abs(v))))
    _write_rows(out / "diagnostics.csv", ["t", "max_slope", "min_increment", "max_abs_velocity"], rows)
    return {"snapshots": len(traj)}


def _run_gcz1d(cfg: SimConfig, out: Path, C) -> dict:
    p, t = cfg.params, cfg.time
    if p["initial"] == "linear":
        init = gcz1d.linear_state(p["n"], p["c0"], p["tau"], p["epsilon"], p["D0"])
    else:
        init = gcz1d.bump_initial_state(
            p["n"], p["c0"], p["tau"], p["epsilon"], p["D0"], p["background"], p["center"], p["width"]
        )
    res = gcz1d.run_to_steady(
        init, C, p["residual_tol"], t["t_max"], t["dt"], t["snapshot_every"], p["monitor_gamma"]
    )
    for i, st in enumerate(res.snapshots):
        gcz1d.write_snapshot_csv(out / f"snapshot_{i:05d}.csv", st, C)
    gcz1d.write_diagnostics_csv(out / "diagnostics.csv", res.diagnostics)
    return {
        "converged": res.converged,
        "reason": res.reason,
        "steps": res.steps,
        "final_time": res.final.time,
        "final_residual": res.final_residual,
        "min_theta": res.min_theta,
        "min_kappa_y": res.min_kappa_y,
        "min_monitor": res.min_monitor,
    }


def _velocity(p: dict) -> curves.QuadraticVelocity:
    if p["velocity"] == "constant":
        return curves.constant_velocity(p["c0"])
    if p["velocity"] == "linear":
        return curves.linear_velocity(p["c0"], (p["grad_x"], p["grad_y"]))
    return curves.QuadraticVelocity(
        p["c0"], (p["grad_x"], p["grad_y"]), ((p["hess_xx"], p["hess_xy"]), (p["hess_xy"], p["hess_yy"]))
    )


def _run_curves(cfg: SimConfig, out: Path, C) -> dict:
    p, t = cfg.params, cfg.time
    if p["shape"] == "circle":
        c0 = curves.circle(p["radius"], p["vertices"])
    else:
        c0 = curves.ellipse(p["semi_axis_x"], p["semi_axis_y"], p["vertices"])
    vel = _velocity(p)
    dt = t["dt"]
    n_steps = int(round(t["t_max"] / dt))
    traj = curves.evolve(c0, vel, dt, n_steps, redistribute_vertices=p["redistribute"])
    every = t["snapshot_every"]
    curves.write_curve_snapshots_csv(out / "snapshots.csv", traj, dt, every=every)
    fam = curves.default_test_family(seed=cfg.seed)
    rows, comp = [], 0.0
    for k, cv in enumerate(traj):
        ms = curves.lift_measures(cv)
        r = curves.compatibility_residual(ms, fam)
        comp = max(comp, r)
        if k % every == 0 or k == n_steps:
            rows.append((k * dt, curves.mean_radius(cv), cv.perimeter(), ms.total_turning(), r))
    _write_rows(out / "diagnostics.csv", ["t", "mean_radius", "perimeter", "total_turning", "compatibility_residual"], rows)
    report = {"steps": n_steps, "max_compatibility_residual": comp}
    if len(traj) >= 3 and not p["redistribute"]:
        trans = curves.transport_residual(traj, vel, fam, dt)
        curves.write_residual_report_csv(out / "residuals.csv", [(0, comp, trans)])
        report["transport_residual"] = trans
    return report


DRIVERS = {
    "micro2d": _run_micro2d,
    "gb2d": _run_gb2d,
    "sub1d": _run_sub1d,
    "gcz1d": _run_gcz1d,
    "curves": _run_curves,
}


def run(config: SimConfig, output_dir: str | os.PathLike | None = None) -> RunResult:
    """Run one simulation and write CSVs plus ``manifest.json`` into the output directory."""
    out = resolve_output_dir(config, output_dir)
    out.mkdir(parents=True, exist_ok=True)
    C = derive_constants(config.material["lambda"], config.material["mu"])
    start = time.perf_counter()
    report = DRIVERS[config.model](config, out, C)
    wall = time.perf_counter() - start
    files = sorted(f.name for f in out.iterdir() if f.suffix == ".csv")
    manifest = {
        "config": config.to_dict(),
        "versions": _versions(),
        "wall_time_s": wall,
        "outputs": files,
        "report": report,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    return RunResult(out, files, report)
