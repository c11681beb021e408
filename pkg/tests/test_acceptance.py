"""Acceptance criteria, each at its stated tolerance.

Every run writes its outputs into a directory so the determinism criterion
can rerun it and compare files byte for byte.
"""
import csv
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import quad

from dislocdyn import curves, gb2d, gcz1d, micro2d, sub1d
from dislocdyn.elasticity import derive_constants
from dislocdyn.errors import InvalidStateError
from dislocdyn.spectral import (
    PeriodicField2D,
    antiderivative_x1,
    grid_points,
    riesz_transform,
    sigma12_from_rho_diff,
)

C = derive_constants(1.0, 1.0)
TWO_PI = 2 * math.pi
GB_SEED = 20240
SUB1D_SEED = 4242
MODES = [(1, 0), (0, 3), (1, 1), (3, -2), (5, 7), (-4, 9), (12, 1)]


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([x if isinstance(x, (int, str)) else f"{x:.17g}" for x in r])


# ---------------------------------------------------------------- runs


def run_spectral(out: Path) -> dict:
    x1, x2 = grid_points(64, 64)
    worst = {"R1": 0.0, "R2": 0.0, "antiderivative": 0.0, "sigma12": 0.0}
    rows = []
    for k1, k2 in MODES:
        phase = TWO_PI * (k1 * x1 + k2 * x2)
        f = PeriodicField2D(np.cos(phase))
        kn = math.hypot(k1, k2)
        cases = {
            "R1": (riesz_transform(f, 1).values, k1 / kn * np.sin(phase)),
            "R2": (riesz_transform(f, 2).values, k2 / kn * np.sin(phase)),
            "sigma12": (sigma12_from_rho_diff(f, C).values, C.a_bar * k1**2 * k2**2 / kn**4 * np.cos(phase)),
        }
        if k1 != 0:
            cases["antiderivative"] = (antiderivative_x1(f).values, np.sin(phase) / (TWO_PI * k1))
        for name, (got, exp) in cases.items():
            scale = np.max(np.abs(exp))
            err = np.max(np.abs(got - exp)) / scale if scale > 0 else np.max(np.abs(got))
            worst[name] = max(worst[name], err)
            rows.append((f"{k1},{k2}", name, err))
    write_rows(out / "c1_spectral.csv", ["mode", "operator", "relative_error"], rows)
    return worst


def run_gb(out: Path) -> dict:
    state = gb2d.random_smooth_state(np.random.default_rng(GB_SEED), 64, 64)
    rows0 = gb2d.row_line_density(state.theta_plus), gb2d.row_line_density(state.theta_minus)
    mass0 = state.theta_plus.values.sum(), state.theta_minus.values.sum()
    stats = {"min_theta": np.inf, "mass_drift": 0.0, "row_drift": 0.0}
    snaps = []

    def tracked():
        for k, st in enumerate(gb2d.simulate(state, C, 2000, cfl=0.5)):
            tp, tm = st.theta_plus.values, st.theta_minus.values
            stats["min_theta"] = min(stats["min_theta"], tp.min(), tm.min())
            stats["mass_drift"] = max(
                stats["mass_drift"], abs(tp.sum() - mass0[0]) / mass0[0], abs(tm.sum() - mass0[1]) / mass0[1]
            )
            for f, r0 in ((st.theta_plus, rows0[0]), (st.theta_minus, rows0[1])):
                stats["row_drift"] = max(stats["row_drift"], np.max(np.abs(gb2d.row_line_density(f) - r0) / r0))
            if k % 100 == 0:
                snaps.append((k, st.time, gb2d.entropy(st)))
            last = st
            yield st
        stats["final"] = last

    t0 = time.perf_counter()
    budget = gb2d.entropy_budget(tracked(), C)
    stats["seconds"] = time.perf_counter() - t0
    stats["budget"] = budget
    stats["S0"] = snaps[0][2]
    write_rows(out / "c2_gb_diagnostics.csv", ["step", "t", "S", "B"], [(k, t, s, budget[k]) for k, t, s in snaps])
    gb2d.write_snapshot_csv(out / "c2_gb_final.csv", stats["final"], C)
    return stats


def run_sub1d_comparison(out: Path) -> list[bool]:
    rng = np.random.default_rng(SUB1D_SEED)
    results = [sub1d.comparison_check(*sub1d.random_ordered_pair(rng, 128), 0.5, C) for _ in range(50)]
    write_rows(out / "c4_comparison.csv", ["pair", "ordered"], [(i, int(r)) for i, r in enumerate(results)])
    return results


def run_sub1d_monotone(out: Path) -> list[float]:
    """Same 50 pairs, physical c2: smallest reconstructed increment seen along each run."""
    rng = np.random.default_rng(SUB1D_SEED)
    worst = []
    for _ in range(50):
        a, b = sub1d.random_ordered_pair(rng, 128)
        m = np.inf
        for s in (a, b):
            try:
                traj = sub1d.evolve(s, C, 0.5, c2=C.c2)
            except InvalidStateError:
                m = -np.inf
                continue
            for st in traj:
                L = st.line_density_L
                inc = min(sub1d.forward_slope(st.rho_plus, L).min(), sub1d.forward_slope(st.rho_minus, L).min()) / st.n
                m = min(m, inc)
        worst.append(m)
    write_rows(out / "c5_monotone.csv", ["pair", "min_increment"], list(enumerate(worst)))
    return worst


def run_gcz_monitor(out: Path) -> dict:
    s = gcz1d.bump_initial_state(200, c0=1.0, tau=0.0, epsilon=0.1)
    delta = 0.2 * s.c0
    m0 = gcz1d.monitor_lower_bound(s, delta)
    t0 = time.perf_counter()
    res = gcz1d.run_to_steady(s, C, residual_tol=0.0, t_max=1.0, snapshot_every=1000, monitor_gamma=delta)
    gcz1d.write_diagnostics_csv(out / "c6_gcz_monitor.csv", res.diagnostics)
    return {
        "initial": m0,
        "snapshot_min": min(d.M_gamma for d in res.diagnostics),
        "step_min": res.min_monitor,
        "final_time": res.final.time,
        "seconds": time.perf_counter() - t0,
    }


def run_gcz_reference(out: Path) -> dict:
    s = gcz1d.bump_initial_state(200, c0=1.0, tau=0.5, epsilon=0.1)
    res = gcz1d.run_to_steady(s, C, residual_tol=1e-6, t_max=50.0, snapshot_every=20000)
    gcz1d.write_snapshot_csv(out / "c7_gcz_initial.csv", s, C)
    gcz1d.write_snapshot_csv(out / "c7_gcz_final.csv", res.final, C)
    gcz1d.write_diagnostics_csv(out / "c7_gcz_diagnostics.csv", res.diagnostics)
    return {"initial": s, "result": res}


def run_curve_offset(out: Path) -> dict:
    traj = curves.evolve(curves.circle(1.0, 256), curves.constant_velocity(1.0), 0.01, 100)
    rel_perim, turn_err = 0.0, 0.0
    for k, cv in enumerate(traj):
        ms = curves.lift_measures(cv)
        r = 1.0 + 0.01 * k
        rel_perim = max(rel_perim, abs(ms.g_weight.sum() - TWO_PI * r) / (TWO_PI * r))
        turn_err = max(turn_err, abs(ms.total_turning() - TWO_PI))
    curves.write_curve_snapshots_csv(out / "c9_curve_snapshots.csv", traj, 0.01, every=10)
    return {"radius": curves.mean_radius(traj[-1]), "rel_perimeter": rel_perim, "turning": turn_err}


def circle_pairings_exact(r: float, phi) -> tuple[float, float]:
    """Closed-form circle lift: theta = psi + pi, ds = r dpsi, curvature 1/r."""

    def f(psi):
        return phi.value(np.array([r * math.cos(psi), r * math.sin(psi)]), psi + math.pi)

    return quad(lambda p: r * f(p), 0, TWO_PI, limit=200)[0], quad(f, 0, TWO_PI, limit=200)[0]


def run_curve_refinement(out: Path) -> dict:
    t0 = time.perf_counter()
    rows = curves.circle_refinement_study()
    fam = curves.default_test_family()
    oracle_err = []
    for m, dt in curves.REFINEMENT_LEVELS:
        traj = curves.evolve(curves.circle(1.0, m), curves.constant_velocity(1.0), dt, int(round(1.0 / dt)))
        ms = curves.lift_measures(traj[-1])
        err = 0.0
        for phi in fam:
            g_ex, k_ex = circle_pairings_exact(2.0, phi)
            v = phi.value(ms.y, ms.theta)
            err = max(err, abs(ms.pair_g(v) - g_ex), abs(ms.pair_kappa(v) - k_ex))
        oracle_err.append(err)
    curves.write_residual_report_csv(out / "c10_residuals.csv", rows)
    return {"rows": rows, "oracle": oracle_err, "seconds": time.perf_counter() - t0}


def run_pair_signs(out: Path) -> list[tuple]:
    rows = []
    for d in (0.1, 0.2, 0.3):
        plus, minus = (0.35, 0.5), (0.35 + d, 0.5)
        st = gb2d.mollified_pair_state(128, plus, minus, 0.02)
        sig = gb2d.compute_stress(st, C).values
        v_plus, v_minus = gb2d.sample_periodic(sig, plus), -gb2d.sample_periodic(sig, minus)
        vm = micro2d.pairwise_velocity(micro2d.ParticleSystem([plus, minus], [1, -1]), C)
        rows.append((d, v_plus, v_minus, vm[0], vm[1]))
    write_rows(out / "c11_pair_signs.csv", ["d", "gb_v_plus", "gb_v_minus", "micro_v_plus", "micro_v_minus"], rows)
    return rows


RUNS = {
    "spectral": run_spectral,
    "gb": run_gb,
    "comparison": run_sub1d_comparison,
    "monotone": run_sub1d_monotone,
    "gcz_monitor": run_gcz_monitor,
    "gcz_reference": run_gcz_reference,
    "curve_offset": run_curve_offset,
    "curve_refinement": run_curve_refinement,
    "pair_signs": run_pair_signs,
}


@pytest.fixture(scope="module")
def first_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance_a")


@pytest.fixture(scope="module")
def results(first_dir):
    cache = {}

    def get(name):
        if name not in cache:
            t0 = time.perf_counter()
            cache[name] = RUNS[name](first_dir)
            cache[name + "_seconds"] = time.perf_counter() - t0
        return cache[name]

    return get


# ---------------------------------------------------------------- criteria


def test_c01_spectral_single_modes(results, acceptance_report):
    worst = results("spectral")
    secs = results("spectral_seconds")
    ok = max(worst.values()) <= 1e-12 and secs < 1.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f"; {secs:.2f} s"
    assert acceptance_report(1, "spectral single-mode multipliers (64^2, rel 1e-12, < 1 s)", ok, detail)


def test_c02_gb_positivity_conservation(results, acceptance_report):
    s = results("gb")
    ok = s["min_theta"] >= -1e-12 and s["mass_drift"] <= 1e-12 and s["row_drift"] <= 1e-10 and s["seconds"] < 30
    detail = (
        f"min theta {s['min_theta']:.3e}, mass drift {s['mass_drift']:.1e}, "
        f"row drift {s['row_drift']:.1e}, {s['seconds']:.1f} s"
    )
    assert acceptance_report(2, "GB positivity and conservation (64^2, 2000 steps)", ok, detail)


def test_c03_entropy_budget(results, acceptance_report):
    s = results("gb")
    b = s["budget"]
    bound = 1e-6 * abs(s["S0"]) + 1e-8
    ok = b.max() <= bound and bool(np.all(np.diff(b) <= 0))
    detail = f"max B {b.max():.3e} (bound {bound:.3e}), max increment {np.diff(b).max():.3e}"
    assert acceptance_report(3, "entropy budget B <= 1e-6|S0| + 1e-8 and nonincreasing", ok, detail)


def test_c04_comparison_principle(results, acceptance_report):
    res = results("comparison")
    secs = results("comparison_seconds")
    ok = all(res) and secs < 10
    assert acceptance_report(4, "1D comparison principle, c2 = 0 (50 pairs, n=128, t=0.5)", ok, f"{sum(res)}/50 ordered, {secs:.1f} s")


def test_c05_monotonicity(results, acceptance_report):
    worst = results("monotone")
    ok = min(worst) >= -1e-12
    assert acceptance_report(5, "1D monotonicity with c2 = 0.5", ok, f"min increment {min(worst):.3e}")


def test_c06_gcz_monitor(results, acceptance_report):
    r = results("gcz_monitor")
    ok = r["initial"] >= 0 and r["snapshot_min"] >= -1e-8 and r["final_time"] >= 1.0 - 1e-9 and r["seconds"] < 60
    detail = f"M at t=0 {r['initial']:.4f}, min over snapshots {r['snapshot_min']:.4f}, min over steps {r['step_min']:.4f}, {r['seconds']:.1f} s"
    assert acceptance_report(6, "GCZ lower-bound monitor, tau=0, delta=0.2 c0, t=1", ok, detail)


def test_c07_gcz_positivity_and_convergence(results, acceptance_report):
    res = results("gcz_reference")["result"]
    ok = res.min_theta >= -1e-8 and res.min_kappa_y > 0 and res.converged and res.final.time < 50.0
    detail = (
        f"min theta {res.min_theta:.4f}, min kappa_y {res.min_kappa_y:.4f}, "
        f"residual {res.final_residual:.2e} at t={res.final.time:.3f} ({res.reason})"
    )
    assert acceptance_report(7, "GCZ reference run positivity and steady state before t=50", ok, detail)


def test_c08a_elastic_response(results, acceptance_report):
    s = results("gcz_reference")["initial"]
    # at t = 0+ only the elastic part of u2 differs from the unloaded plastic profile
    du = gcz1d.displacement(s, C) - gcz1d.displacement(gcz1d.SlabState1D(s.rho, s.kappa, s.c0, 0.0, s.epsilon, s.D0), C)
    A = np.column_stack([s.y, np.ones_like(s.y)])
    coef, *_ = np.linalg.lstsq(A, du, rcond=None)
    dev = float(np.max(np.abs(du - A @ coef)))
    ok = dev < 1e-10
    assert acceptance_report("8a", "u2 minus plastic part linear at t=0+", ok, f"max deviation from line {dev:.2e}, slope {coef[0]:.6f}")


def test_c08b_force_balance(results, acceptance_report):
    res = results("gcz_reference")["result"]
    st = res.final
    tp, tm = gcz1d.node_theta(st)
    total = tp + tm
    mask = total > 0.1 * total.max()
    tau_b = gcz1d.back_stress(tp, tm, st.dy, st.D0).values
    worst = float(np.max(np.abs(st.tau + tau_b[mask])))
    ok = worst < 0.05 * st.tau
    detail = (
        f"max |tau + tau_b| = {worst / st.tau:.4f} tau (threshold 0.05 tau; "
        f"regularized steady state predicts eps/(1+eps) = {st.epsilon / (1 + st.epsilon):.4f} tau)"
    )
    assert acceptance_report("8b", "steady force balance |tau + tau_b| < 0.05 tau", ok, detail)


def test_c09_curve_offset(results, acceptance_report):
    r = results("curve_offset")
    ok = abs(r["radius"] - 2.0) < 1e-3 and r["rel_perimeter"] < 1e-3 and r["turning"] < 1e-9
    detail = f"radius {r['radius']:.6f}, perimeter rel err {r['rel_perimeter']:.2e}, turning err {r['turning']:.1e}"
    assert acceptance_report(9, "circle offset r(t) = 1 + t (256 vertices, dt=0.01)", ok, detail)


def test_c10_lifted_residuals(results, acceptance_report):
    r = results("curve_refinement")
    rows, orc = r["rows"], r["oracle"]
    comp_ratio = [rows[i][1] / rows[i + 1][1] for i in range(2)]
    trans_ratio = [rows[i][2] / rows[i + 1][2] for i in range(2)]
    orc_ratio = [orc[i] / orc[i + 1] for i in range(2)]
    ok = min(comp_ratio + trans_ratio + orc_ratio) >= 3 and r["seconds"] < 60
    detail = (
        "compat ratios " + ", ".join(f"{x:.2f}" for x in comp_ratio)
        + "; transport ratios " + ", ".join(f"{x:.2f}" for x in trans_ratio)
        + "; oracle ratios " + ", ".join(f"{x:.2f}" for x in orc_ratio)
        + f"; {r['seconds']:.1f} s"
    )
    assert acceptance_report(10, "compatibility and transport residuals shrink >= 3x per halving", ok, detail)


def test_c11_micro_meanfield_signs(results, acceptance_report):
    rows = results("pair_signs")
    ok = all(np.sign(gp) == np.sign(mp) and np.sign(gm) == np.sign(mm) for _, gp, gm, mp, mm in rows)
    detail = "; ".join(f"d={d}: gb ({gp:+.2e}, {gm:+.2e}) micro ({mp:+.2f}, {mm:+.2f})" for d, gp, gm, mp, mm in rows)
    assert acceptance_report(11, "mollified pair velocity signs match particle attraction", ok, detail)


def test_c12_determinism(results, first_dir, tmp_path_factory, acceptance_report):
    for name in RUNS:
        results(name)
    second = tmp_path_factory.mktemp("acceptance_b")
    for fn in RUNS.values():
        fn(second)
    names = sorted(p.name for p in first_dir.iterdir())
    diffs = [n for n in names if (first_dir / n).read_bytes() != (second / n).read_bytes()]
    ok = names == sorted(p.name for p in second.iterdir()) and not diffs
    detail = f"{len(names)} files compared, {len(diffs)} differ" + (f": {', '.join(diffs)}" if diffs else "")
    assert acceptance_report(12, "repeated runs give byte-identical outputs", ok, detail)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
