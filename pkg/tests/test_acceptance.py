"""Acceptance gate: one test per criterion, each logging a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from porousconv import (BoundaryPartition, PhysicsParams, SolverConfig, build_grid, constant_vector,
                        edge_linear_temperature, equation_residuals, h1_seminorm, solve_coupled,
                        solve_linearized)
from porousconv.analysis import (check_max_principle, estimate_context, poincare_constant,
                                 smallness_report, trilinear_a, trilinear_a_skew)
from porousconv.cli import main
from porousconv.elliptic import assemble, dirichlet_problem, harmonic_lift, solve_linear
from porousconv.grid import EDGES, l2_norm, linf_norm
from porousconv.similarity import shoot_flux, shoot_temperature

GOLDEN_TEMP_M13 = -0.6776479926484171
GOLDEN_FLUX_M0 = 0.898718084936263
CFG = SolverConfig()


def _record(log, n, ok, detail, elapsed):
    line = f"AC{n:<2d} {'PASS' if ok else 'FAIL'}  {detail}  ({elapsed:.2f} s)"
    log.append(line)
    print(line)
    return ok


def _random_case(rng, ratio_key, lo, hi):
    """Random geometry and data with lambda chosen so that ``ratio_key`` lands in [lo, hi)."""
    nx, ny = (int(v) for v in rng.integers(12, 25, size=2))
    grid = build_grid(rng.uniform(0.6, 1.6), rng.uniform(0.6, 1.6), nx, ny)
    k = int(rng.integers(1, 3))
    start = int(rng.integers(0, 4))
    partition = BoundaryPartition({EDGES[(start + s) % 4] for s in range(k)})
    X, Y = grid.mesh()
    kx, ky = rng.uniform(-1, 1, 2)
    K = np.stack([kx + 0.3 * rng.uniform(-1, 1) * Y, ky + 0.3 * rng.uniform(-1, 1) * X])
    edges = {e: tuple(rng.uniform(0.5, 2.0, 2)) for e in EDGES}
    tw = edge_linear_temperature(grid, edges)
    theta = harmonic_lift(grid, tw)
    ctx = estimate_context(grid, partition)
    unit = smallness_report(PhysicsParams(K, 1.0, tw), theta, ctx, grid)[ratio_key]
    target = rng.uniform(lo, hi)
    params = PhysicsParams(K, unit / target, tw)
    return grid, partition, params, theta, ctx


@pytest.fixture(scope="module")
def contraction_runs():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    runs = []
    for _ in range(20):
        grid, bp, params, _, ctx = _random_case(rng, "r_contract", 0.05, 0.5)
        rep = solve_coupled(params, grid, bp, CFG, ctx=ctx)
        runs.append((grid, bp, params, ctx, rep))
    return runs, time.perf_counter() - t0


def test_ac1_poisson_convergence(acceptance_log):
    t0 = time.perf_counter()
    errs = []
    for n in (32, 64):
        g = build_grid(1, 1, n, n)
        X, Y = g.mesh()
        exact = np.sin(np.pi * X) * np.sin(np.pi * Y)
        prob = dirichlet_problem(g, np.zeros(g.shape), source=-2 * np.pi**2 * exact)
        u = solve_linear(assemble(prob, g))
        errs.append(l2_norm(g, u - exact))
    ratio = errs[0] / errs[1]
    dt = time.perf_counter() - t0
    ok = 3.5 <= ratio <= 4.5 and dt < 10
    assert _record(acceptance_log, 1, ok, f"L2 error ratio 32->64 = {ratio:.4f}", dt)


def test_ac2_poincare_constant(acceptance_log):
    t0 = time.perf_counter()
    g = build_grid(1, 1, 128, 128)
    cd = poincare_constant(g)
    cm = poincare_constant(g, BoundaryPartition({"left"}), "mixed")
    dt = time.perf_counter() - t0
    ed = abs(cd / (1 / math.sqrt(2 * math.pi**2)) - 1)
    em = abs(cm / (2 / math.pi) - 1)
    ok = ed <= 0.01 and em <= 0.02 and dt < 30
    assert _record(acceptance_log, 2, ok,
                   f"C_dirichlet={cd:.6f} (rel {ed:.1e}), C_mixed={cm:.6f} (rel {em:.1e})", dt)


def test_ac3_maximum_principle(contraction_runs, acceptance_log):
    runs, dt = contraction_runs
    t0 = time.perf_counter()
    violations = 0
    converged = 0
    worst = 0.0
    stalled = []
    for grid, bp, params, ctx, rep in runs:
        assert rep.smallness["r_contract"] < 0.5
        if not rep.converged:
            stalled.append(f"lam={params.lam:.3g} final residual {max(rep.residual_history[-1][1:]):.1e}")
            continue
        converged += 1
        chk = check_max_principle(rep.T, params.tw, CFG.linear_tol, grid)
        worst = max(worst, chk.lhs)
        violations += not chk.satisfied
    dt += time.perf_counter() - t0
    ok = violations == 0 and converged > 0 and dt < 120
    assert _record(acceptance_log, 3, ok,
                   f"{converged}/20 converged, {violations} violations, worst excursion {worst:.2e}"
                   + (f"; not converged: {', '.join(stalled)}" if stalled else ""), dt)


def test_ac4_apriori_bounds(contraction_runs, acceptance_log):
    runs, dt = contraction_runs
    applicable = failed = 0
    for grid, bp, params, ctx, rep in runs:
        for c in rep.checks:
            if c.name.startswith("apriori") and c.applicable:
                applicable += 1
                failed += not c.satisfied
    ok = failed == 0 and applicable > 0
    assert _record(acceptance_log, 4, ok, f"{applicable} applicable bound checks, {failed} failed", dt)


def test_ac5_contraction(acceptance_log):
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    details = []
    ok = True
    for _ in range(5):
        grid, bp, params, theta, ctx = _random_case(rng, "r_contract", 0.1, 0.8)
        r = smallness_report(params, theta, ctx, grid)["r_contract"]
        f, g = rng.standard_normal((2,) + grid.shape)
        _, _, ratios = solve_linearized(f, g, theta, params, grid, bp, CFG)
        steps = len(ratios) + 1
        budget = math.ceil(math.log(CFG.picard_tol) / math.log(r)) + 5
        worst = max(ratios)
        ok &= 0.1 <= r <= 0.8 and worst <= 1.1 * r and steps <= budget
        details.append(f"r={r:.2f}:max {worst:.1e},{steps}/{budget}")
    dt = time.perf_counter() - t0
    ok &= dt < 60
    assert _record(acceptance_log, 5, ok, "; ".join(details), dt)


def test_ac6_uniqueness(acceptance_log):
    rng = np.random.default_rng(303)
    t0 = time.perf_counter()
    ok = True
    worst = 0.0
    for _ in range(5):
        grid, bp, params, _, ctx = _random_case(rng, "r_unique", 0.05, 0.8)
        a = solve_coupled(params, grid, bp, CFG, ctx=ctx)
        M = params.boundary_max
        H0 = rng.uniform(-M, M, grid.shape)
        b = solve_coupled(params, grid, bp, CFG, H0=H0, ctx=ctx, checks=False)
        gap = max(h1_seminorm(grid, a.H - b.H), h1_seminorm(grid, a.psi - b.psi))
        worst = max(worst, gap)
        ok &= a.smallness["r_unique"] < 0.8 and a.converged and b.converged and gap <= 10 * CFG.picard_tol
    dt = time.perf_counter() - t0
    ok &= dt < 60
    assert _record(acceptance_log, 6, ok, f"largest H1 gap {worst:.2e} (limit {10 * CFG.picard_tol:.0e})", dt)


def test_ac7_trilinear(acceptance_log):
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    g = build_grid(1.0, 1.0, 24, 24)
    skew = bound = 0.0
    for _ in range(100):
        u, v, w = rng.uniform(-1, 1, (3,) + g.shape)
        skew = max(skew, abs(trilinear_a_skew(g, u, u, w))
                   / (linf_norm(g, u) * h1_seminorm(g, u) * h1_seminorm(g, w)))
        bound = max(bound, abs(trilinear_a(g, u, v, w))
                    / (linf_norm(g, u) * h1_seminorm(g, v) * h1_seminorm(g, w)))
    vals = []
    for n in (16, 32, 64):
        gg = build_grid(1, 1, n, n)
        X, Y = gg.mesh()
        u = np.sin(np.pi * X) * np.sin(np.pi * Y) * np.exp(X)
        vals.append(abs(trilinear_a(gg, u, u, X**3 + np.exp(Y) * X)))
    rates = [math.log2(a / b) for a, b in zip(vals, vals[1:])]
    dt = time.perf_counter() - t0
    ok = skew <= 1e-13 and bound <= 1.0 and min(rates) >= 1.0 and dt < 30
    assert _record(acceptance_log, 7, ok,
                   f"skew {skew:.1e}, bound ratio {bound:.3f}, decay rates {rates[0]:.2f},{rates[1]:.2f}", dt)


def test_ac8_similarity_closed_form(acceptance_log):
    t0 = time.perf_counter()
    prof = shoot_temperature(1.0)
    err = np.abs(prof.f - (1 - np.exp(-prof.t))).max()
    shot = prof.shot_parameter
    dt = time.perf_counter() - t0
    ok = prof.t[-1] == 20.0 and err <= 1e-6 and abs(shot + 1) <= 1e-6 and dt < 5
    assert _record(acceptance_log, 8, ok, f"sup error {err:.1e}, f''(0) = {shot:.10f}", dt)


def test_ac9_similarity_oracle(acceptance_log):
    t0 = time.perf_counter()
    a = shoot_temperature(1 / 3).shot_parameter
    b = shoot_flux(0.0).shot_parameter
    dt = time.perf_counter() - t0
    ea, eb = abs(a - GOLDEN_TEMP_M13), abs(b - GOLDEN_FLUX_M0)
    ok = ea <= 1e-8 and eb <= 1e-8 and dt < 10
    assert _record(acceptance_log, 9, ok, f"temp m=1/3 off by {ea:.1e}, flux m=0 off by {eb:.1e}", dt)


def test_ac10_equivalence(contraction_runs, acceptance_log):
    runs, dt = contraction_runs
    worst = 0.0
    n = 0
    for grid, bp, params, ctx, rep in runs:
        if rep.converged:
            n += 1
            r_psi, r_T = equation_residuals(rep.psi, rep.T, params, grid, CFG.advection_scheme)
            worst = max(worst, np.abs(r_psi).max(), np.abs(r_T).max())
    ok = n > 0 and worst <= CFG.picard_tol
    assert _record(acceptance_log, 10, ok, f"{n} solves, largest original residual {worst:.2e}", dt)


def test_ac11_reproducibility(tmp_path, acceptance_log):
    import yaml
    t0 = time.perf_counter()
    cfg = {
        "domain": {"lx": 1.0, "ly": 1.0, "nx": 32, "ny": 32},
        "boundary": {"gamma1": ["left", "bottom"],
                     "tw": {"kind": "edge-linear", "edges": {"left": [1.0, 1.2], "top": [1.2, 1.1]},
                            "default": 1.0}},
        "physics": {"K": [0.2, 1.0], "lambda": 0.5},
    }
    blobs = []
    for run in ("a", "b"):
        cfg["output"] = {"directory": str(tmp_path / run), "formats": ["csv"]}
        path = tmp_path / f"{run}.yaml"
        path.write_text(yaml.safe_dump(cfg))
        assert main(["solve2d", "--config", str(path)]) == 0
        blobs.append((tmp_path / run / "fields.csv").read_bytes())
    dt = time.perf_counter() - t0
    ok = blobs[0] == blobs[1] and dt < 10
    assert _record(acceptance_log, 11, ok, f"fields.csv {len(blobs[0])} bytes, identical={blobs[0] == blobs[1]}", dt)
