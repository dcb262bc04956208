"""Command-line front end: ``solve2d``, ``similarity``, ``verify`` and ``sweep``."""

import argparse
import csv
import itertools
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import numpy as np

from . import analysis, outputs, similarity
from .config import ConfigError, load_config, load_yaml, parse_config
from .coupled import PhysicsParams, equation_residuals, solve_coupled, solve_linearized
from .exceptions import InvalidParameterError, NonConvergenceError, NoSolutionError
from .grid import h1_seminorm, l2_norm, linf_norm

EXIT_OK = 0
EXIT_CHECK_FAILED = 2
EXIT_NOT_CONVERGED = 3
EXIT_USAGE = 64
WORKERS_ENV = "POROUSCONV_WORKERS"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _report_payload(report):
    return {
        "converged": report.converged,
        "iterations": report.iterations,
        "lambda": report.lam,
        "norms": report.norms,
        "smallness": report.smallness,
        "checks": [c.to_dict() for c in report.checks],
    }


def _solve_exit(report):
    if not report.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK if report.checks_ok else EXIT_CHECK_FAILED


def run_solve2d(cfg):
    """Solve the configured problem and write every requested output; returns the exit code."""
    report = solve_coupled(cfg.params, cfg.grid, cfg.partition, cfg.solver)
    os.makedirs(cfg.output_dir, exist_ok=True)
    if "csv" in cfg.formats:
        outputs.write_fields_csv(os.path.join(cfg.output_dir, "fields.csv"), cfg.grid, report)
        outputs.write_convergence_csv(os.path.join(cfg.output_dir, "convergence.csv"),
                                      report.residual_history)
    if "vtk" in cfg.formats:
        outputs.write_vtk(os.path.join(cfg.output_dir, "fields.vtk"), cfg.grid, report)
    code = _solve_exit(report)
    if cfg.emit_report:
        payload = _report_payload(report)
        payload["exit_code"] = code
        outputs.write_json(os.path.join(cfg.output_dir, "report.json"), payload)
    return code


def _random_interior(rng, grid, mask):
    u = rng.uniform(-1.0, 1.0, grid.shape)
    u[mask] = 0.0
    return u


def run_verification(cfg):
    """Full invariant suite on one configuration; returns ``(checks, payload)``."""
    grid, bp, params, scfg = cfg.grid, cfg.partition, cfg.params, cfg.solver
    rng = np.random.default_rng(cfg.seed)
    CR = analysis.CheckResult
    ctx = analysis.estimate_context(grid, bp)
    checks = [CR.compare("poincare_dirichlet_le_mixed", ctx.C_dirichlet, ctx.C_mixed)]

    dmask = grid.boundary_mask
    gmask = bp.dirichlet_mask(grid)
    skew_worst = bound_worst = 0.0
    p_dir = p_mix = 0.0
    for _ in range(cfg.samples):
        u = _random_interior(rng, grid, dmask)
        v = rng.uniform(-1.0, 1.0, grid.shape)
        w = rng.uniform(-1.0, 1.0, grid.shape)
        scale = linf_norm(grid, u) * h1_seminorm(grid, v) * h1_seminorm(grid, w)
        skew_worst = max(skew_worst, abs(analysis.trilinear_a_skew(grid, u, u, w))
                         / (linf_norm(grid, u) * h1_seminorm(grid, u) * h1_seminorm(grid, w)))
        bound_worst = max(bound_worst, abs(analysis.trilinear_a(grid, u, v, w)) / scale)
        p_dir = max(p_dir, l2_norm(grid, u) / h1_seminorm(grid, u))
        um = _random_interior(rng, grid, gmask)
        p_mix = max(p_mix, l2_norm(grid, um) / h1_seminorm(grid, um))
    checks += [
        CR.compare("trilinear_skew_vanishes", skew_worst, 1e-13),
        CR.compare("trilinear_bound", bound_worst, 1.0, 1e-12),
        CR.compare("poincare_inequality_dirichlet", p_dir, ctx.C_dirichlet, 0.02),
        CR.compare("poincare_inequality_mixed", p_mix, ctx.C_mixed, 0.02),
    ]

    report = solve_coupled(params, grid, bp, scfg, ctx=ctx)
    checks.append(CR.compare("solve_converged", 0.0 if report.converged else 1.0, 0.0))
    checks += report.checks
    if report.converged:
        r_psi, r_T = equation_residuals(report.psi, report.T, params, grid, scfg.advection_scheme)
        checks.append(CR.compare("original_system_residual",
                                 max(np.abs(r_psi).max(), np.abs(r_T).max()), scfg.picard_tol))
    small = report.smallness
    # the smallness hypotheses are strict inequalities
    checks.append(CR("smallness_unique", small["r_unique"], 1.0, 0.0, small["unique_ok"]))
    checks.append(CR("smallness_contract", small["r_contract"], 1.0, 0.0, small["contract_ok"]))

    ratios = []
    if small["r_contract"] < 1 and small["r_contract"] > 0:
        f = rng.standard_normal(grid.shape)
        g = rng.standard_normal(grid.shape)
        try:
            _, _, ratios = solve_linearized(f, g, report.theta, params, grid, bp, scfg)
            worst = max(ratios) if ratios else 0.0
            checks.append(CR.compare("linearized_contraction", worst, small["r_contract"], 0.1))
        except NonConvergenceError as exc:
            ratios = exc.history
            checks.append(CR.compare("linearized_contraction", math.inf, small["r_contract"], 0.1))
    else:
        checks.append(CR.inapplicable("linearized_contraction"))

    payload = {
        "all_ok": all(c.ok for c in checks),
        "converged": report.converged,
        "iterations": report.iterations,
        "norms": report.norms,
        "smallness": small,
        "linearized_ratios": ratios,
        "checks": [c.to_dict() for c in checks],
    }
    return checks, payload


def cmd_solve2d(args):
    cfg = load_config(args.config)
    return run_solve2d(cfg)


def cmd_verify(args):
    cfg = load_config(args.config)
    checks, payload = run_verification(cfg)
    os.makedirs(cfg.output_dir, exist_ok=True)
    outputs.write_json(os.path.join(cfg.output_dir, "verify.json"), payload)
    for c in checks:
        status = "n/a " if not c.applicable else ("PASS" if c.satisfied else "FAIL")
        print(f"{status} {c.name}: {c.lhs:.6g} <= {c.rhs:.6g} (tol {c.tolerance:g})")
    return EXIT_OK if payload["all_ok"] else EXIT_CHECK_FAILED


SWEEP_AXES = ("lambda", "k_scale", "tw_scale")
SWEEP_COLUMNS = SWEEP_AXES + ("converged", "iters", "r_unique", "r_contract",
                              "max_principle_ok", "apriori_ok", "error")


def _sweep_row(task):
    cfg, lam, ks, ts = task
    row = {"lambda": lam, "k_scale": ks, "tw_scale": ts}
    try:
        params = PhysicsParams(cfg.params.K * ks, lam, cfg.params.tw * ts)
        rep = solve_coupled(params, cfg.grid, cfg.partition, cfg.solver)
        named = {c.name: c for c in rep.checks}
        row.update(
            converged=rep.converged,
            iters=rep.iterations,
            r_unique=rep.smallness["r_unique"],
            r_contract=rep.smallness["r_contract"],
            max_principle_ok=named["max_principle"].ok,
            apriori_ok=all(c.ok for c in rep.checks if c.name.startswith("apriori")),
            error="",
        )
    except Exception as exc:  # a failed row must not abort the sweep
        row.update(converged=False, iters=0, r_unique=math.nan, r_contract=math.nan,
                   max_principle_ok=False, apriori_ok=False, error=f"{type(exc).__name__}: {exc}")
    return row


def load_sweep(path):
    data, lines = load_yaml(path)
    src = str(path)
    base_dir = os.path.dirname(os.path.abspath(path))
    if not isinstance(data, dict):
        raise ConfigError(f"{src}:1: sweep config must be a mapping")
    for k in data:
        if k not in ("base", "sweep", "output"):
            raise ConfigError(f"{src}:{lines(k)}: unknown key {k!r} in sweep config")
    if "base" not in data:
        raise ConfigError(f"{src}:1: missing required key 'base'")
    base = data["base"]
    if isinstance(base, str):
        cfg = load_config(base if os.path.isabs(base) else os.path.join(base_dir, base))
    else:
        sub = lambda *p: lines("base", *p)  # noqa: E731
        cfg = parse_config(base, sub, src=src, base_dir=base_dir)
    axes = data.get("sweep") or {}
    if not isinstance(axes, dict):
        raise ConfigError(f"{src}:{lines('sweep')}: sweep must map axis names to value lists")
    values = {}
    for k, v in axes.items():
        if k not in SWEEP_AXES:
            raise ConfigError(f"{src}:{lines('sweep', k)}: unknown sweep axis {k!r}; expected {SWEEP_AXES}")
        v = v if isinstance(v, list) else [v]
        if not v or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            raise ConfigError(f"{src}:{lines('sweep', k)}: sweep.{k} must be a nonempty list of numbers")
        values[k] = sorted(float(x) for x in v)
    values.setdefault("lambda", [cfg.params.lam])
    values.setdefault("k_scale", [1.0])
    values.setdefault("tw_scale", [1.0])
    out = data.get("output") or {}
    if not isinstance(out, dict) or set(out) - {"directory"}:
        raise ConfigError(f"{src}:{lines('output')}: sweep output only accepts 'directory'")
    outdir = out.get("directory", os.path.join(base_dir, "sweep_out"))
    if not os.path.isabs(outdir):
        outdir = os.path.join(base_dir, outdir)
    return cfg, values, outdir


def run_sweep(cfg, values, outdir, workers=None):
    tasks = [(cfg, lam, ks, ts) for lam, ks, ts in
             itertools.product(values["lambda"], values["k_scale"], values["tw_scale"])]
    workers = max(1, workers or int(os.environ.get(WORKERS_ENV, 0)) or os.cpu_count() or 1)
    if workers == 1 or len(tasks) == 1:
        rows = [_sweep_row(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            rows = list(pool.map(_sweep_row, tasks))
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "sweep.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in r.items()})
    return rows


def cmd_sweep(args):
    cfg, values, outdir = load_sweep(args.config)
    run_sweep(cfg, values, outdir, args.workers)
    return EXIT_OK


CASE_NAMES = {"temp": similarity.TEMPERATURE, "flux": similarity.FLUX, "general": similarity.GENERAL}


def _fraction(text):
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def cmd_similarity(args):
    case = CASE_NAMES[args.case]
    if case == similarity.GENERAL and (args.a is None or args.b is None):
        return _usage("--case general needs --a and --b")
    if case != similarity.GENERAL and (args.a is not None or args.b is not None):
        return _usage("--a/--b only apply to --case general")
    if args.gamma is not None and args.gamma_from_omega is not None:
        return _usage("give either --gamma or --gamma-from-omega, not both")
    gamma = args.gamma if args.gamma is not None else 0.0
    if args.gamma_from_omega is not None:
        if case == similarity.GENERAL:
            return _usage("--gamma-from-omega needs --case temp or flux")
        try:
            consts = _load_constants(args.constants, args.gamma_from_omega)
            gamma = similarity.gamma_value(case, consts, args.m)
        except (InvalidParameterError, ConfigError) as exc:
            return _usage(str(exc))
    try:
        problem = similarity.SimilarityProblem(case, args.m, gamma, args.a, args.b, args.tmax, args.tol)
    except InvalidParameterError as exc:
        return _usage(str(exc))
    try:
        prof = similarity.shoot(problem, tuple(args.bracket))
    except NoSolutionError as exc:
        print(f"no solution: {exc}", file=sys.stderr)
        for lo, hi in exc.brackets:
            print(f"bracket {lo!r} {hi!r}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    prof.to_csv(args.out)
    print(",".join([args.case] + [repr(float(v)) for v in (args.m, gamma, prof.shot_parameter, prof.residual)]))
    return EXIT_OK


def _load_constants(path, omega):
    kw = {}
    if path is not None:
        data, lines = load_yaml(path)
        fields = set(similarity.PhysicalConstants.__dataclass_fields__)
        if not isinstance(data, dict):
            raise ConfigError(f"{path}:1: constants file must be a mapping")
        for k, v in data.items():
            if k not in fields or k == "omega":
                raise ConfigError(f"{path}:{lines(k)}: unknown constant {k!r}")
            kw[k] = float(v)
    return similarity.PhysicalConstants(omega=omega, **kw)


def _usage(msg):
    print(f"porousconv: error: {msg}", file=sys.stderr)
    return EXIT_USAGE


def build_parser():
    p = _Parser(prog="porousconv", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve2d", help="solve the coupled system on a rectangle")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_solve2d)

    s = sub.add_parser("verify", help="run every structural check on a configuration")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="solve a parameter grid concurrently")
    s.add_argument("--config", required=True)
    s.add_argument("--workers", type=int, default=None,
                   help=f"worker processes (default: ${WORKERS_ENV} or CPU count)")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("similarity", help="shoot a boundary-layer similarity profile")
    s.add_argument("--case", choices=sorted(CASE_NAMES), required=True)
    s.add_argument("--m", type=_fraction, default=0.0)
    s.add_argument("--gamma", type=_fraction, default=None)
    s.add_argument("--gamma-from-omega", type=_fraction, default=None, metavar="OMEGA")
    s.add_argument("--constants", default=None, help="YAML file of physical constants (default all 1)")
    s.add_argument("--a", type=_fraction, default=None)
    s.add_argument("--b", type=_fraction, default=None)
    s.add_argument("--tmax", type=_fraction, default=20.0)
    s.add_argument("--tol", type=_fraction, default=1e-8)
    s.add_argument("--bracket", type=_fraction, nargs=2, default=[-10.0, 10.0], metavar=("LO", "HI"))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_similarity)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
