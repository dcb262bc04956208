"""Stream-function / temperature system for free convection in a porous box.

The unknowns are the stream function ``psi`` and the temperature ``T``:

    Lap(psi) = K . grad(T)
    lam * Lap(T) = grad(T) . perp(grad(psi))

with ``psi = 0`` on gamma1, ``d psi / dn = 0`` on gamma2 and ``T = tw`` on the
whole boundary. The solver works on the shifted unknown ``H = T - Theta``
where ``Theta`` is the harmonic lift of ``tw``, and iterates a Picard sweep
(psi-stage then H-stage) starting from ``H = 0``.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import analysis
from .elliptic import (CENTRAL, SCHEMES, UPWIND, advection, assemble, dirichlet_problem,
                       harmonic_lift, mixed_problem, solve_linear)
from .exceptions import InvalidParameterError, NonConvergenceError
from .grid import dot, gradient, h1_seminorm, laplacian, linf_norm, l2_norm, perp


@dataclass(frozen=True)
class PhysicsParams:
    """``K`` has shape ``(2, nx+1, ny+1)``; only the boundary entries of ``tw`` are used."""

    K: np.ndarray
    lam: float
    tw: np.ndarray

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidParameterError(f"diffusivity lambda must be positive, got {self.lam}")
        K = np.asarray(self.K, dtype=float)
        tw = np.asarray(self.tw, dtype=float)
        if K.ndim != 3 or K.shape[0] != 2 or K.shape[1:] != tw.shape:
            raise InvalidParameterError(f"K of shape {K.shape} does not match tw of shape {tw.shape}")
        if not (np.all(np.isfinite(K)) and np.all(np.isfinite(tw))):
            raise InvalidParameterError("K and tw must be finite")
        if np.any(tw < 0):
            raise InvalidParameterError("boundary temperature must be nonnegative")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "tw", tw)

    @property
    def boundary_max(self):
        """M, the supremum of the wall temperature."""
        b = self.tw.copy()
        b[1:-1, 1:-1] = -np.inf
        return float(b.max())


def constant_vector(grid, kx, ky):
    return np.stack([np.full(grid.shape, float(kx)), np.full(grid.shape, float(ky))])


def edge_linear_temperature(grid, edges, default=0.0):
    """Wall temperature that varies linearly along each edge.

    ``edges`` maps edge names to ``(start, end)`` values, ``start`` at the
    lower coordinate end, or to a single constant. Missing edges take
    ``default``; a corner takes the mean of its two edges.
    """
    tw = np.zeros(grid.shape)
    count = np.zeros(grid.shape)
    sx = grid.x / grid.lx
    sy = grid.y / grid.ly
    for name in ("bottom", "right", "top", "left"):
        v = edges.get(name, default)
        a, b = (v, v) if np.isscalar(v) else v
        if name in ("bottom", "top"):
            j = 0 if name == "bottom" else -1
            tw[:, j] += a + (b - a) * sx
            count[:, j] += 1
        else:
            i = 0 if name == "left" else -1
            tw[i, :] += a + (b - a) * sy
            count[i, :] += 1
    return np.divide(tw, count, out=np.zeros(grid.shape), where=count > 0)


@dataclass(frozen=True)
class SolverConfig:
    picard_tol: float = 1e-10
    picard_max_iter: int = 200
    linear_tol: float = 1e-12
    linear_max_iter: int = 10_000
    damping: float = 1.0
    advection_scheme: str = UPWIND

    def __post_init__(self):
        if not (self.picard_tol > 0 and self.linear_tol > 0):
            raise InvalidParameterError("tolerances must be positive")
        if not (self.picard_max_iter >= 1 and self.linear_max_iter >= 1):
            raise InvalidParameterError("iteration budgets must be at least 1")
        if not 0 < self.damping <= 1:
            raise InvalidParameterError(f"damping must lie in (0, 1], got {self.damping}")
        if self.advection_scheme not in SCHEMES:
            raise InvalidParameterError(f"advection_scheme must be one of {SCHEMES}")


@dataclass(frozen=True)
class SolveReport:
    psi: np.ndarray
    H: np.ndarray
    theta: np.ndarray
    T: np.ndarray
    iterations: int
    residual_history: list
    converged: bool
    lam: float
    norms: dict
    smallness: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    @property
    def checks_ok(self):
        return all(c.ok for c in self.checks)


def _solve_stage(problem, grid, cfg, stage):
    try:
        return solve_linear(assemble(problem, grid), cfg.linear_tol, cfg.linear_max_iter)
    except NonConvergenceError as exc:
        raise NonConvergenceError(f"{stage}-stage: {exc}", residual=exc.residual, stage=stage) from exc


def solve_psi(grid, partition, source, cfg):
    """Lap(psi) = source with psi = 0 on gamma1 and zero flux on gamma2."""
    return _solve_stage(mixed_problem(grid, partition, source), grid, cfg, "psi")


def picard_step(H_prev, theta, params, grid, partition, cfg=SolverConfig()):
    """One sweep: psi from the frozen H, then H from the frozen psi.

    Returns ``(psi, H_next)`` with ``H_next`` damped towards the raw update.
    """
    K = params.K
    psi = solve_psi(grid, partition, dot(K, gradient(grid, H_prev + theta)), cfg)
    v = perp(gradient(grid, psi))
    # the lift is only discrete-harmonic up to solver error; folding its
    # defect into the source makes H + theta solve the discrete T equation
    src = np.nan_to_num(advection(grid, v, theta, cfg.advection_scheme)
                        - params.lam * laplacian(grid, theta))
    problem = dirichlet_problem(grid, 0.0, source=src, diffusion=params.lam, velocity=v,
                                scheme=cfg.advection_scheme)
    H_raw = _solve_stage(problem, grid, cfg, "H")
    if cfg.damping == 1.0:
        return psi, H_raw
    return psi, (1 - cfg.damping) * H_prev + cfg.damping * H_raw


def equation_residuals(psi, T, params, grid, scheme=UPWIND):
    """Nodewise residuals of the discrete stream-function and temperature equations.

    Interior nodes only; boundary entries are zero. The advection term uses
    the same discretization as the solver so converged fields give residuals
    at the Picard tolerance.
    """
    r_psi = laplacian(grid, psi) - dot(params.K, gradient(grid, T))
    v = perp(gradient(grid, psi))
    r_T = params.lam * laplacian(grid, T) - advection(grid, v, T, scheme)
    return np.nan_to_num(r_psi), np.nan_to_num(r_T)


def _max_residuals(psi, H, theta, params, grid, scheme):
    r_psi, r_T = equation_residuals(psi, H + theta, params, grid, scheme)
    return float(np.abs(r_psi).max()), float(np.abs(r_T).max())


def solve_coupled(params, grid, partition, cfg=SolverConfig(), H0=None, ctx=None, checks=True):
    """Picard iteration for the coupled system.

    Never raises on non-convergence: inspect ``report.converged`` and
    ``report.residual_history``. ``ctx`` (an ``analysis.EstimateContext``)
    is computed when checks are requested and none is given.
    """
    grid.check(params.tw)
    theta = harmonic_lift(grid, params.tw, cfg.linear_tol, cfg.linear_max_iter)
    H = np.zeros(grid.shape) if H0 is None else np.where(grid.boundary_mask, 0.0, H0)
    psi = np.zeros(grid.shape)
    history = []
    converged = False
    it = 0
    for it in range(1, cfg.picard_max_iter + 1):
        try:
            psi, H = picard_step(H, theta, params, grid, partition, cfg)
        except NonConvergenceError:
            break
        if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(H))):
            break
        rp, rh = _max_residuals(psi, H, theta, params, grid, cfg.advection_scheme)
        history.append((it, rp, rh))
        if max(rp, rh) <= cfg.picard_tol:
            converged = True
            break

    T = H + theta
    grad_theta = gradient(grid, theta)
    norms = {
        "grad_psi_l2": h1_seminorm(grid, psi),
        "grad_H_l2": h1_seminorm(grid, H),
        "grad_theta_l2": l2_norm(grid, grad_theta),
        "grad_theta_linf": linf_norm(grid, grad_theta),
        "K_linf": linf_norm(grid, params.K),
        "M": params.boundary_max,
    }
    for a in (psi, H, theta, T):
        a.flags.writeable = False
    report = SolveReport(psi=psi, H=H, theta=theta, T=T, iterations=it, residual_history=history,
                         converged=converged, lam=params.lam, norms=norms)
    if not checks:
        return report
    if ctx is None:
        ctx = analysis.estimate_context(grid, partition)
    small = analysis.smallness_report(params, theta, ctx, grid)
    results = [analysis.check_max_principle(T, params.tw, cfg.linear_tol, grid)]
    results += analysis.check_apriori(report, ctx)
    return replace(report, smallness=small, checks=results)


def solve_linearized(f, g, theta, params, grid, partition, cfg=SolverConfig()):
    """Fixed-point iteration of the linearized map G -> Q(S(G)).

    S solves ``-Lap(phi) + K . grad(G) = f`` (psi boundary conditions) and Q
    solves ``-lam Lap(G1) + grad(Theta) . perp(grad(phi)) = g`` with
    ``G1 = 0`` on the boundary. Returns ``(phi, G, ratios)`` where
    ``ratios[k]`` is the ratio of successive increment seminorms. Raises
    ``NonConvergenceError`` carrying the ratios when the budget runs out.
    """
    grad_theta = gradient(grid, theta)

    def S(G):
        return solve_psi(grid, partition, dot(params.K, gradient(grid, G)) - f, cfg)

    def Q(phi):
        src = dot(grad_theta, perp(gradient(grid, phi))) - g
        problem = dirichlet_problem(grid, 0.0, source=src, diffusion=params.lam)
        return _solve_stage(problem, grid, cfg, "G")

    G = np.zeros(grid.shape)
    phi = S(G)
    G_new = Q(phi)
    first = h1_seminorm(grid, G_new)
    ratios = []
    prev_inc = first
    G = G_new
    if first == 0.0:
        return phi, G, ratios
    for _ in range(cfg.picard_max_iter):
        phi = S(G)
        G_new = Q(phi)
        inc = h1_seminorm(grid, G_new - G)
        ratios.append(inc / prev_inc)
        G = G_new
        if inc <= cfg.picard_tol * first:
            return phi, G, ratios
        prev_inc = inc
    raise NonConvergenceError(
        f"linearized iteration did not converge in {cfg.picard_max_iter} sweeps",
        residual=prev_inc / first, history=ratios)


__all__ = [
    "CENTRAL", "UPWIND", "PhysicsParams", "SolveReport", "SolverConfig", "constant_vector",
    "edge_linear_temperature", "equation_residuals", "picard_step", "solve_coupled",
    "solve_linearized", "solve_psi",
]
