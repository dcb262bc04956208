"""Numerical checks of the structural properties of the convection system.

Covers the trilinear form ``a(u, v, w) = (u grad v, perp(grad w))``, discrete
Poincare constants, the maximum principle, the a priori gradient bounds and
the dimensionless smallness ratios that govern uniqueness and contraction.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .elliptic import assemble, factorize, mixed_problem
from .exceptions import ConfigurationError, NonConvergenceError
from .grid import ALL_DIRICHLET, dot, gradient, integrate, l2_norm, linf_norm, perp


@dataclass(frozen=True)
class EstimateContext:
    C_dirichlet: float
    C_mixed: float
    mes_omega: float

    @property
    def C(self):
        return max(self.C_dirichlet, self.C_mixed)


@dataclass(frozen=True)
class CheckResult:
    """``satisfied`` iff ``lhs <= rhs * (1 + tolerance)``.

    Inapplicable checks (their hypothesis fails) carry ``applicable=False``
    and count as ``ok``.
    """

    name: str
    lhs: float
    rhs: float
    tolerance: float
    satisfied: bool
    applicable: bool = True

    @classmethod
    def compare(cls, name, lhs, rhs, tolerance=0.0):
        return cls(name, float(lhs), float(rhs), tolerance, bool(lhs <= rhs * (1 + tolerance)))

    @classmethod
    def inapplicable(cls, name):
        return cls(name, float("nan"), float("nan"), 0.0, False, applicable=False)

    @property
    def ok(self):
        return self.satisfied or not self.applicable

    def to_dict(self):
        return asdict(self)


def trilinear_a(grid, u, v, w):
    grid.check(u, v, w)
    return integrate(grid, u * dot(gradient(grid, v), perp(gradient(grid, w))))


def trilinear_a_skew(grid, u, v, w):
    """Antisymmetrized form ``(a(u, v, w) - a(v, u, w)) / 2``; vanishes exactly when u is v."""
    return 0.5 * (trilinear_a(grid, u, v, w) - trilinear_a(grid, v, u, w))


def poincare_constant(grid, partition=ALL_DIRICHLET, mode="dirichlet", tol=1e-8, max_iter=2000):
    """``1 / sqrt(lambda_1)`` for the discrete Laplacian by inverse power iteration.

    ``mode="dirichlet"`` clamps the whole boundary; ``"mixed"`` clamps gamma1
    only and mirrors the rest.
    """
    if mode == "dirichlet":
        partition = ALL_DIRICHLET
    elif mode != "mixed":
        raise ConfigurationError(f"unknown Poincare mode {mode!r}")
    system = assemble(mixed_problem(grid, partition, np.zeros(grid.shape)), grid)
    solve = factorize(system)
    x = np.ones(system.matrix.shape[0])
    x /= np.linalg.norm(x)
    lam = np.inf
    for _ in range(max_iter):
        y = solve(x)
        ynorm = np.linalg.norm(y)
        lam_new = 1.0 / ynorm
        x = y / ynorm
        if abs(lam_new - lam) <= tol * lam_new:
            return 1.0 / np.sqrt(lam_new)
        lam = lam_new
    raise NonConvergenceError(f"inverse power iteration stagnated after {max_iter} steps",
                              residual=lam)


def estimate_context(grid, partition):
    return EstimateContext(
        C_dirichlet=poincare_constant(grid, partition, "dirichlet"),
        C_mixed=poincare_constant(grid, partition, "mixed"),
        mes_omega=grid.area,
    )


def check_max_principle(T, tw, linear_tol, grid):
    """Largest excursion of T outside ``[min tw, max tw]`` against the absolute slack.

    ``lhs`` is ``max(max T - max tw, min tw - min T)``; ``rhs`` is
    ``10 * linear_tol * (max tw - min tw + 1)``.
    """
    b = np.asarray(tw)[grid.boundary_mask]
    lo, hi = b.min(), b.max()
    slack = 10 * linear_tol * (hi - lo + 1)
    excursion = max(np.max(T) - hi, lo - np.min(T))
    return CheckResult("max_principle", excursion, slack, 0.0, bool(excursion <= slack))


APRIORI_NAMES = ("apriori_grad_psi", "apriori_grad_H", "apriori_grad_psi_area", "apriori_grad_H_area")


def check_apriori(report, ctx, tolerance=0.02):
    """Gradient bounds valid when ``|grad Theta|_inf < lam / (2 C^2 |K|_inf)``.

    Emits inapplicable markers when the solve did not converge, K vanishes
    or the hypothesis fails.
    """
    n = report.norms
    C, K, lam = ctx.C, n["K_linf"], report.lam
    if not report.converged or K == 0.0 or not n["grad_theta_linf"] < lam / (2 * C**2 * K):
        return [CheckResult.inapplicable(name) for name in APRIORI_NAMES]
    area = np.sqrt(ctx.mes_omega)
    return [
        CheckResult.compare(APRIORI_NAMES[0], n["grad_psi_l2"], 2 * C * K * n["grad_theta_l2"], tolerance),
        CheckResult.compare(APRIORI_NAMES[1], n["grad_H_l2"], n["grad_theta_l2"], tolerance),
        CheckResult.compare(APRIORI_NAMES[2], n["grad_psi_l2"], lam / C * area, tolerance),
        CheckResult.compare(APRIORI_NAMES[3], n["grad_H_l2"], lam / (2 * C**2 * K) * area, tolerance),
    ]


def smallness_ratios(M, C, K_linf, grad_theta_linf, lam):
    r_unique = M * C * K_linf / lam
    r_contract = C**2 * K_linf * grad_theta_linf / lam
    return {
        "r_unique": r_unique,
        "r_contract": r_contract,
        "r_apriori": 2 * r_contract,
        "unique_ok": bool(r_unique < 1),
        "contract_ok": bool(r_contract < 1),
        "apriori_ok": bool(2 * r_contract < 1),
    }


def smallness_report(params, theta, ctx, grid):
    """Dimensionless ratios that must stay below 1, plus ``|K . grad Theta|_2``."""
    grad_theta = gradient(grid, theta)
    out = smallness_ratios(params.boundary_max, ctx.C, linf_norm(grid, params.K),
                           linf_norm(grid, grad_theta), params.lam)
    out["K_dot_grad_theta_l2"] = l2_norm(grid, dot(params.K, grad_theta))
    out["C"] = ctx.C
    out["C_dirichlet"] = ctx.C_dirichlet
    out["C_mixed"] = ctx.C_mixed
    return out
