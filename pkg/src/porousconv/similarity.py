"""Boundary-layer similarity profiles by shooting.

All three cases integrate ``f''' + a f f'' - b f'^2 = 0`` on ``[0, t_max]``:

* prescribed wall temperature: ``a = (m + 1) / 2``, ``b = m``, with
  ``f(0) = -gamma``, ``f'(0) = 1``; the shot parameter is ``f''(0)``;
* prescribed wall heat flux: ``a = m + 2``, ``b = 2m + 1``, with
  ``f(0) = -gamma``, ``f''(0) = -1``; the shot parameter is ``f'(0)``;
* generalized ``(a, b)`` (Blasius is ``(1, 0)``) with the temperature-case
  wall conditions.

The far-field condition ``f'(t_max) = 0`` closes the problem. The reduced
temperature is ``theta = f'`` in both physical cases.
"""

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.interpolate import CubicSpline

from .exceptions import InvalidParameterError, NoSolutionError

TEMPERATURE = "temperature"
FLUX = "flux"
GENERAL = "general"
CASES = (TEMPERATURE, FLUX, GENERAL)
DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class SimilarityProblem:
    case: str
    m: float = 0.0
    gamma: float = 0.0
    a: float | None = None
    b: float | None = None
    t_max: float = 20.0
    far_field_tol: float = 1e-8
    step: float = 1e-3

    def __post_init__(self):
        if self.case not in CASES:
            raise InvalidParameterError(f"case must be one of {CASES}, got {self.case!r}")
        if self.case == GENERAL and (self.a is None or self.b is None):
            raise InvalidParameterError("the generalized case needs both coefficients a and b")
        if not (self.t_max > 0 and self.far_field_tol > 0 and 0 < self.step <= 1e-3 * self.t_max):
            raise InvalidParameterError("need t_max > 0, far_field_tol > 0 and 0 < step <= 1e-3 t_max")

    @property
    def coefficients(self):
        if self.case == TEMPERATURE:
            return (self.m + 1) / 2, self.m
        if self.case == FLUX:
            return self.m + 2, 2 * self.m + 1
        return self.a, self.b

    def initial_state(self, shot):
        """Wall state ``(f, f', f'')`` for a given value of the free parameter."""
        f0 = 0.0 - self.gamma
        if self.case == FLUX:
            return (f0, shot, -1.0)
        return (f0, 1.0, shot)


@dataclass
class SimilarityProfile:
    t: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    fpp: np.ndarray
    shot_parameter: float = float("nan")
    residual: float = float("nan")
    converged: bool = False
    diverged: bool = False
    bracket: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def theta(self):
        return self.fp

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,f,fp,fpp\n")
            for row in zip(self.t, self.f, self.fp, self.fpp):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def ode_rhs(problem, state):
    f, fp, fpp = state
    a, b = problem.coefficients
    return fp, fpp, -a * f * fpp + b * fp * fp


@numba.njit(cache=True)
def _rk4(a, b, f0, fp0, fpp0, h, n, limit, store, events):
    # returns (k_last, f', f'', event); fills ``store`` rows 0..k_last when non-empty.
    # event: 0 none, -1 f' fell below 0, +1 f'' rose above 0 while f' > 0, 2 blow-up
    f, fp, fpp = f0, fp0, fpp0
    keep = store.shape[0] > 0
    if keep:
        store[0, 0] = f
        store[0, 1] = fp
        store[0, 2] = fpp
    for k in range(n):
        k1f = fp
        k1p = fpp
        k1q = -a * f * fpp + b * fp * fp
        f2 = f + 0.5 * h * k1f
        p2 = fp + 0.5 * h * k1p
        q2 = fpp + 0.5 * h * k1q
        k2f = p2
        k2p = q2
        k2q = -a * f2 * q2 + b * p2 * p2
        f3 = f + 0.5 * h * k2f
        p3 = fp + 0.5 * h * k2p
        q3 = fpp + 0.5 * h * k2q
        k3f = p3
        k3p = q3
        k3q = -a * f3 * q3 + b * p3 * p3
        f4 = f + h * k3f
        p4 = fp + h * k3p
        q4 = fpp + h * k3q
        k4f = p4
        k4p = q4
        k4q = -a * f4 * q4 + b * p4 * p4
        f = f + h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f)
        fp = fp + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        fpp = fpp + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        if keep:
            store[k + 1, 0] = f
            store[k + 1, 1] = fp
            store[k + 1, 2] = fpp
        if not (abs(fp) <= limit and abs(fpp) <= limit):
            return k + 1, fp, fpp, 2
        if events:
            if fp < 0.0:
                return k + 1, fp, fpp, -1
            if fpp > 0.0:
                return k + 1, fp, fpp, 1
    return n, fp, fpp, 0


_EMPTY = np.zeros((0, 3))


def _steps(problem):
    n = int(math.ceil(problem.t_max / problem.step - 1e-9))
    return n, problem.t_max / n


def integrate_profile(problem, init):
    """Classical RK4 from ``init = (f, f', f'')`` at ``t = 0``.

    Stops early, with ``diverged=True``, once ``|f'|`` or ``|f''|`` exceeds
    ``1e6`` or turns non-finite.
    """
    a, b = problem.coefficients
    n, h = _steps(problem)
    store = np.empty((n + 1, 3))
    last, _, _, _ = _rk4(float(a), float(b), *map(float, init), h, n, DIVERGENCE_LIMIT, store, False)
    diverged = last < n or not np.all(np.isfinite(store[last]))
    t = np.arange(last + 1) * h
    s = store[: last + 1]
    return SimilarityProfile(t=t, f=s[:, 0].copy(), fp=s[:, 1].copy(), fpp=s[:, 2].copy(),
                             residual=float(abs(s[-1, 1])), diverged=bool(diverged))


def far_field_slope(problem, shot):
    """Signed far-field miss of one shot.

    A shot is stopped as soon as its outcome is decided: ``f'`` turning
    negative (undershoot, returns the negative ``f'``) or ``f''`` turning
    positive while ``f' > 0`` (overshoot, returns the positive ``f'``).
    Otherwise the value is ``f'(t_max)``, so the function is continuous
    where it crosses zero and its root is ``f'(t_max) = 0`` on a monotone
    decaying profile.
    """
    a, b = problem.coefficients
    n, h = _steps(problem)
    _, fp, _, event = _rk4(float(a), float(b), *map(float, problem.initial_state(shot)),
                           h, n, DIVERGENCE_LIMIT, _EMPTY, True)
    if event == 2 or not math.isfinite(fp):
        return math.copysign(math.inf, fp) if fp == fp else math.inf
    return fp


def endpoint_slope(problem, shot):
    """Plain ``f'(t_max)`` without early stopping."""
    a, b = problem.coefficients
    n, h = _steps(problem)
    _, fp, _, _ = _rk4(float(a), float(b), *map(float, problem.initial_state(shot)),
                       h, n, DIVERGENCE_LIMIT, _EMPTY, False)
    return fp


def scan_brackets(problem, lo=-10.0, hi=10.0, n=200):
    """All subintervals of ``[lo, hi]`` (``n`` equal pieces) where the far-field slope changes sign."""
    xs = np.linspace(lo, hi, n + 1)
    vals = [far_field_slope(problem, x) for x in xs]
    out = []
    for k in range(n):
        if vals[k] == 0.0:
            out.append((xs[k], xs[k]))
        elif vals[k] * vals[k + 1] < 0:
            out.append((xs[k], xs[k + 1]))
    if vals[n] == 0.0:
        out.append((xs[n], xs[n]))
    return out


def refine_root(problem, lo, hi, tol=1e-10):
    """Bisection to a bracket narrower than ``tol``, then one secant step if it helps."""
    flo = far_field_slope(problem, lo)
    fhi = far_field_slope(problem, hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = far_field_slope(problem, mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    best = 0.5 * (lo + hi)
    elo, ehi = endpoint_slope(problem, lo), endpoint_slope(problem, hi)
    if elo * ehi < 0:
        sec = lo - elo * (hi - lo) / (ehi - elo)
        if lo <= sec <= hi and abs(endpoint_slope(problem, sec)) < abs(endpoint_slope(problem, best)):
            best = sec
    return best


def _finish(problem, shot, bracket):
    prof = integrate_profile(problem, problem.initial_state(shot))
    prof.shot_parameter = float(shot)
    prof.bracket = tuple(float(v) for v in bracket)
    prof.converged = (not prof.diverged) and prof.residual <= problem.far_field_tol
    prof.meta = {"case": problem.case, "m": problem.m, "gamma": problem.gamma,
                 "a": problem.coefficients[0], "b": problem.coefficients[1], "t_max": problem.t_max}
    return prof


def shoot(problem, bracket=(-10.0, 10.0), n_scan=200, tol=1e-10):
    """Solve the boundary-value problem with the first root found in ``bracket``."""
    brackets = scan_brackets(problem, *bracket, n=n_scan)
    if not brackets:
        raise NoSolutionError(
            f"far-field slope keeps one sign for shot parameters in [{bracket[0]}, {bracket[1]}]",
            brackets=[tuple(bracket)])
    lo, hi = brackets[0]
    for lo, hi in brackets:
        prof = _finish(problem, refine_root(problem, lo, hi, tol), (lo, hi))
        if prof.converged:
            return prof
    raise NoSolutionError(
        "sign changes found but none satisfies the far-field tolerance (blow-up jumps)",
        brackets=brackets)


def shoot_all(problem, bracket=(-10.0, 10.0), n_scan=200, tol=1e-10):
    """Every converged profile, one per sign-change bracket, in bracket order."""
    out = []
    for lo, hi in scan_brackets(problem, *bracket, n=n_scan):
        prof = _finish(problem, refine_root(problem, lo, hi, tol), (lo, hi))
        if prof.converged:
            out.append(prof)
    return out


def shoot_temperature(m, gamma=0.0, bracket=(-10.0, 10.0), **kw):
    opts = {k: kw.pop(k) for k in ("n_scan", "tol") if k in kw}
    return shoot(SimilarityProblem(TEMPERATURE, m, gamma, **kw), bracket, **opts)


def shoot_flux(m, gamma=0.0, bracket=(-10.0, 10.0), **kw):
    opts = {k: kw.pop(k) for k in ("n_scan", "tol") if k in kw}
    return shoot(SimilarityProblem(FLUX, m, gamma, **kw), bracket, **opts)


@dataclass(frozen=True)
class PhysicalConstants:
    rho_inf: float = 1.0
    beta: float = 1.0
    g: float = 1.0
    k: float = 1.0
    mu: float = 1.0
    lam: float = 1.0
    A: float = 1.0
    omega: float = 0.0
    T_inf: float = 0.0

    def __post_init__(self):
        for name in ("rho_inf", "beta", "g", "k", "mu", "lam", "A"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive")

    @property
    def buoyancy(self):
        return self.rho_inf * self.beta * self.g * self.k / self.mu


def gamma_value(case, constants, m):
    """Wall suction/injection parameter; zero for an impermeable wall."""
    c = constants
    if case == TEMPERATURE:
        if m == -1:
            raise InvalidParameterError("m = -1 is excluded in the prescribed-temperature case")
        return 2 * c.omega / (m + 1) * math.sqrt(c.mu / (c.rho_inf * c.beta * c.g * c.k * c.A * c.lam))
    if case == FLUX:
        if m == -2:
            raise InvalidParameterError("m = -2 is excluded in the prescribed-flux case")
        ra = rayleigh(FLUX, c)
        return 3 ** (1 / 3) * ra ** (-1 / 3) * c.omega / (c.lam * (m + 2))
    raise InvalidParameterError(f"no gamma formula for case {case!r}")


def rayleigh(case, constants, x=None, m=0.0):
    """Local ``Ra_x`` (temperature case, needs ``x > 0``) or the global ``R_a`` (flux case)."""
    c = constants
    if case == FLUX:
        return c.buoyancy / c.lam
    if case != TEMPERATURE:
        raise InvalidParameterError(f"no Rayleigh number for case {case!r}")
    if x is None or not np.all(np.asarray(x) > 0):
        raise InvalidParameterError(f"local Rayleigh number needs x > 0, got {x}")
    return c.buoyancy * c.A * np.asarray(x, dtype=float) ** (m + 1) / c.lam


def reconstruct_fields(profile, case, constants, m, x, y):
    """Stream function and temperature at points ``(x, y)`` from a converged profile.

    Points beyond ``t_max`` take the far-field values ``f(t_max)`` and
    ``theta = 0``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0):
        raise InvalidParameterError("sample points need x > 0")
    c = constants
    if case == TEMPERATURE:
        ra = rayleigh(TEMPERATURE, c, x, m)
        t = np.sqrt(ra) * y / x
        psi_scale = c.lam * np.sqrt(ra)
        T_scale = c.A * x**m
    elif case == FLUX:
        ra = rayleigh(FLUX, c)
        t = 3 ** (-1 / 3) * ra ** (1 / 3) * x ** ((m - 1) / 3) * y
        psi_scale = 3 ** (2 / 3) * ra ** (1 / 3) * c.lam * x ** ((m + 2) / 3)
        T_scale = 3 ** (1 / 3) * ra ** (-1 / 3) * x ** ((2 * m + 1) / 3)
    else:
        raise InvalidParameterError(f"no field scaling for case {case!r}")
    t_end = profile.t[-1]
    inside = t <= t_end
    tc = np.clip(t, 0.0, t_end)
    f = np.where(inside, CubicSpline(profile.t, profile.f)(tc), profile.f[-1])
    theta = np.where(inside, CubicSpline(profile.t, profile.fp)(tc), 0.0)
    return psi_scale * f, T_scale * theta + c.T_inf
