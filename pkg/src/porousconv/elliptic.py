"""Sparse finite-difference solvers for the scalar elliptic problems.

Every problem has the form ``d * Lap(u) - v . grad(u) = s`` with Dirichlet
values on one set of boundary nodes and zero normal flux (mirror ghost nodes)
on the rest. The assembled matrix is ``-(d * Lap - v . grad)`` so that with
upwind advection it is an M-matrix.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import ConfigurationError, InvalidParameterError, NonConvergenceError
from .grid import ALL_DIRICHLET

UPWIND = "upwind"
CENTRAL = "central"
SCHEMES = (UPWIND, CENTRAL)

# sparse LU is used up to this many unknowns, Krylov beyond
DIRECT_LIMIT = 40_000


@dataclass
class EllipticProblem:
    diffusion: float
    source: np.ndarray
    dirichlet_mask: np.ndarray
    dirichlet_values: np.ndarray
    neumann_mask: np.ndarray
    velocity: np.ndarray | None = None
    scheme: str = UPWIND

    def __post_init__(self):
        if not self.diffusion > 0:
            raise InvalidParameterError(f"diffusion coefficient must be positive, got {self.diffusion}")
        if self.scheme not in SCHEMES:
            raise InvalidParameterError(f"unknown advection scheme {self.scheme!r}")


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    unknowns: np.ndarray  # flat node indices of the unknowns, in matrix order
    dirichlet_values: np.ndarray  # full-grid array; only Dirichlet nodes are read
    shape: tuple
    _lu: object = field(default=None, repr=False)

    def expand(self, x):
        """Scatter an unknown vector back onto the grid with Dirichlet values reinstated."""
        u = np.array(self.dirichlet_values, dtype=float).ravel()
        u[self.unknowns] = x
        return u.reshape(self.shape)


def _shift(i, n, step, mirror):
    # neighbour index along one axis; out-of-range neighbours are mirrored ghosts
    j = i + step
    if mirror:
        j = np.where(j < 0, 1, j)
        j = np.where(j > n, n - 1, j)
    return j


def _stencil(grid, diffusion, velocity, scheme):
    """Per-node coefficients (centre, west, east, south, north) of -(d Lap - v.grad)."""
    cx = diffusion / grid.hx**2
    cy = diffusion / grid.hy**2
    ones = np.ones(grid.shape)
    centre = (2 * cx + 2 * cy) * ones
    west, east = -cx * ones, -cx * ones
    south, north = -cy * ones, -cy * ones
    if velocity is not None:
        vx, vy = velocity
        if scheme == UPWIND:
            centre = centre + np.abs(vx) / grid.hx + np.abs(vy) / grid.hy
            west = west - np.maximum(vx, 0) / grid.hx
            east = east + np.minimum(vx, 0) / grid.hx
            south = south - np.maximum(vy, 0) / grid.hy
            north = north + np.minimum(vy, 0) / grid.hy
        else:
            west = west - vx / (2 * grid.hx)
            east = east + vx / (2 * grid.hx)
            south = south - vy / (2 * grid.hy)
            north = north + vy / (2 * grid.hy)
    return centre, west, east, south, north


def assemble(problem, grid):
    dmask = np.asarray(problem.dirichlet_mask, dtype=bool)
    nmask = np.asarray(problem.neumann_mask, dtype=bool)
    bmask = grid.boundary_mask
    if np.any(dmask & nmask):
        raise ConfigurationError("a node carries both a Dirichlet and a Neumann condition")
    if np.any(bmask & ~(dmask | nmask)):
        raise ConfigurationError("boundary node without a boundary condition")
    if np.any(nmask & ~bmask):
        raise ConfigurationError("Neumann condition on an interior node")
    grid.check(problem.source, problem.dirichlet_values)

    centre, west, east, south, north = _stencil(grid, problem.diffusion, problem.velocity, problem.scheme)

    free = ~dmask
    I, J = np.nonzero(free)
    row = np.ravel_multi_index((I, J), grid.shape)
    rows = [row]
    cols = [row]
    vals = [centre[I, J]]
    for coef, di, dj in ((west, -1, 0), (east, 1, 0), (south, 0, -1), (north, 0, 1)):
        ni = _shift(I, grid.nx, di, True)
        nj = _shift(J, grid.ny, dj, True)
        rows.append(row)
        cols.append(np.ravel_multi_index((ni, nj), grid.shape))
        vals.append(coef[I, J])
    full = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size))

    unknowns = np.flatnonzero(free.ravel())
    known = np.flatnonzero(dmask.ravel())
    ud = np.asarray(problem.dirichlet_values, dtype=float).ravel()
    A_full = full[unknowns]
    A = A_full[:, unknowns].tocsr()
    rhs = -np.asarray(problem.source, dtype=float).ravel()[unknowns] - A_full[:, known] @ ud[known]
    return LinearSystem(A, rhs, unknowns, np.where(dmask, problem.dirichlet_values, 0.0), grid.shape)


def factorize(system):
    """Sparse LU of the system matrix; returns a callable ``b -> A^{-1} b``."""
    if system._lu is None:
        system._lu = spla.splu(system.matrix.tocsc())
    return system._lu.solve


def _jacobi(A):
    d = A.diagonal()
    return spla.LinearOperator(A.shape, matvec=lambda x: x / d)


def solve_linear(system, tol=1e-12, max_iter=10_000, method="auto"):
    """Solve the system and return the full grid field.

    ``method`` is ``"direct"``, ``"krylov"`` or ``"auto"`` (direct below
    ``DIRECT_LIMIT`` unknowns). Krylov uses CG for symmetric matrices and
    BiCGStab otherwise, both Jacobi-preconditioned.
    """
    if not tol > 0:
        raise InvalidParameterError("tolerance must be positive")
    A, b = system.matrix, system.rhs
    n = A.shape[0]
    if n == 0:
        return system.expand(np.zeros(0))
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return system.expand(np.zeros(n))
    if method == "auto":
        method = "direct" if n <= DIRECT_LIMIT else "krylov"
    if method == "direct":
        x = factorize(system)(b)
    elif method == "krylov":
        symmetric = abs(A - A.T).max() <= 1e-14 * abs(A).max()
        krylov = spla.cg if symmetric else spla.bicgstab
        x, _ = krylov(A, b, rtol=tol, atol=0.0, maxiter=max_iter, M=_jacobi(A))
    else:
        raise InvalidParameterError(f"unknown linear solve method {method!r}")
    res = np.linalg.norm(b - A @ x) / bnorm
    if not res <= tol:
        # refine once; LU on badly scaled rows can miss 1e-12 by a hair
        if method == "direct":
            x = x + factorize(system)(b - A @ x)
            res = np.linalg.norm(b - A @ x) / bnorm
        if not res <= tol:
            raise NonConvergenceError(
                f"linear solve stopped at relative residual {res:.3e} > {tol:.1e}", residual=res)
    return system.expand(x)


def advection(grid, velocity, u, scheme=UPWIND):
    """Discrete ``v . grad(u)`` at interior nodes, matching the assembled stencil.

    Boundary nodes are NaN.
    """
    vx = velocity[0][1:-1, 1:-1]
    vy = velocity[1][1:-1, 1:-1]
    c = u[1:-1, 1:-1]
    dxm = (c - u[:-2, 1:-1]) / grid.hx
    dxp = (u[2:, 1:-1] - c) / grid.hx
    dym = (c - u[1:-1, :-2]) / grid.hy
    dyp = (u[1:-1, 2:] - c) / grid.hy
    out = np.full(grid.shape, np.nan)
    if scheme == UPWIND:
        out[1:-1, 1:-1] = (np.maximum(vx, 0) * dxm + np.minimum(vx, 0) * dxp
                           + np.maximum(vy, 0) * dym + np.minimum(vy, 0) * dyp)
    else:
        out[1:-1, 1:-1] = vx * 0.5 * (dxm + dxp) + vy * 0.5 * (dym + dyp)
    return out


def dirichlet_problem(grid, boundary_values, source=None, diffusion=1.0, velocity=None, scheme=UPWIND):
    """Problem with Dirichlet data on every boundary node."""
    mask = ALL_DIRICHLET.dirichlet_mask(grid)
    return EllipticProblem(
        diffusion=diffusion,
        source=np.zeros(grid.shape) if source is None else source,
        dirichlet_mask=mask,
        dirichlet_values=np.where(mask, boundary_values, 0.0),
        neumann_mask=np.zeros(grid.shape, dtype=bool),
        velocity=velocity,
        scheme=scheme,
    )


def mixed_problem(grid, partition, source, diffusion=1.0):
    """Homogeneous Dirichlet on gamma1, zero normal flux on gamma2."""
    return EllipticProblem(
        diffusion=diffusion,
        source=source,
        dirichlet_mask=partition.dirichlet_mask(grid),
        dirichlet_values=np.zeros(grid.shape),
        neumann_mask=partition.neumann_mask(grid),
    )


def harmonic_lift(grid, tw, tol=1e-12, max_iter=10_000):
    """Discrete harmonic extension of the boundary values of ``tw``."""
    tw = np.asarray(tw, dtype=float)
    grid.check(tw)
    b = tw[grid.boundary_mask]
    if np.all(b == b[0]):
        return np.full(grid.shape, b[0])
    return solve_linear(assemble(dirichlet_problem(grid, tw), grid), tol, max_iter)
