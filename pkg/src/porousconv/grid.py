"""Structured rectangular grid, boundary partition and discrete calculus.

Fields are plain ``numpy`` arrays of shape ``grid.shape == (nx + 1, ny + 1)``;
``u[i, j]`` is the value at ``(i * hx, j * hy)``. Vector fields are arrays of
shape ``(2, nx + 1, ny + 1)``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import ConfigurationError, InvalidParameterError

EDGES = ("bottom", "right", "top", "left")  # counter-clockwise perimeter order


@dataclass(frozen=True)
class Grid:
    lx: float
    ly: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.lx > 0 and self.ly > 0):
            raise InvalidParameterError(f"domain lengths must be positive, got {self.lx}, {self.ly}")
        if int(self.nx) != self.nx or int(self.ny) != self.ny or self.nx < 2 or self.ny < 2:
            raise InvalidParameterError(f"cell counts must be integers >= 2, got {self.nx}, {self.ny}")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))

    @property
    def hx(self):
        return self.lx / self.nx

    @property
    def hy(self):
        return self.ly / self.ny

    @property
    def shape(self):
        return (self.nx + 1, self.ny + 1)

    @property
    def size(self):
        return (self.nx + 1) * (self.ny + 1)

    @property
    def area(self):
        return self.lx * self.ly

    @cached_property
    def x(self):
        return np.arange(self.nx + 1) * self.hx

    @cached_property
    def y(self):
        return np.arange(self.ny + 1) * self.hy

    def mesh(self):
        """Node coordinates ``(X, Y)`` with ``indexing='ij'``."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    @cached_property
    def weights(self):
        """Trapezoidal product-rule weights (corners 1/4, edges 1/2 of hx*hy)."""
        wx = np.full(self.nx + 1, self.hx)
        wx[[0, -1]] *= 0.5
        wy = np.full(self.ny + 1, self.hy)
        wy[[0, -1]] *= 0.5
        w = np.outer(wx, wy)
        w.flags.writeable = False
        return w

    @cached_property
    def boundary_mask(self):
        m = np.zeros(self.shape, dtype=bool)
        m[[0, -1], :] = True
        m[:, [0, -1]] = True
        m.flags.writeable = False
        return m

    @property
    def interior_mask(self):
        return ~self.boundary_mask

    def edge_mask(self, edge):
        m = np.zeros(self.shape, dtype=bool)
        if edge == "left":
            m[0, :] = True
        elif edge == "right":
            m[-1, :] = True
        elif edge == "bottom":
            m[:, 0] = True
        elif edge == "top":
            m[:, -1] = True
        else:
            raise InvalidParameterError(f"unknown edge {edge!r}; expected one of {EDGES}")
        return m

    def check(self, *fields):
        for f in fields:
            f = np.asarray(f)
            if f.shape[-2:] != self.shape:
                raise InvalidParameterError(
                    f"field of shape {f.shape} does not live on a grid of shape {self.shape}")


def build_grid(lx, ly, nx, ny):
    return Grid(float(lx), float(ly), nx, ny)


@dataclass(frozen=True)
class BoundaryPartition:
    """Split of the rectangle's four edges into Dirichlet (gamma1) and Neumann (gamma2) arcs.

    Corner nodes touching any gamma1 edge belong to gamma1.
    """

    gamma1: frozenset

    def __init__(self, gamma1):
        edges = frozenset(gamma1)
        unknown = edges - set(EDGES)
        if unknown:
            raise ConfigurationError(f"unknown edge names {sorted(unknown)}; expected a subset of {EDGES}")
        if not edges:
            raise ConfigurationError("gamma1 must contain at least one edge")
        if edges in ({"left", "right"}, {"bottom", "top"}):
            raise ConfigurationError(f"gamma1 = {sorted(edges)} is not a connected boundary arc")
        object.__setattr__(self, "gamma1", edges)

    @property
    def gamma2(self):
        return frozenset(EDGES) - self.gamma1

    def dirichlet_mask(self, grid):
        m = np.zeros(grid.shape, dtype=bool)
        for e in self.gamma1:
            m |= grid.edge_mask(e)
        return m

    def neumann_mask(self, grid):
        return grid.boundary_mask & ~self.dirichlet_mask(grid)


ALL_DIRICHLET = BoundaryPartition(EDGES)


def gradient(grid, u):
    """Central differences inside, second-order one-sided differences on the boundary."""
    grid.check(u)
    gx, gy = np.gradient(np.asarray(u, dtype=float), grid.hx, grid.hy, edge_order=2)
    return np.stack([gx, gy])


def perp(w):
    """Rotate every vector (a, b) to (b, -a)."""
    w = np.asarray(w)
    return np.stack([w[1], -w[0]])


def dot(v, w):
    return v[0] * w[0] + v[1] * w[1]


def laplacian(grid, u):
    """Five-point Laplacian at interior nodes; boundary nodes are NaN (not applicable)."""
    grid.check(u)
    u = np.asarray(u, dtype=float)
    out = np.full(grid.shape, np.nan)
    out[1:-1, 1:-1] = ((u[2:, 1:-1] - 2 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / grid.hx**2
                       + (u[1:-1, 2:] - 2 * u[1:-1, 1:-1] + u[1:-1, :-2]) / grid.hy**2)
    return out


def integrate(grid, u):
    grid.check(u)
    return float(np.sum(grid.weights * u))


def inner(grid, u, v):
    grid.check(u, v)
    return integrate(grid, np.asarray(u) * np.asarray(v))


def l2_norm(grid, u):
    """L2 norm of a scalar field, or of the pointwise Euclidean length of a vector field."""
    u = np.asarray(u, dtype=float)
    grid.check(u)
    sq = u * u if u.ndim == 2 else np.sum(u * u, axis=0)
    return float(np.sqrt(integrate(grid, sq)))


def h1_seminorm(grid, u):
    return l2_norm(grid, gradient(grid, u))


def linf_norm(grid, u):
    u = np.asarray(u, dtype=float)
    grid.check(u)
    if u.ndim == 2:
        return float(np.max(np.abs(u)))
    return float(np.max(np.sqrt(np.sum(u * u, axis=0))))
