"""Restricted and regional fractional Laplacians on an interval.

The restricted operator acts on the zero extension of a grid function,

    K u(x) = c_{1,a} PV int_R (u(x) - u(y)) |x - y|^{-1-2a} dy,

and splits exactly into a part that only sees Omega x Omega (the regional
operator P0) plus multiplication by the exterior mass

    w(x) = c_{1,a} int_{R \\ Omega} |x - y|^{-1-2a} dy.

P0 is discretized by collocation at the nodes on the piecewise-linear
interpolant of the grid values, extended by its edge values across the two
boundary cells so that P0 annihilates constants. The kernel is integrated
exactly against the hat functions; on the two cells adjacent to the
collocation node the symmetric second difference 2u(x) - u(x+t) - u(x-t) is
replaced by its quadratic model, which keeps every weight finite for a >= 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .grid_ops import Grid, Layout

P0_MAX_N = 256


def normalization_constant(a: float) -> float:
    """c_{1,a} = 4^a a Gamma(a + 1/2) / (sqrt(pi) Gamma(1 - a)).

    With this value the singular integral has Fourier symbol |xi|^{2a}.
    """
    if not 0 < a < 1:
        raise InvalidArgumentError(f"a must lie in (0,1), got {a}")
    return 4.0**a * a * math.gamma(a + 0.5) / (math.sqrt(math.pi) * math.gamma(1.0 - a))


@dataclass(frozen=True)
class KernelSpec:
    a: float
    n: int = 1
    c: float = field(init=False)

    def __post_init__(self):
        if self.n != 1:
            raise InvalidArgumentError("only dimension n = 1 is supported")
        object.__setattr__(self, "c", normalization_constant(self.a))


@dataclass(frozen=True)
class RestrictedOperator:
    matrix: np.ndarray
    w: np.ndarray
    kernel: KernelSpec
    grid: Grid
    raw_asymmetry: float = 0.0  # max |E - E^T| of the collocation weights, before symmetrization

    def __matmul__(self, u):
        return self.matrix @ u


@dataclass(frozen=True)
class RegionalOperator:
    matrix: np.ndarray
    kernel: KernelSpec
    grid: Grid

    def __matmul__(self, u):
        return self.matrix @ u


def exterior_mass(grid: Grid, kernel: KernelSpec) -> np.ndarray:
    x = grid.x
    dl = x - grid.alpha
    dr = grid.beta - x
    if np.any(dl <= 0) or np.any(dr <= 0):
        raise InvalidArgumentError("exterior mass diverges at boundary nodes")
    a = kernel.a
    return kernel.c / (2 * a) * (dl ** (-2 * a) + dr ** (-2 * a))


# Antiderivatives in units of the grid spacing: G'' = t^(-1-2a).
# Differences are formed through expm1/log1p so that far-field weights, which
# are tiny second differences of a large function, keep full relative accuracy.


def _g_diff(m, step, a):
    """G(m + step) - G(m), step = +1 or -1."""
    p = 1.0 - 2.0 * a
    lg = np.log1p(step / m)
    if p == 0.0:
        return -lg
    return m**p * np.expm1(p * lg) / (p * (-2.0 * a))


def _gprime(m, a):
    return -(m ** (-2.0 * a)) / (2.0 * a)


def _gprime_diff(m, a):
    """G'(m + 1) - G'(m)."""
    return -(m ** (-2.0 * a)) * np.expm1(-2.0 * a * np.log1p(1.0 / m)) / (2.0 * a)


def _collocation_weights(n: int, a: float) -> np.ndarray:
    """Row-collocation weights E (unit spacing, without c and h^{-2a})."""
    m = np.arange(1, n, dtype=np.float64)  # distances 1..n-1
    near = 1.0 / (2.0 - 2.0 * a)
    right_half = -_gprime(m, a) + _g_diff(m, 1, a)
    left_half = np.where(m >= 2, _gprime(m, a) + _g_diff(np.maximum(m, 2.0), -1, a), near)
    omega = left_half + right_half  # hat weight; m = 1 combines near field and the far half hat
    omega_edge = left_half + _gprime_diff(m, a)  # edge node: constant over the boundary cell

    idx = np.arange(n)
    dist = np.abs(idx[:, None] - idx[None, :])
    table = np.concatenate(([0.0], omega))
    e = table[dist]
    if n > 1:
        edge = np.concatenate(([0.0], omega_edge))
        e[1:, 0] = edge[idx[1:]]
        e[:-1, n - 1] = edge[(n - 1) - idx[:-1]]
    return e


def assemble_restricted(grid: Grid, kernel: KernelSpec) -> RestrictedOperator:
    if grid.layout is not Layout.NODE:
        raise InvalidArgumentError("the restricted operator needs a node-centered grid")
    n = grid.n_points
    a = kernel.a
    e = _collocation_weights(n, a)
    asym = float(np.abs(e - e.T).max())
    e = 0.5 * (e + e.T)
    scale = kernel.c * grid.h ** (-2.0 * a)
    p0 = -scale * e
    p0[np.diag_indices(n)] = scale * e.sum(axis=1)
    w = exterior_mass(grid, kernel)
    k = p0
    k[np.diag_indices(n)] += w
    k.setflags(write=False)
    w.setflags(write=False)
    return RestrictedOperator(k, w, kernel, grid, raw_asymmetry=asym * scale)


def regional_from_restricted(r: RestrictedOperator) -> RegionalOperator:
    p0 = np.array(r.matrix)
    p0[np.diag_indices_from(p0)] -= r.w
    p0.setflags(write=False)
    return RegionalOperator(p0, r.kernel, r.grid)


def edge_constant_values(grid: Grid, u) -> np.ndarray:
    """Values of the edge-extended interpolant at alpha, x_1..x_N, beta."""
    u = np.asarray(u, dtype=np.float64)
    return np.concatenate(([u[0]], u, [u[-1]]))


def _midpoint_nodes(q):
    return (np.arange(q) + 0.5) / q


def p0_bruteforce(u, v, grid: Grid, kernel: KernelSpec, q: int = 4, levels: int = 4) -> float:
    """p0(u, v) = c/2 int_{Omega x Omega} (u(x)-u(y)) (v(x)-v(y)) / |x-y|^{1+2a}
    by direct tensor midpoint quadrature on the edge-extended interpolants.

    Off-diagonal cell pairs use a q x q midpoint rule. Each diagonal cell is
    subdivided dyadically ``levels`` times; the sub-squares that still touch
    the diagonal are integrated in closed form (both interpolants are linear
    there, so the integrand is slope_u*slope_v*|x-y|^{1-2a}).
    """
    if grid.layout is not Layout.NODE:
        raise InvalidArgumentError("p0_bruteforce needs a node-centered grid")
    if grid.n_points > P0_MAX_N:
        raise InvalidArgumentError(f"p0_bruteforce is limited to N <= {P0_MAX_N}, got {grid.n_points}")
    a = kernel.a
    h = grid.h
    ue = edge_constant_values(grid, u)
    ve = edge_constant_values(grid, v)
    ncell = ue.size - 1
    xe = grid.alpha + h * np.arange(ncell + 1)

    # sample points inside each cell (local coordinate s in (0,1))
    s = _midpoint_nodes(q)
    xs = (xe[:-1, None] + h * s[None, :]).ravel()
    us = (ue[:-1, None] * (1 - s) + ue[1:, None] * s).ravel()
    vs = (ve[:-1, None] * (1 - s) + ve[1:, None] * s).ravel()
    cell = np.repeat(np.arange(ncell), q)

    wq = (h / q) ** 2
    total = 0.0
    # off-diagonal cell pairs, accumulated row block by row block
    for i in range(ncell):
        sl = slice(i * q, (i + 1) * q)
        dx = np.abs(xs[sl, None] - xs[None, :])
        mask = cell[None, :] != i
        du = us[sl, None] - us[None, :]
        dv = vs[sl, None] - vs[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            integrand = np.where(mask, du * dv / np.where(mask, dx, 1.0) ** (1 + 2 * a), 0.0)
        total += wq * integrand.sum()

    # diagonal cells
    slope_u = np.diff(ue) / h
    slope_v = np.diff(ve) / h
    diag_unit = 0.0  # integral of |x-y|^{1-2a} over the diagonal part of a unit cell, computed by subdivision

    def exact_square(delta):
        return 2.0 * delta ** (3 - 2 * a) / ((2 - 2 * a) * (3 - 2 * a))

    def subdivide(x0, y0, size, level):
        if level == 0:
            return exact_square(size) if x0 == y0 else _mid(x0, y0, size)
        half = size / 2
        acc = 0.0
        for ox in (0.0, half):
            for oy in (0.0, half):
                if ox == oy:
                    acc += subdivide(x0 + ox, y0 + oy, half, level - 1)
                else:
                    acc += _mid(x0 + ox, y0 + oy, half)
        return acc

    def _mid(x0, y0, size):
        px = x0 + size * s
        py = y0 + size * s
        d = np.abs(px[:, None] - py[None, :])
        return (size / q) ** 2 * np.sum(d ** (1 - 2 * a))

    diag_unit = subdivide(0.0, 0.0, 1.0, levels)
    total += np.sum(slope_u * slope_v) * h ** (3 - 2 * a) * diag_unit
    return 0.5 * kernel.c * total
