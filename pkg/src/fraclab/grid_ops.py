"""Uniform 1D grids and the flux-form finite-difference realization of

    A u = -(a(x) u')' + c(x) u

on an interval with homogeneous Dirichlet or conormal (zero-flux) Neumann
boundary conditions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import AssemblyError, InvalidArgumentError

Coefficient = Callable[[np.ndarray], np.ndarray]


class Layout(enum.IntEnum):
    NODE = 0
    CELL = 1


class BC(enum.IntEnum):
    DIRICHLET = 0
    NEUMANN = 1

    @classmethod
    def parse(cls, value) -> "BC":
        if isinstance(value, BC):
            return value
        try:
            return cls[str(value).upper()]
        except KeyError:
            raise InvalidArgumentError(f"unknown boundary condition {value!r}") from None

    @property
    def layout(self) -> Layout:
        return Layout.NODE if self is BC.DIRICHLET else Layout.CELL


@dataclass(frozen=True)
class Grid:
    alpha: float
    beta: float
    n_points: int
    layout: Layout
    h: float = field(init=False)
    x: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.beta > self.alpha:
            raise InvalidArgumentError(f"need beta > alpha, got ({self.alpha}, {self.beta})")
        if self.n_points < 1:
            raise InvalidArgumentError(f"n_points must be positive, got {self.n_points}")
        length = self.beta - self.alpha
        i = np.arange(1, self.n_points + 1, dtype=np.float64)
        if self.layout is Layout.NODE:
            h = length / (self.n_points + 1)
            x = self.alpha + i * h
        else:
            h = length / self.n_points
            x = self.alpha + (i - 0.5) * h
        x.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "x", x)

    @property
    def length(self) -> float:
        return self.beta - self.alpha

    def inner(self, u, v):
        """Discrete L2 inner product h * sum(u * conj(v))."""
        return self.h * np.sum(u * np.conj(v))

    def norm(self, u) -> float:
        return float(np.sqrt(self.h * np.sum(np.abs(u) ** 2)))


def build_uniform_grid(alpha: float, beta: float, n: int, layout=Layout.NODE) -> Grid:
    """Uniform grid with ``n`` unknowns strictly inside (alpha, beta).

    Node-centered grids put x_i = alpha + i*h with h = L/(n+1) so that the
    endpoints are the (eliminated) Dirichlet nodes; cell-centered grids put
    x_i = alpha + (i - 1/2)*h with h = L/n.
    """
    if isinstance(layout, str):
        layout = Layout[layout.upper().replace("-CENTERED", "").replace("_CENTERED", "")]
    if int(n) != n or n < 2:
        raise InvalidArgumentError(f"n must be an integer >= 2, got {n}")
    if not beta > alpha:
        raise InvalidArgumentError(f"need beta > alpha, got ({alpha}, {beta})")
    return Grid(float(alpha), float(beta), int(n), Layout(layout))


def _const(v):
    return lambda x: np.full(np.shape(x), float(v))


@dataclass(frozen=True)
class EllipticSpec:
    """Coefficients and boundary condition of A = -(a u')' + c u.

    ``label`` is the catalog string the coefficient came from (used for cache
    keys and reports); ``symbolic`` optionally holds sympy expressions of
    (a, c) in the variable ``x`` so that traces of A^m f can be taken exactly.
    """

    diffusion: Coefficient = field(default_factory=lambda: _const(1.0))
    potential: Coefficient = field(default_factory=lambda: _const(0.0))
    bc: BC = BC.DIRICHLET
    c0: float = 1e-8
    label: str = "const:1"
    symbolic: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "bc", BC.parse(self.bc))
        if not self.c0 > 0:
            raise InvalidArgumentError("ellipticity floor c0 must be positive")


def parse_coefficient(text: str):
    """Parse a diffusion-coefficient catalog string.

    ``const:v`` gives a = v and ``affine:p,q`` gives a = p + q*x. Returns
    ``(callable, sympy_expr)``.
    """
    import sympy as sp

    x = sp.Symbol("x", real=True)
    kind, _, args = text.partition(":")
    try:
        vals = [float(s) for s in args.split(",")] if args else []
    except ValueError:
        raise InvalidArgumentError(f"bad coefficient arguments in {text!r}") from None
    if kind == "const" and len(vals) == 1:
        expr = sp.Float(vals[0])
    elif kind == "affine" and len(vals) == 2:
        expr = sp.Float(vals[0]) + sp.Float(vals[1]) * x
    else:
        raise InvalidArgumentError(f"unknown coefficient {text!r} (expected const:v or affine:p,q)")
    fn = sp.lambdify(x, expr, "numpy")
    return (lambda t: np.broadcast_to(np.asarray(fn(t), dtype=np.float64), np.shape(t)).copy()), expr


def elliptic_spec(coef: str = "const:1", bc="dirichlet", potential: float = 0.0, c0: float = 1e-8) -> EllipticSpec:
    """Build an EllipticSpec from catalog strings."""
    import sympy as sp

    a_fn, a_expr = parse_coefficient(coef)
    return EllipticSpec(
        diffusion=a_fn,
        potential=_const(potential),
        bc=BC.parse(bc),
        c0=c0,
        label=coef if potential == 0 else f"{coef};c={potential!r}",
        symbolic=(a_expr, sp.Float(potential)),
    )


@dataclass(frozen=True)
class DiscreteOperator:
    diag: np.ndarray
    offdiag: np.ndarray
    grid: Grid
    spec: EllipticSpec

    @property
    def n(self) -> int:
        return self.diag.size

    @property
    def h(self) -> float:
        return self.grid.h

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def __matmul__(self, u):
        return apply_operator(self, u)


def assemble_elliptic(spec: EllipticSpec, grid: Grid) -> DiscreteOperator:
    if grid.layout is not spec.bc.layout:
        raise InvalidArgumentError(
            f"{spec.bc.name.lower()} conditions need a {spec.bc.layout.name.lower()}-centered grid"
        )
    h, x = grid.h, grid.x
    n = grid.n_points
    a_mid = np.asarray(spec.diffusion(grid.alpha + h * (np.arange(n + 1) + (0.5 if grid.layout is Layout.NODE else 0.0))),
                       dtype=np.float64)
    # a_mid[j] is a at the face between unknown j-1 and j (faces 0 and n are the boundary faces)
    cvals = np.asarray(spec.potential(x), dtype=np.float64)

    bad = np.flatnonzero(~(a_mid >= spec.c0))
    if bad.size:
        j = int(bad[0])
        xf = grid.alpha + h * (j + (0.5 if grid.layout is Layout.NODE else 0.0))
        raise AssemblyError(f"diffusion coefficient {a_mid[j]:.6g} < c0={spec.c0:g} at face x={xf:.6g} (index {j})")
    bad = np.flatnonzero(~(cvals >= 0))
    if bad.size:
        i = int(bad[0])
        raise AssemblyError(f"negative potential {cvals[i]:.6g} at node {i} (x={x[i]:.6g})")

    left = a_mid[:-1].copy()
    right = a_mid[1:].copy()
    if spec.bc is BC.NEUMANN:
        # zero flux through the boundary faces
        left[0] = 0.0
        right[-1] = 0.0
    diag = (left + right) / h**2 + cvals
    off = -a_mid[1:-1] / h**2
    diag.setflags(write=False)
    off.setflags(write=False)
    return DiscreteOperator(diag, off, grid, spec)


def apply_operator(op: DiscreteOperator, u):
    u = np.asarray(u)
    if u.shape[0] != op.n:
        raise InvalidArgumentError(f"vector length {u.shape[0]} does not match operator size {op.n}")
    d = op.diag.reshape((-1,) + (1,) * (u.ndim - 1))
    e = op.offdiag.reshape((-1,) + (1,) * (u.ndim - 1))
    out = d * u
    out[:-1] += e * u[1:]
    out[1:] += e * u[:-1]
    return out
