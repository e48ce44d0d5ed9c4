"""Inverse fractional powers without an eigendecomposition.

For a positive definite A the resolvent integral around the spectrum can be
collapsed onto the negative real axis, which gives

    A^{-a} = sin(pi a)/pi * int_0^inf lambda^{-a} (A + lambda)^{-1} d lambda.

With lambda = e^t the integrand decays exponentially in both directions and
the trapezoidal (sinc) rule converges exponentially in the number of nodes.
Each node costs one shifted tridiagonal solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericalError
from .grid_ops import DiscreteOperator
from .linalg import solve_tridiagonal


@dataclass(frozen=True)
class QuadratureRule:
    a: float
    q: int
    step: float
    shifts: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return self.shifts.size

    def scalar(self, lam: float) -> float:
        """Rule applied to the 1x1 operator [lam]; approximates lam**-a."""
        return float(np.sum(self.weights / (lam + self.shifts)))


def default_step(a: float, q: int) -> float:
    """Step that balances the sinc discretization error exp(-2 pi^2 / k)
    against the slower of the two tail truncations exp(-min(a, 1-a) Q k)."""
    step = math.pi * math.sqrt(2.0 / (min(a, 1.0 - a) * q))
    # keep exp(Q k) representable
    return min(step, 700.0 / q)


def build_rule(a: float, q: int, step: float | None = None) -> QuadratureRule:
    if not 0.01 < a < 0.99:
        raise InvalidArgumentError(f"contour exponent must lie in (0.01, 0.99), got {a}")
    if int(q) != q or q < 4:
        raise InvalidArgumentError(f"node parameter Q must be an integer >= 4, got {q}")
    q = int(q)
    step = default_step(a, q) if step is None else float(step)
    if not step > 0:
        raise InvalidArgumentError("quadrature step must be positive")
    t = step * np.arange(-q, q + 1, dtype=np.float64)
    shifts = np.exp(t)
    weights = (math.sin(math.pi * a) / math.pi) * step * np.exp((1.0 - a) * t)
    return QuadratureRule(float(a), q, step, shifts, weights)


class ShiftedSolver:
    """Solves (A + lam I) x = b for the tridiagonal A of a DiscreteOperator."""

    def __init__(self, op: DiscreteOperator):
        self.op = op

    def solve(self, shift: float, b) -> np.ndarray:
        b = np.asarray(b, dtype=np.float64)
        try:
            x = solve_tridiagonal(self.op.diag + shift, self.op.offdiag, b)
        except NumericalError as exc:
            raise NumericalError(f"shifted system singular at lambda={shift:.6g}") from exc
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"shifted solve produced non-finite values at lambda={shift:.6g}")
        return x

    def solve_augmented(self, shift: float, b) -> np.ndarray:
        """Solves (A + E0 + lam I) x = b, E0 the h-weighted projector onto constants.

        A itself may be singular (pure Neumann), so the tridiagonal part is
        grounded at the first node, B = A + lam + d e1 e1^T with d = A[0, 0],
        and the two rank-one terms -d e1 e1^T and E0 = u u^T are restored with
        a 2x2 Woodbury capacitance system.
        """
        op = self.op
        n = op.n
        d0 = float(op.diag[0])
        ground = np.zeros(n)
        ground[0] = d0
        grounded = DiscreteOperator(op.diag + ground, op.offdiag, op.grid, op.spec)
        inner = ShiftedSolver(grounded)
        u = np.full(n, math.sqrt(op.h / op.grid.length))
        e1 = np.zeros(n)
        e1[0] = 1.0
        bb = np.asarray(b, dtype=np.float64)
        y = inner.solve(shift, bb)
        z1 = inner.solve(shift, e1)
        z2 = inner.solve(shift, u)
        cap = np.array([[-1.0 / d0 + z1[0], z2[0]], [u @ z1, 1.0 + u @ z2]])
        try:
            coef = np.linalg.solve(cap, np.array([y[0], u @ y]))
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"augmented capacitance system singular at lambda={shift:.6g}") from exc
        return y - coef[0] * z1 - coef[1] * z2


def _pairwise_sum(terms):
    # fixed-order tree reduction, independent of how terms were produced
    terms = list(terms)
    while len(terms) > 1:
        nxt = [terms[i] + terms[i + 1] for i in range(0, len(terms) - 1, 2)]
        if len(terms) % 2:
            nxt.append(terms[-1])
        terms = nxt
    return terms[0]


def apply_inverse_power_contour(
    op: DiscreteOperator, rule: QuadratureRule | None, f, a: float | None = None, augmented: bool = False
):
    """u = sum_q w_q (A + lambda_q)^{-1} f.

    Passing ``a=1`` (with ``rule=None``) performs the single solve A^{-1} f.
    With ``augmented=True`` the operator is taken as A + E0, where E0 is the
    projector onto constants; this is how a pure Neumann A (which annihilates
    constants) gets a well-defined inverse power.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] != op.n:
        raise InvalidArgumentError(f"vector length {f.shape[0]} does not match operator size {op.n}")
    solver = ShiftedSolver(op)
    solve = solver.solve_augmented if augmented else solver.solve
    if rule is None:
        if a != 1:
            raise InvalidArgumentError("a quadrature rule is required unless a == 1")
        return solve(0.0, f)
    if a is not None and a != rule.a:
        raise InvalidArgumentError(f"rule was built for a={rule.a}, not {a}")
    terms = [w * solve(s, f) for s, w in zip(rule.shifts, rule.weights)]
    return _pairwise_sum(terms)
