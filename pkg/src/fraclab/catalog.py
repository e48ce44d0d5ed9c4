"""Right-hand-side catalog.

Catalog strings: ``const`` (f = 1), ``poly2`` (f = 4(x-alpha)(beta-x)/L^2),
``linear`` (f = x), ``sin:k`` (f = sin(k pi (x-alpha)/L)), ``eigen:k`` (the
k-th discrete eigenvector of the operator) and ``custom:path`` (CSV samples
``x,f``, spline-interpolated). Analytic entries carry a sympy expression so
that boundary traces of A^m f can be taken exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy as sp

from .errors import InvalidArgumentError

X = sp.Symbol("x", real=True)


@dataclass(frozen=True)
class RhsEntry:
    name: str
    fn: Callable[[np.ndarray], np.ndarray] | None = None
    expr: sp.Expr | None = None
    eigen_index: int | None = None

    @classmethod
    def from_expr(cls, expr, name: str | None = None) -> "RhsEntry":
        expr = sp.sympify(expr)
        f = sp.lambdify(X, expr, "numpy")
        return cls(name or f"expr:{expr}", lambda t: np.broadcast_to(np.asarray(f(t), dtype=float), np.shape(t)).copy(), expr)

    def __call__(self, x):
        if self.fn is None:
            raise InvalidArgumentError(f"{self.name} has no pointwise values")
        return self.fn(np.asarray(x, dtype=np.float64))

    def sample(self, grid, dec=None) -> np.ndarray:
        if self.eigen_index is not None:
            if dec is None:
                raise InvalidArgumentError(f"{self.name} needs a decomposition")
            k = self.eigen_index
            if not 1 <= k <= dec.n:
                raise InvalidArgumentError(f"eigen index {k} out of range 1..{dec.n}")
            return np.array(dec.eigenvectors[:, k - 1])
        return self(grid.x)

    def minus(self, other: "RhsEntry", name: str | None = None) -> "RhsEntry":
        if self.expr is None or other.expr is None:
            raise InvalidArgumentError("only analytic entries can be combined")
        return RhsEntry.from_expr(self.expr - other.expr, name or f"{self.name}-{other.name}")


def _read_csv(path):
    xs, fs = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                xs.append(float(row[0]))
                fs.append(float(row[1]))
            except (ValueError, IndexError):
                if xs:  # a header is only allowed before the data
                    raise InvalidArgumentError(f"{path}: malformed row {row!r}") from None
    if len(xs) < 4:
        raise InvalidArgumentError(f"{path}: need at least 4 samples")
    order = np.argsort(xs)
    return np.asarray(xs)[order], np.asarray(fs)[order]


def parse_rhs(text: str, alpha: float = 0.0, beta: float = np.pi) -> RhsEntry:
    kind, _, arg = text.partition(":")
    length = beta - alpha
    if kind == "const" and not arg:
        return RhsEntry.from_expr(sp.Integer(1), "const")
    if kind == "poly2" and not arg:
        return RhsEntry.from_expr(4 * (X - alpha) * (beta - X) / sp.Float(length) ** 2, "poly2")
    if kind == "linear" and not arg:
        return RhsEntry.from_expr(X, "linear")
    if kind in ("sin", "eigen"):
        try:
            k = int(arg)
        except ValueError:
            raise InvalidArgumentError(f"{text!r}: expected an integer mode number") from None
        if k < 1:
            raise InvalidArgumentError(f"{text!r}: mode number must be >= 1")
        if kind == "sin":
            return RhsEntry.from_expr(sp.sin(k * sp.pi * (X - alpha) / sp.Float(length)), text)
        return RhsEntry(text, eigen_index=k)
    if kind == "custom" and arg:
        from scipy.interpolate import CubicSpline

        xs, fs = _read_csv(arg)
        spline = CubicSpline(xs, fs)
        return RhsEntry(text, fn=lambda t: spline(t))
    raise InvalidArgumentError(f"unknown right-hand side {text!r}")


def trace_lift(entry: RhsEntry, alpha: float, beta: float) -> RhsEntry:
    """Linear function matching ``entry`` at both endpoints."""
    if entry.expr is None:
        raise InvalidArgumentError("trace lift needs an analytic entry")
    fa = entry.expr.subs(X, alpha)
    fb = entry.expr.subs(X, beta)
    return RhsEntry.from_expr(fa + (fb - fa) * (X - alpha) / (beta - alpha), f"lift({entry.name})")
