"""Fast invariant checks across all modules, used by ``fraclab selftest``.

Every check returns (name, ok, measured value, tolerance). Sizes are kept
small so that the whole suite runs in a few seconds.
"""

from __future__ import annotations

import math

import numpy as np

from .contour import apply_inverse_power_contour, build_rule
from .grid_ops import apply_operator, assemble_elliptic, build_uniform_grid, elliptic_spec
from .linalg import fnv1a64, jacobi_eigenvalues, tridiagonal_eigh
from .nonlocal_ops import KernelSpec, assemble_restricted, exterior_mass, regional_from_restricted
from .spectral import apply_power, decompose, neumann_augment


def _rel(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def check_grid(rng):
    grid = build_uniform_grid(0.0, math.pi, 64, "node")
    op = assemble_elliptic(elliptic_spec("affine:1,0.5"), grid)
    u, v = rng.standard_normal((2, 64))
    asym = abs(grid.inner(apply_operator(op, u), v) - grid.inner(u, apply_operator(op, v)))
    yield "grid.symmetry", asym <= 1e-10 * abs(grid.inner(u, u)) * op.diag.max(), asym, 1e-10
    gn = build_uniform_grid(0.0, math.pi, 64, "cell")
    opn = assemble_elliptic(elliptic_spec(bc="neumann"), gn)
    kern = float(np.abs(apply_operator(opn, np.ones(64))).max())
    yield "grid.neumann_constants", kern <= 1e-10, kern, 1e-10


def check_linalg(rng):
    d, e = rng.standard_normal(40), rng.standard_normal(39)
    w, v = tridiagonal_eigh(d, e)
    t = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
    res = float(np.abs(t @ v - v * w).max())
    yield "linalg.ql_residual", res <= 1e-12, res, 1e-12
    wj = jacobi_eigenvalues(t)
    gap = float(np.abs(wj - w).max())
    yield "linalg.jacobi_vs_ql", gap <= 1e-11, gap, 1e-11
    ok = fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    yield "linalg.fnv1a", ok, float(ok), 0.0


def check_spectral(rng):
    grid = build_uniform_grid(0.0, math.pi, 128, "node")
    dec = decompose(assemble_elliptic(elliptic_spec(), grid))
    f = rng.standard_normal(128)
    z, w = complex(*rng.uniform(-1, 1, 2)), complex(*rng.uniform(-1, 1, 2))
    err = _rel(apply_power(dec, z + w, f), apply_power(dec, z, apply_power(dec, w, f)))
    yield "spectral.semigroup", err <= 1e-9, err, 1e-9
    gc = build_uniform_grid(0.0, math.pi, 128, "cell")
    decn = neumann_augment(decompose(assemble_elliptic(elliptic_spec(bc="neumann"), gc)))
    err = _rel(apply_power(decn, 0.5, apply_power(decn, -0.5, f)), f)
    yield "spectral.neumann_inverse", err <= 1e-9, err, 1e-9


def check_contour(rng):
    grid = build_uniform_grid(0.0, math.pi, 64, "node")
    op = assemble_elliptic(elliptic_spec(), grid)
    dec = decompose(op)
    f = rng.standard_normal(64)
    for a in (0.25, 0.75):
        u = apply_inverse_power_contour(op, build_rule(a, 200), f)
        err = _rel(u, apply_power(dec, -a, f))
        yield f"contour.oracle_a{a}", err <= 1e-7, err, 1e-7


def check_nonlocal(rng):
    grid = build_uniform_grid(0.0, 1.0, 64, "node")
    r = assemble_restricted(grid, KernelSpec(0.5))
    x = grid.x
    err = float(np.abs(exterior_mass(grid, KernelSpec(0.5)) - (1 / x + 1 / (1 - x)) / math.pi).max())
    yield "nonlocal.exterior_mass", err <= 1e-10, err, 1e-10
    p0 = regional_from_restricted(r).matrix
    const = float(np.abs(p0 @ np.ones(64)).max() / np.abs(p0).max())
    yield "nonlocal.regional_constants", const <= 1e-10, const, 1e-10
    lam = float(np.linalg.eigvalsh(r.matrix)[0])
    yield "nonlocal.positive", lam > 0, lam, 0.0


SUITES = (check_grid, check_linalg, check_spectral, check_contour, check_nonlocal)


def run_all(seed: int = 0):
    rng = np.random.default_rng(seed)
    for suite in SUITES:
        for name, ok, value, tol in suite(rng):
            yield name, bool(ok), float(value), float(tol)
