"""Regularity measurements for u = (A_B)^{-a} f.

At p = 2 membership of u in H^s is read off the eigencoefficients:
sum k^{2s} c_k^2 < inf iff s < beta - 1/2 when |c_k| ~ k^{-beta}. The
compatibility layer m (the first l with a nonzero boundary trace of A^l f)
predicts beta = 2m + 1 + 2a for Dirichlet and 2m + 2 + 2a for Neumann
conditions. Boundary behaviour is probed by fitting u ~ d^theta near the wall.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import sympy as sp

from .catalog import X, RhsEntry, parse_rhs
from .errors import InsufficientDataError, InvalidArgumentError
from .grid_ops import BC, EllipticSpec, assemble_elliptic, build_uniform_grid, elliptic_spec
from .linalg import jacobi_eigenvalues
from .nonlocal_ops import KernelSpec, assemble_restricted
from .spectral import SpectralDecomposition, decompose, forward_coefficients, neumann_augment, solve_power

log = logging.getLogger(__name__)

COEFF_FLOOR = 1e-14
MAX_PROBE_DEPTH = 3
MASKS = ("all", "odd", "even", "nonzero")


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    intercept: float
    r2: float
    window: tuple[int, int]
    mask: str
    n_points: int


def fit_power_decay(coeffs, mask: str = "all", window=None, k=None) -> DecayFit:
    """Least-squares fit of log|c_k| = intercept - exponent * log k.

    ``k`` defaults to 1, 2, ...; ``window`` is an inclusive (k_min, k_max).
    Coefficients with |c_k| < 1e-14 are dropped; ``nonzero`` additionally drops
    those below 1e-10 of the largest coefficient in the window.
    """
    c = np.abs(np.asarray(coeffs, dtype=float))
    k = np.arange(1, c.size + 1) if k is None else np.asarray(k)
    if mask not in MASKS:
        raise InvalidArgumentError(f"unknown mask {mask!r}")
    lo, hi = window if window is not None else (int(k.min()), int(k.max()))
    sel = (k >= lo) & (k <= hi)
    if mask == "odd":
        sel &= k % 2 == 1
    elif mask == "even":
        sel &= k % 2 == 0
    elif mask == "nonzero" and sel.any():
        sel &= c >= 1e-10 * c[sel].max()
    sel &= c >= COEFF_FLOOR
    n = int(sel.sum())
    if n < 8:
        raise InsufficientDataError(f"only {n} usable coefficients in window [{lo}, {hi}] (mask {mask})")
    lk = np.log(k[sel].astype(float))
    lc = np.log(c[sel])
    slope, intercept = np.polyfit(lk, lc, 1)
    resid = lc - (slope * lk + intercept)
    ss_tot = np.sum((lc - lc.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(float(-slope), float(intercept), float(r2), (int(lo), int(hi)), mask, n)


def sobolev_threshold(fit: DecayFit) -> float:
    return fit.exponent - 0.5


def predicted_exponent(bc: BC, a: float, m: float) -> float:
    if math.isinf(m):
        return math.inf
    return 2 * m + (1 if BC.parse(bc) is BC.DIRICHLET else 2) + 2 * a


# --- compatibility index ---------------------------------------------------


def _symbolic_traces(spec: EllipticSpec, expr, alpha, beta, depth):
    a_expr, c_expr = spec.symbolic
    g = sp.sympify(expr)
    out = []
    for _ in range(depth + 1):
        if spec.bc is BC.DIRICHLET:
            tr = (g.subs(X, alpha), g.subs(X, beta))
        else:
            flux = a_expr * sp.diff(g, X)
            tr = (-flux.subs(X, alpha), flux.subs(X, beta))
        out.append(tuple(float(sp.N(t, 30)) for t in tr))
        g = sp.expand(-sp.diff(a_expr * sp.diff(g, X), X) + c_expr * g)
    return out


def _fd_weights(offsets, deriv):
    offsets = np.asarray(offsets, dtype=float)
    n = offsets.size
    v = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[deriv] = math.factorial(deriv)
    return np.linalg.solve(v, rhs)


def _fd_derivative(g, dx):
    # fourth-order: centered five-point stencil inside, one-sided five-point at the ends
    n = g.size
    d = np.empty(n)
    wc = _fd_weights([-2, -1, 0, 1, 2], 1)
    d[2:-2] = (wc[0] * g[:-4] + wc[1] * g[1:-3] + wc[2] * g[2:-2] + wc[3] * g[3:-1] + wc[4] * g[4:]) / dx
    for i in (0, 1):
        w = _fd_weights(np.arange(5) - i, 1)
        d[i] = w @ g[:5] / dx
        d[n - 1 - i] = -(w @ g[::-1][:5]) / dx
    return d


def _fd_traces(spec: EllipticSpec, f, alpha, beta, h_aux, depth):
    xs = np.linspace(alpha, beta, int(round((beta - alpha) / h_aux)) + 1)
    dx = xs[1] - xs[0]
    g = np.asarray(f(xs), dtype=float)
    av = spec.diffusion(xs)
    cv = spec.potential(xs)
    out = []
    for _ in range(depth + 1):
        if spec.bc is BC.DIRICHLET:
            out.append((g[0], g[-1]))
        else:
            flux = av * _fd_derivative(g, dx)
            out.append((-flux[0], flux[-1]))
        g = -_fd_derivative(av * _fd_derivative(g, dx), dx) + cv * g
    return out, dx


def first_violation_index(spec: EllipticSpec, dec: SpectralDecomposition, f, depth: int = MAX_PROBE_DEPTH) -> float:
    """Smallest m <= depth with a nonzero boundary trace of A^m f, else inf.

    Dirichlet traces are endpoint values, Neumann traces the outward conormal
    derivative. Analytic catalog entries are differentiated symbolically;
    other callables go through fourth-order differences on a grid 8x finer
    than the decomposition grid.
    """
    if depth > MAX_PROBE_DEPTH:
        raise InvalidArgumentError(f"probe depth is limited to {MAX_PROBE_DEPTH}")
    grid = dec.grid
    alpha, beta = grid.alpha, grid.beta
    if isinstance(f, RhsEntry) and f.eigen_index is not None:
        # A^l v_k = lambda_k^l v_k stays in the domain of every power
        return math.inf
    if not callable(f):
        raise InvalidArgumentError("f must be a catalog entry or a callable")
    xs = np.linspace(alpha, beta, 8 * grid.n_points + 1)
    try:
        fvals = np.asarray(f(xs), dtype=float)
    except Exception as exc:
        raise InvalidArgumentError(f"f is not evaluable on [{alpha}, {beta}]: {exc}") from exc
    if fvals.shape != xs.shape or not np.all(np.isfinite(fvals)):
        raise InvalidArgumentError("f is not evaluable on the closed interval")
    tol = 1e-6 * np.abs(fvals).max()

    if isinstance(f, RhsEntry) and f.expr is not None and spec.symbolic is not None:
        traces = _symbolic_traces(spec, f.expr, alpha, beta, depth)
        floors = [0.0] * (depth + 1)
    else:
        traces, dx = _fd_traces(spec, f, alpha, beta, grid.h / 8, depth)
        scale = np.abs(fvals).max()
        # roundoff amplification of m nested second differences
        floors = [1e3 * np.finfo(float).eps * scale * (2.0 / dx) ** (2 * m) for m in range(depth + 1)]
    for m, (left, right) in enumerate(traces):
        if floors[m] > tol:
            log.warning("finite-difference traces unreliable beyond depth %d; stopping the probe", m - 1)
            break
        if max(abs(left), abs(right)) > tol:
            return m
    return math.inf


# --- experiments -----------------------------------------------------------


def _auto_mask(c, k, window):
    lo, hi = window
    sel = (k >= lo) & (k <= hi)
    odd = np.abs(c[sel & (k % 2 == 1)])
    even = np.abs(c[sel & (k % 2 == 0)])
    if odd.size and even.size:
        # parity zeros sit at a roundoff floor of ~1e-13 relative, not at 0
        if even.max() < 1e-6 * odd.max():
            return "odd"
        if odd.max() < 1e-6 * even.max():
            return "even"
    return "all"


def default_window(n: int) -> tuple[int, int]:
    return 8, max(n // 8, 8)


def build_decomposition(bc, n: int, coef: str = "const:1", alpha: float = 0.0, beta: float = math.pi, method="auto"):
    spec = elliptic_spec(coef, bc)
    grid = build_uniform_grid(alpha, beta, n, spec.bc.layout)
    return spec, decompose(assemble_elliptic(spec, grid), method=method)


def prepare(dec: SpectralDecomposition, spec: EllipticSpec) -> SpectralDecomposition:
    """Augment the pure Neumann decomposition so that powers are defined."""
    if spec.bc is BC.NEUMANN and dec.eigenvalues[0] <= 1e-8 * abs(dec.eigenvalues[1]):
        return neumann_augment(dec)
    return dec


@dataclass
class CompatibilityReport:
    bc: str
    a: float
    rhs: str
    violation_index: float
    measured_beta: float
    predicted_beta: float
    measured_smax: float
    predicted_smax: float
    verdict: str
    tolerance: float
    r2: float = float("nan")
    mask: str = "all"
    window: tuple[int, int] = (0, 0)
    note: str = ""
    coefficients: dict = field(default_factory=dict, repr=False)

    def as_dict(self, with_coefficients=False):
        d = asdict(self)
        if not with_coefficients:
            d.pop("coefficients")
        return d


def compatibility_experiment(
    bc,
    a: float,
    f,
    n: int,
    *,
    coef: str = "const:1",
    alpha: float = 0.0,
    beta: float = math.pi,
    tol: float = 0.15,
    mask: str = "auto",
    window=None,
    dec: SpectralDecomposition | None = None,
    spec: EllipticSpec | None = None,
) -> CompatibilityReport:
    if not 0.05 <= a <= 0.95:
        raise InvalidArgumentError(f"a must lie in [0.05, 0.95] for compatibility experiments, got {a}")
    if n < 1024:
        raise InvalidArgumentError(f"compatibility experiments need N >= 1024, got {n}")
    bc = BC.parse(bc)
    entry = parse_rhs(f, alpha, beta) if isinstance(f, str) else f
    if spec is None:
        spec = elliptic_spec(coef, bc)
    if dec is None:
        _, dec = build_decomposition(bc, n, coef, alpha, beta)
    dec = prepare(dec, spec)

    fv = entry.sample(dec.grid, dec) if isinstance(entry, RhsEntry) else np.asarray(entry(dec.grid.x), float)
    u = solve_power(dec, a, fv)
    cf = forward_coefficients(dec, fv)
    cu = forward_coefficients(dec, u)
    # mode numbers: Dirichlet modes start at 1; the Neumann constant mode is 0
    kk = np.arange(1, dec.n + 1) if bc is BC.DIRICHLET else np.arange(dec.n)
    keep = kk >= 1
    window = tuple(window) if window is not None else default_window(dec.n)

    m = first_violation_index(spec, dec, entry)
    pred = predicted_exponent(bc, a, m)
    if mask == "auto":
        mask = _auto_mask(cu[keep], kk[keep], window)
    coeffs = {"k": kk.tolist(), "lambda_k": dec.eigenvalues.tolist(), "c_f": cf.tolist(), "c_u": cu.tolist()}
    name = entry.name if isinstance(entry, RhsEntry) else str(f)

    if math.isinf(m):
        # no violated layer up to the probe depth: the tail must either sit at
        # roundoff level or decay faster than the deepest probed threshold
        floor = predicted_exponent(bc, a, MAX_PROBE_DEPTH + 1)
        lo, hi = window
        inwin = keep & (kk >= lo) & (kk <= hi)
        tail = float(np.abs(cu[inwin]).max() / np.abs(cu).max()) if inwin.any() else 0.0
        if tail < 1e-10:
            return CompatibilityReport(bc.name.lower(), a, name, m, math.inf, math.inf, math.inf, math.inf,
                                       "pass", tol, mask=mask, window=window,
                                       note=f"super-polynomial decay (window tail {tail:.1e} of max)",
                                       coefficients=coeffs)
        fit = fit_power_decay(cu[keep], mask, window, k=kk[keep])
        verdict = "pass" if fit.exponent >= floor - tol else "fail"
        note = f"no violated layer up to depth {MAX_PROBE_DEPTH}; required beta >= {floor:.3f}"
    else:
        fit = fit_power_decay(cu[keep], mask, window, k=kk[keep])
        verdict = "pass" if abs(fit.exponent - pred) <= tol else "fail"
        note = ""
    beta_m = fit.exponent
    return CompatibilityReport(
        bc.name.lower(), a, name, m, beta_m, pred, beta_m - 0.5, pred - 0.5, verdict, tol,
        r2=fit.r2, mask=mask, window=fit.window, note=note, coefficients=coeffs,
    )


@dataclass(frozen=True)
class BoundaryFit:
    exponent: float
    window: tuple[float, float]
    side: str
    r2: float
    defined: bool = True
    trace_ratio: float = float("nan")  # |u(x_1)| / max|u|
    note: str = ""


def fit_boundary_exponent(
    dec: SpectralDecomposition,
    a: float,
    f,
    k_modes: int | None = None,
    *,
    side: str = "left",
    window=None,
    n_samples: int = 40,
) -> BoundaryFit:
    """Fit u(d) ~ d^theta near one endpoint, u synthesized from the first
    ``k_modes`` spectral modes (default N/4) and evaluated at geometrically
    spaced distances d in [10h, L/64] by linear interpolation with u = 0 on the
    boundary.
    """
    if dec.bc is not BC.DIRICHLET:
        raise InvalidArgumentError("boundary-exponent fits are defined for Dirichlet conditions")
    n = dec.n
    k_modes = n // 4 if k_modes is None else int(k_modes)
    if not 1 <= k_modes <= n // 4:
        raise InvalidArgumentError(f"k_modes must lie in [1, N/4 = {n // 4}]")
    grid = dec.grid
    if isinstance(f, str):
        f = parse_rhs(f, grid.alpha, grid.beta)
    fv = f.sample(grid, dec) if isinstance(f, RhsEntry) else np.asarray(f, dtype=float)
    if fv.shape != (n,):
        fv = np.asarray(f(grid.x), dtype=float)
    c = forward_coefficients(dec, fv)[:k_modes] * dec.eigenvalues[:k_modes] ** (-a)
    u = dec.eigenvectors[:, :k_modes] @ c

    lo, hi = window if window is not None else (10 * grid.h, grid.length / 64)
    if not lo < hi:
        raise InvalidArgumentError(f"empty boundary window [{lo:.3g}, {hi:.3g}] (grid too coarse)")
    d = np.geomspace(lo, hi, n_samples)
    dist = np.concatenate(([0.0], grid.x - grid.alpha))
    vals = np.concatenate(([0.0], u))
    if side == "right":
        dist = np.concatenate(([0.0], (grid.beta - grid.x)[::-1]))
        vals = np.concatenate(([0.0], u[::-1]))
    elif side != "left":
        raise InvalidArgumentError(f"side must be 'left' or 'right', got {side!r}")
    ud = np.interp(d, dist, vals)
    trace_ratio = float(abs(vals[1]) / np.abs(u).max())
    if not (np.all(ud > 0) or np.all(ud < 0)):
        return BoundaryFit(float("nan"), (lo, hi), side, float("nan"), defined=False,
                           trace_ratio=trace_ratio, note="u changes sign in the fit window")
    ld, lu = np.log(d), np.log(np.abs(ud))
    slope, icpt = np.polyfit(ld, lu, 1)
    resid = lu - (slope * ld + icpt)
    r2 = 1.0 - np.sum(resid**2) / np.sum((lu - lu.mean()) ** 2)
    return BoundaryFit(float(slope), (float(lo), float(hi)), side, float(r2), trace_ratio=trace_ratio)


def predicted_boundary_exponent(a: float) -> float:
    """Leading exponent of u = A^{-a} f near the wall for f with nonzero trace."""
    return 2 * a if a < 0.5 else 1.0


def compare_first_eigenvalues(a: float, n: int, *, alpha: float = 0.0, beta: float = math.pi, dense_solver="jacobi"):
    """Smallest eigenvalue of the spectral power (A_Dir)^a and of the restricted
    fractional Laplacian on the same node-centered grid."""
    if n > 2048:
        raise InvalidArgumentError(f"dense eigensolve limited to N <= 2048, got {n}")
    spec = elliptic_spec("const:1", "dirichlet")
    grid = build_uniform_grid(alpha, beta, n, "node")
    op = assemble_elliptic(spec, grid)
    spectral = float(decompose(op).eigenvalues[0]) ** a
    k = assemble_restricted(grid, KernelSpec(a)).matrix
    if dense_solver == "jacobi":
        restricted = float(jacobi_eigenvalues(k)[0])
    elif dense_solver == "lapack":
        restricted = float(np.linalg.eigvalsh(k)[0])
    else:
        raise InvalidArgumentError(f"unknown dense solver {dense_solver!r}")
    return {"spectral": spectral, "restricted": restricted, "gap": spectral - restricted}
