"""Compiled kernels: implicit QL for symmetric tridiagonals, cyclic Jacobi for
dense symmetric matrices, tridiagonal solves and the FNV-1a checksum."""

from __future__ import annotations

import math

import numba
import numpy as np

from .errors import InvalidArgumentError, NumericalError

_EPS = np.finfo(np.float64).eps


@numba.njit(cache=True)
def _tql2(d, e, zt, maxit):
    # Rows of zt are the eigenvectors, so every plane rotation touches two
    # contiguous rows. Returns 0, or -(l + 1) if eigenvalue l fails to converge.
    n = d.size
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > maxit:
                return -(l + 1)
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                for k in range(n):
                    f = zt[i + 1, k]
                    zt[i + 1, k] = s * zt[i, k] + c * f
                    zt[i, k] = c * zt[i, k] - s * f
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return 0


def tridiagonal_eigh(diag, offdiag, maxit=50):
    """Full eigensystem of a symmetric tridiagonal matrix by implicit-shift QL.

    Returns ``(w, V)`` with ``w`` ascending and the columns of ``V``
    orthonormal in the Euclidean inner product.
    """
    d = np.array(diag, dtype=np.float64)
    n = d.size
    e = np.zeros(n, dtype=np.float64)
    e[: n - 1] = offdiag
    zt = np.eye(n)
    info = _tql2(d, e, zt, maxit)
    if info != 0:
        raise NumericalError(
            f"implicit QL did not converge for eigenvalue {-info - 1} "
            f"within {maxit} iterations"
        )
    order = np.argsort(d, kind="stable")
    return d[order], np.ascontiguousarray(zt[order].T)


@numba.njit(cache=True)
def _jacobi_sweeps(a, tol, max_sweeps):
    # Round-robin ordering: each round holds n/2 disjoint pairs, so all its
    # rotations commute and can be applied as one row pass plus one column
    # pass that walks the matrix row by row (no strided column writes).
    n = a.shape[0]
    m = n + (n % 2)
    half = m // 2
    order = np.arange(m)
    P = np.empty(half, np.int64)
    Q = np.empty(half, np.int64)
    C = np.empty(half)
    S = np.empty(half)
    for sweep in range(max_sweeps):
        off = 0.0
        diag = 0.0
        for p in range(n):
            diag += a[p, p] * a[p, p]
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        if off <= tol * tol * diag:
            return sweep
        for r in range(m - 1):
            k = 0
            for i in range(half):
                p = order[i]
                q = order[m - 1 - i]
                if p >= n or q >= n:
                    continue
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                if abs(apq) < 1e-3 * _EPS * math.sqrt(abs(app * aqq)):
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                theta = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                P[k] = p
                Q[k] = q
                C[k] = c
                S[k] = t * c
                k += 1
            # rows p, q of every pair
            for i in range(k):
                p, q, c, s = P[i], Q[i], C[i], S[i]
                for j in range(n):
                    ap = a[p, j]
                    aq = a[q, j]
                    a[p, j] = c * ap - s * aq
                    a[q, j] = s * ap + c * aq
            # columns p, q of every pair, row by row
            for j in range(n):
                for i in range(k):
                    p, q, c, s = P[i], Q[i], C[i], S[i]
                    ap = a[j, p]
                    aq = a[j, q]
                    a[j, p] = c * ap - s * aq
                    a[j, q] = s * ap + c * aq
            for i in range(k):
                p, q = P[i], Q[i]
                a[p, q] = 0.0
                a[q, p] = 0.0
            # round-robin: fix order[0], rotate the rest
            last = order[m - 1]
            for i in range(m - 1, 1, -1):
                order[i] = order[i - 1]
            order[1] = last
    return -1


def jacobi_eigenvalues(matrix, tol=1e-14, max_sweeps=30):
    """Eigenvalues (ascending) of a dense symmetric matrix by Jacobi rotations
    in round-robin (parallel) order."""
    a = np.array(matrix, dtype=np.float64, order="C")
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidArgumentError("matrix must be square")
    if not np.allclose(a, a.T, rtol=1e-12, atol=1e-14 * max(np.abs(a).max(), 1.0)):
        raise InvalidArgumentError("matrix must be symmetric")
    sweeps = _jacobi_sweeps(a, tol, max_sweeps)
    if sweeps < 0:
        raise NumericalError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    return np.sort(np.diag(a).copy())


@numba.njit(cache=True)
def _thomas(sub, diag, sup, rhs):
    n = diag.size
    cp = np.empty(n)
    x = np.empty(n)
    piv = diag[0]
    if piv == 0.0:
        return x, False
    cp[0] = sup[0] / piv if n > 1 else 0.0
    x[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - sub[i - 1] * cp[i - 1]
        if piv == 0.0 or not math.isfinite(piv):
            return x, False
        if i < n - 1:
            cp[i] = sup[i] / piv
        x[i] = (rhs[i] - sub[i - 1] * x[i - 1]) / piv
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return x, True


def solve_tridiagonal(diag, offdiag, rhs):
    """Solve a symmetric tridiagonal system without pivoting."""
    diag = np.asarray(diag, dtype=np.float64)
    offdiag = np.asarray(offdiag, dtype=np.float64)
    x, ok = _thomas(offdiag, diag, offdiag, np.asarray(rhs, dtype=np.float64))
    if not ok:
        raise NumericalError("zero pivot in tridiagonal solve")
    return x


@numba.njit(cache=True)
def _fnv1a(data):
    h = np.uint64(0xCBF29CE484222325)
    prime = np.uint64(0x100000001B3)
    for b in data:
        h = (h ^ np.uint64(b)) * prime
    return h


def fnv1a64(payload: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    return int(_fnv1a(np.frombuffer(payload, dtype=np.uint8)))
