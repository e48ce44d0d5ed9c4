"""Eigendecomposition of discrete elliptic operators and the spectral calculus
(A_B)^z f = sum_k lambda_k^z <f, v_k>_h v_k, including the mean-projector
augmentation that makes the pure Neumann operator invertible.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import CacheError, DomainError, InvalidArgumentError, InvalidStateError
from .grid_ops import BC, DiscreteOperator, Grid, Layout
from .linalg import fnv1a64, tridiagonal_eigh

#: Above this size the O(N^3) eigenvector accumulation of the QL sweep is too
#: slow in-process and LAPACK's MRRR driver is used instead.
QL_MAX_N = 1024

#: Solve paths refuse exponents below this value.
MIN_SOLVE_EXPONENT = 0.01

CACHE_MAGIC = b"FRLB1"


class Augmentation(enum.Enum):
    NONE = "none"
    MEAN_PROJECTOR = "mean-projector"


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, orthonormal in <.,.>_h
    grid: Grid
    bc: BC
    augmentation: Augmentation = Augmentation.NONE
    method: str = "ql"

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    @property
    def h(self) -> float:
        return self.grid.h


def _normalize_signs(v):
    # first component that is not negligible is made positive
    tol = 1e-8 * np.abs(v).max(axis=0)
    first = np.argmax(np.abs(v) > tol, axis=0)
    signs = np.sign(v[first, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def decompose(op: DiscreteOperator, method: str = "auto") -> SpectralDecomposition:
    """Complete eigensystem of ``op``.

    ``method`` is ``"ql"`` (implicit-shift QL, iteration cap 50 per
    eigenvalue), ``"lapack"`` (MRRR via scipy) or ``"auto"``, which uses QL up
    to ``QL_MAX_N`` unknowns.
    """
    if method == "auto":
        method = "ql" if op.n <= QL_MAX_N else "lapack"
    if method == "ql":
        w, v = tridiagonal_eigh(op.diag, op.offdiag, maxit=50)
    elif method == "lapack":
        from scipy.linalg import eigh_tridiagonal

        w, v = eigh_tridiagonal(op.diag, op.offdiag)
    else:
        raise InvalidArgumentError(f"unknown eigensolver {method!r}")
    v = np.ascontiguousarray(_normalize_signs(v / np.sqrt(op.h)))
    w.setflags(write=False)
    v.setflags(write=False)
    return SpectralDecomposition(w, v, op.grid, op.spec.bc, Augmentation.NONE, method)


def forward_coefficients(dec: SpectralDecomposition, f) -> np.ndarray:
    """Coefficients c_k = <f, v_k>_h."""
    f = np.asarray(f)
    if f.shape[0] != dec.n:
        raise InvalidArgumentError(f"vector length {f.shape[0]} does not match decomposition size {dec.n}")
    return dec.h * (dec.eigenvectors.T @ f)


def synthesize(dec: SpectralDecomposition, coeffs) -> np.ndarray:
    return dec.eigenvectors @ coeffs


def _check_positive(dec):
    if dec.eigenvalues[0] <= 0:
        hint = " (use neumann_augment for the pure Neumann operator)" if dec.bc is BC.NEUMANN else ""
        raise DomainError(f"nonpositive eigenvalue {dec.eigenvalues[0]:.3e}: power undefined{hint}")


def apply_power(dec: SpectralDecomposition, z, f) -> np.ndarray:
    """(A_B)^z f on the principal branch. Real z with real f gives a real result."""
    _check_positive(dec)
    c = forward_coefficients(dec, f)
    lam = dec.eigenvalues
    if np.iscomplexobj(z) or np.iscomplexobj(c):
        z = complex(z)
        scale = np.exp(z * np.log(lam))
    else:
        scale = lam ** float(z)
    if c.ndim > 1:
        scale = scale[:, None]
    return synthesize(dec, scale * c)


def solve_power(dec: SpectralDecomposition, a: float, f) -> np.ndarray:
    """Solve (A_B)^a u = f."""
    if not MIN_SOLVE_EXPONENT <= a <= 1:
        raise InvalidArgumentError(f"solve exponent must lie in [{MIN_SOLVE_EXPONENT}, 1], got {a}")
    return apply_power(dec, -a, f)


def neumann_augment(dec: SpectralDecomposition) -> SpectralDecomposition:
    """Decomposition of A + E0, E0 the L2-orthogonal projector onto constants.

    The discrete constants are the kernel of the zero-flux operator, so adding
    E0 just lifts that eigenvalue to 1.
    """
    if dec.augmentation is not Augmentation.NONE:
        raise InvalidStateError("decomposition is already augmented")
    lam = dec.eigenvalues
    if lam.size < 2 or abs(lam[0]) > 1e-8 * abs(lam[1]):
        raise InvalidStateError(
            f"no numerically-zero eigenvalue to replace (lambda_1={lam[0]:.3e}, lambda_2={lam[1]:.3e})"
        )
    v = np.array(dec.eigenvectors)
    # the exact kernel vector is the normalized constant; replacing it removes
    # the O(eps) contamination of the computed one
    v[:, 0] = 1.0 / np.sqrt(dec.grid.length)
    # the computed null vector may deviate from the constant by more than
    # roundoff; remove the constant from the other modes and renormalize
    h = dec.grid.h
    v[:, 1:] -= np.outer(v[:, 0], h * (v[:, 0] @ v[:, 1:]))
    v[:, 1:] /= np.sqrt(h * np.einsum("ij,ij->j", v[:, 1:], v[:, 1:]))
    w = np.array(lam)
    w[0] = 1.0
    w.setflags(write=False)
    v.setflags(write=False)
    return replace(dec, eigenvalues=w, eigenvectors=v, augmentation=Augmentation.MEAN_PROJECTOR)


def mean_projector(grid: Grid, f) -> np.ndarray:
    """E0 f = (1/|Omega|) * h * sum(f), as a constant vector."""
    f = np.asarray(f)
    return np.full(f.shape, grid.h * f.sum(axis=0) / grid.length)


# --- decomposition cache ---------------------------------------------------

_HEADER = struct.Struct("<IBBdd")


def save_decomposition(dec: SpectralDecomposition, path) -> None:
    """Write ``dec`` in the FRLB1 binary cache format.

    Layout after the 5-byte magic (little-endian): u32 N, u8 layout, u8 bc,
    f64 alpha, f64 beta, f64[N] eigenvalues, f64[N*N] eigenvectors in
    column-major order, then the u64 FNV-1a hash of everything between the
    magic and the hash.
    """
    if dec.augmentation is not Augmentation.NONE:
        raise InvalidStateError("only unaugmented decompositions are cached")
    g = dec.grid
    payload = b"".join(
        [
            _HEADER.pack(dec.n, int(g.layout), int(dec.bc), g.alpha, g.beta),
            np.ascontiguousarray(dec.eigenvalues, dtype="<f8").tobytes(),
            np.asfortranarray(dec.eigenvectors, dtype="<f8").tobytes(order="F"),
        ]
    )
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(payload)
        fh.write(struct.pack("<Q", fnv1a64(payload)))
    tmp.replace(path)


def load_decomposition(path, method: str = "cache") -> SpectralDecomposition:
    data = Path(path).read_bytes()
    if not data.startswith(CACHE_MAGIC):
        raise CacheError(f"{path}: bad magic")
    payload = data[len(CACHE_MAGIC):-8]
    if len(data) < len(CACHE_MAGIC) + _HEADER.size + 8:
        raise CacheError(f"{path}: truncated")
    (stored,) = struct.unpack("<Q", data[-8:])
    if fnv1a64(payload) != stored:
        raise CacheError(f"{path}: checksum mismatch")
    n, layout, bc, alpha, beta = _HEADER.unpack_from(payload)
    off = _HEADER.size
    if len(payload) != off + 8 * (n + n * n):
        raise CacheError(f"{path}: payload size does not match N={n}")
    w = np.frombuffer(payload, dtype="<f8", count=n, offset=off).astype(np.float64)
    v = np.frombuffer(payload, dtype="<f8", count=n * n, offset=off + 8 * n)
    v = np.ascontiguousarray(v.reshape((n, n), order="F"), dtype=np.float64)
    grid = Grid(alpha, beta, n, Layout(layout))
    w.setflags(write=False)
    v.setflags(write=False)
    return SpectralDecomposition(w, v, grid, BC(bc), Augmentation.NONE, method)
