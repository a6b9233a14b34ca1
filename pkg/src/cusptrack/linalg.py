"""Dense complex matrix helpers and the small-matrix eigensolver.

Matrices are plain numpy arrays of complex128, row-major. This module is the
initial condition and the pointwise oracle for the path integration: it must
be deterministic, including the eigenvector gauge (unit norm, first
significant component rotated to the positive real axis).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrumError, NoConvergenceError, SingularMatrixError

_EPS = float(np.finfo(np.float64).eps)

DEFAULT_MAX_EIG_SIZE = 8


def as_matrix(entries, rows=None, cols=None) -> np.ndarray:
    """Coerce to a validated complex matrix (finite entries, sane shape)."""
    a = np.array(entries, dtype=np.complex128)
    if rows is not None:
        a = a.reshape(rows, cols)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(np.float64))):
        raise ValueError("matrix entries must be finite")
    return a


def frobenius(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


def invert(a: np.ndarray, cond_max: float = 1e14) -> np.ndarray:
    """Inverse of a square matrix, rejecting singular-to-tolerance inputs."""
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"cannot invert non-square matrix of shape {a.shape}")
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[-1] == 0.0 or sv[0] / sv[-1] > cond_max:
        cond = np.inf if sv[-1] == 0.0 else float(sv[0] / sv[-1])
        raise SingularMatrixError(
            f"singular matrix (condition estimate {cond:.3e})", cond_estimate=cond
        )
    return np.linalg.inv(a)


def first_significant_index(v: np.ndarray, rel_tol: float = 1e-12) -> int:
    """Index of the first component that is not negligible relative to the max."""
    mags = np.abs(v)
    peak = mags.max()
    if peak == 0.0:
        raise ValueError("zero vector has no significant component")
    return int(np.argmax(mags > rel_tol * peak))


def normalize_eigenvector(v: np.ndarray) -> np.ndarray:
    """Unit 2-norm with the first significant component rotated real positive.

    This fixes a deterministic gauge before the flow's own gauge takes over;
    the result depends only on the direction of v.
    """
    k = first_significant_index(v)
    phase = v[k] / abs(v[k])
    return v / (np.linalg.norm(v) * phase)


@dataclass(frozen=True)
class EigenDecomposition:
    """Simple-spectrum eigendecomposition A = V diag(values) V^-1."""

    values: np.ndarray  # (n,) complex
    vectors: np.ndarray  # (n, n) complex, column j belongs to values[j]
    residual: float  # achieved ||A V - V diag||_F

    @property
    def n(self) -> int:
        return len(self.values)


def min_gap(values: np.ndarray) -> float:
    vals = np.asarray(values)
    n = len(vals)
    if n < 2:
        return np.inf
    diffs = np.abs(vals[:, None] - vals[None, :])
    return float(diffs[~np.eye(n, dtype=bool)].min())


def _eig2_closed_form(a: np.ndarray):
    """Trace/determinant closed form; eigenvalue order follows the principal
    square root of the discriminant so downstream branch tracking lines up."""
    mean = 0.5 * (a[0, 0] + a[1, 1])
    atil = 0.5 * (a[0, 0] - a[1, 1])
    b, c = a[0, 1], a[1, 0]
    disc4 = atil * atil + b * c  # Delta/4 with Delta = (tr)^2 - 4 det
    sq = np.sqrt(disc4)
    values = np.array([mean + sq, mean - sq])
    vectors = np.empty((2, 2), dtype=np.complex128)
    for j, mu in enumerate((sq, -sq)):
        cand_col = np.array([atil + mu, c])  # from the second row
        cand_row = np.array([b, mu - atil])  # from the first row
        v = cand_col if np.linalg.norm(cand_col) >= np.linalg.norm(cand_row) else cand_row
        vectors[:, j] = normalize_eigenvector(v)
    return values, vectors


def _inverse_iteration(a: np.ndarray, shift: complex, scale: float, v0: np.ndarray):
    n = a.shape[0]
    b = a - shift * np.eye(n)
    v = v0.copy()
    for _ in range(5):
        try:
            v = np.linalg.solve(b, v)
        except np.linalg.LinAlgError:
            # exactly singular shift: nudge and retry
            b = a - (shift + 1e-12 * max(scale, 1.0)) * np.eye(n)
            v = np.linalg.solve(b, v)
        v /= np.linalg.norm(v)
    return v


def eig_small(
    a: np.ndarray,
    tol: float = 1e-9,
    gap_tol: float | None = None,
    max_n: int = DEFAULT_MAX_EIG_SIZE,
) -> EigenDecomposition:
    """Eigendecomposition of a small square matrix with simple spectrum.

    n = 2 uses the closed form; larger sizes take eigenvalues from the dense
    QR iteration and recompute eigenvectors by shifted inverse iteration so
    the residual is under direct control.
    """
    a = as_matrix(a)
    n = a.shape[0]
    if a.shape[0] != a.shape[1]:
        raise ValueError("eig_small requires a square matrix")
    if n > max_n:
        raise ValueError(f"matrix size {n} exceeds configured maximum {max_n}")
    scale = frobenius(a)
    if gap_tol is None:
        gap_tol = 1e-10 * max(scale, 1.0)

    if n == 1:
        return EigenDecomposition(values=a[0].copy(), vectors=np.ones((1, 1), dtype=np.complex128), residual=0.0)

    if n == 2:
        values, vectors = _eig2_closed_form(a)
    else:
        values = np.linalg.eigvals(a)
        order = np.lexsort((values.imag, values.real))
        values = values[order]
        vectors = np.empty((n, n), dtype=np.complex128)
        gaps = np.abs(values[:, None] - values[None, :])
        for j in range(n):
            others = np.delete(gaps[j], j)
            shift = values[j] + 1e-8 * (others.min() if others.size else 1.0)
            v0 = np.ones(n, dtype=np.complex128) / np.sqrt(n)
            v = _inverse_iteration(a, shift, scale, v0)
            vectors[:, j] = normalize_eigenvector(v)

    gap = min_gap(values)
    if gap < gap_tol:
        raise DegenerateSpectrumError(
            f"degenerate spectrum: min eigenvalue gap {gap:.3e} < {gap_tol:.3e}"
        )
    residual = frobenius(a @ vectors - vectors * values[None, :])
    if not residual <= tol * max(scale, 1.0):
        raise NoConvergenceError(
            f"no convergence: eigendecomposition residual {residual:.3e} exceeds {tol:.1e}"
        )
    sv = np.linalg.svd(vectors, compute_uv=False)
    if sv[-1] < 1e-10:
        raise DegenerateSpectrumError(
            f"eigenvector matrix nearly singular (sigma_min {sv[-1]:.3e})"
        )
    return EigenDecomposition(values=values, vectors=vectors, residual=residual)
