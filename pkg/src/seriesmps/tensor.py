"""Dense real tensor contraction and the matrix factorizations used everywhere else.

Tensors are plain ``numpy`` float64 arrays in row-major (C) order.  Index
reordering is done by explicit transpose-copy; all functions here are pure and
never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericError, ShapeError


@dataclass(frozen=True)
class TruncationReport:
    """Outcome of a truncated SVD.

    Attributes
    ----------
    kept : int
        Number of retained singular values.
    discarded_weight : float
        Sum of squared dropped singular values.
    spectrum : np.ndarray
        Retained singular values, non-increasing.
    """

    kept: int
    discarded_weight: float
    spectrum: np.ndarray


def contract(a: np.ndarray, b: np.ndarray, axes) -> np.ndarray:
    """Contract ``a`` with ``b`` over a list of ``(axis_a, axis_b)`` pairs.

    The result carries the unpaired axes of ``a`` followed by those of ``b``.
    An empty ``axes`` list yields the outer product.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    pairs = list(axes)
    ax_a = [p[0] for p in pairs]
    ax_b = [p[1] for p in pairs]
    for ia, ib in pairs:
        if a.shape[ia] != b.shape[ib]:
            raise ShapeError(
                f"contracted extents differ: a axis {ia} has {a.shape[ia]}, "
                f"b axis {ib} has {b.shape[ib]}"
            )
    return np.tensordot(a, b, axes=(ax_a, ax_b))


def svd_truncate(
    m: np.ndarray, chi_max: int, cutoff: float = 1e-12
) -> tuple[np.ndarray, np.ndarray, np.ndarray, TruncationReport]:
    """Truncated SVD ``m ~ U @ diag(S) @ V.T``.

    Keeps at most ``chi_max`` singular values, dropping in addition any with
    relative squared weight ``sigma^2 / sum(sigma^2) <= cutoff``.  At least one
    value is always kept so downstream bond extents stay positive.

    Returns ``(U, S, V, report)`` where ``U`` and ``V`` have orthonormal
    columns and ``report.discarded_weight`` is the squared reconstruction
    error of the truncation.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"svd_truncate expects a matrix, got rank {m.ndim}")
    if chi_max < 1:
        raise ValueError("chi_max must be >= 1")
    if not np.all(np.isfinite(m)):
        raise NumericError("svd_truncate: non-finite entries")
    total = float(np.sum(m * m))
    small = min(m.shape)
    if chi_max < small // 2 and small >= 128:
        u, s, vt = _projected_svd(m, int(chi_max))
    else:
        u, s, vt = _dense_svd(m)
    if total > 0.0:
        kept = int(np.count_nonzero(s**2 > cutoff * total))
    else:
        kept = 0
    kept = max(1, min(kept, int(chi_max), s.size))
    discarded = max(total - float(np.sum(s[:kept] ** 2)), 0.0)
    report = TruncationReport(kept=kept, discarded_weight=discarded, spectrum=s[:kept].copy())
    return u[:, :kept], s[:kept], vt[:kept].T, report


def _dense_svd(m: np.ndarray):
    try:
        return scipy.linalg.svd(m, full_matrices=False, check_finite=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(m, full_matrices=False, check_finite=False, lapack_driver="gesvd")


def _projected_svd(m: np.ndarray, k: int):
    """Top-``k`` singular triples via the dominant eigenspace of the Gram matrix.

    The eigenbasis only selects a k-dimensional row subspace; the returned
    factors come from an exact dense SVD of ``m`` restricted to it, so U and V
    are orthonormal to machine precision and ``|m - U S V^T|^2`` equals the
    total weight minus ``sum(S^2)`` exactly.
    """
    if m.shape[0] < m.shape[1]:
        u, s, vt = _projected_svd(m.T, k)
        return vt.T, s, u.T
    gram = m.T @ m
    n = gram.shape[0]
    _, vecs = scipy.linalg.eigh(gram, check_finite=False, subset_by_index=[n - k, n - 1])
    w = m @ vecs  # (rows, k): m restricted to the dominant row subspace
    u, s, pt = _dense_svd(w)
    return u, s, pt @ vecs.T


def qr_orthogonalize(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization ``m = Q @ R`` with ``Q.T @ Q = I``."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"qr_orthogonalize expects a matrix, got rank {m.ndim}")
    if not np.all(np.isfinite(m)):
        raise NumericError("qr_orthogonalize: non-finite entries")
    q, r = scipy.linalg.qr(m, mode="economic", check_finite=False)
    return q, r
