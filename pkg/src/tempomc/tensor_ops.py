"""Dense complex tensor algebra.

Tensors are plain ``numpy.ndarray`` objects in row-major order with
``complex128`` entries.  Contractions are explicit permute-then-reshape
matrix products; paired index extents must match exactly (no broadcasting).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

__all__ = [
    "ShapeMismatchError",
    "DecompositionError",
    "SvdResult",
    "EigResult",
    "contract",
    "svd_truncated",
    "eig_general",
]


class ShapeMismatchError(ValueError):
    """Raised when paired tensor indices have unequal extents."""


class DecompositionError(RuntimeError):
    """Raised when a matrix factorization fails; carries the matrix shape."""

    def __init__(self, message: str, shape: Tuple[int, ...]):
        super().__init__(f"{message} (shape {shape})")
        self.shape = shape


def _as_complex(a) -> np.ndarray:
    a = np.asarray(a)
    if a.dtype != np.complex128:
        a = a.astype(np.complex128)
    return a


def contract(a, b, pairs: Sequence[Tuple[int, int]]) -> np.ndarray:
    """Contract tensors ``a`` and ``b`` over the given ``(axis_a, axis_b)`` pairs.

    Result indices are a's unpaired axes (in order) followed by b's unpaired
    axes (in order).
    """
    a = _as_complex(a)
    b = _as_complex(b)
    ax_a = [p[0] for p in pairs]
    ax_b = [p[1] for p in pairs]
    for i, (pa, pb) in enumerate(zip(ax_a, ax_b)):
        if not (-a.ndim <= pa < a.ndim) or not (-b.ndim <= pb < b.ndim):
            raise IndexError(f"contraction pair {i} out of range for shapes "
                             f"{a.shape}, {b.shape}")
    ax_a = [p % a.ndim for p in ax_a]
    ax_b = [p % b.ndim for p in ax_b]
    if len(set(ax_a)) != len(ax_a) or len(set(ax_b)) != len(ax_b):
        raise IndexError("repeated axis in contraction pairs")
    for pa, pb in zip(ax_a, ax_b):
        if a.shape[pa] != b.shape[pb]:
            raise ShapeMismatchError(
                f"paired extents differ: axis {pa} of {a.shape} vs axis {pb} of {b.shape}")
    free_a = [i for i in range(a.ndim) if i not in ax_a]
    free_b = [i for i in range(b.ndim) if i not in ax_b]
    da = int(np.prod([a.shape[i] for i in free_a], dtype=np.int64)) if free_a else 1
    db = int(np.prod([b.shape[i] for i in free_b], dtype=np.int64)) if free_b else 1
    dk = int(np.prod([a.shape[i] for i in ax_a], dtype=np.int64)) if ax_a else 1
    am = a.transpose(free_a + ax_a).reshape(da, dk)
    bm = b.transpose(ax_b + free_b).reshape(dk, db)
    out = am @ bm
    return out.reshape([a.shape[i] for i in free_a] + [b.shape[i] for i in free_b])


@dataclass
class SvdResult:
    """Truncated singular value decomposition ``m ~= U @ diag(s) @ v_dagger``."""

    u: np.ndarray
    singular_values: np.ndarray
    v_dagger: np.ndarray
    discarded_weight: float


def svd_truncated(m, max_rank: int, cutoff: float = 0.0) -> SvdResult:
    """SVD of a matrix, keeping at most ``max_rank`` singular values.

    ``cutoff`` is a relative squared-weight threshold: singular values whose
    squared weight relative to the total falls at or below it are dropped.
    ``discarded_weight`` reports the total relative squared weight removed.
    """
    m = _as_complex(m)
    if m.ndim != 2:
        raise ShapeMismatchError(f"expected a matrix, got shape {m.shape}")
    if max_rank < 1:
        raise ValueError("max_rank must be >= 1")
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise DecompositionError(f"SVD failed: {exc}", m.shape) from exc
    w = s.astype(float) ** 2
    total = float(w.sum())
    if total == 0.0:
        keep = 1
    else:
        significant = int(np.sum(w > cutoff * total))
        keep = max(1, min(max_rank, significant if cutoff > 0 else len(s)))
        keep = min(keep, max_rank)
    discarded = float(w[keep:].sum() / total) if total > 0 else 0.0
    return SvdResult(u[:, :keep].copy(), s[:keep].copy(), vh[:keep].copy(), discarded)


@dataclass
class EigResult:
    """General (non-Hermitian) eigendecomposition with biorthogonal vectors.

    ``right_vectors`` holds right eigenvectors as columns V, ``left_vectors``
    holds left eigenvectors as columns W with ``W^dag V = 1`` exactly by
    construction (W^dag is the inverse of V).  ``biorth_condition`` is the
    2-norm condition number of V; large values flag a near-defective matrix.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    biorth_condition: float


def _magnitude_order(lam: np.ndarray) -> np.ndarray:
    # descending |lam|; ties broken by descending real then imaginary part
    return np.lexsort((-lam.imag, -lam.real, -np.abs(lam)))


def eig_general(m) -> EigResult:
    """Eigendecomposition of a general square matrix, magnitude-sorted."""
    m = _as_complex(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeMismatchError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    try:
        lam, v = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"eigendecomposition did not converge: {exc}",
                                 m.shape) from exc
    order = _magnitude_order(lam)
    lam = lam[order]
    v = v[:, order]
    sv = np.linalg.svd(v, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if np.isfinite(cond):
        w_dag = np.linalg.inv(v)
    else:  # defective: fall back to pseudo-inverse, flagged via the condition
        w_dag = np.linalg.pinv(v)
    return EigResult(lam, v, w_dag.conj().T, cond)
