"""Small dense linear-algebra kernels.

All kernels broadcast over leading axes, so a stack of ``B`` independent
``p x p`` matrices (one per Monte-Carlo replication) is updated with the same
call as a single matrix.
"""

from __future__ import annotations

import numpy as np

from .errors import DecompositionError, DimensionError, NumericalInputError


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return ``(a + a^T) / 2`` over the last two axes."""
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _rank_one_inverse_update(a_inv: np.ndarray, u: np.ndarray, c) -> np.ndarray:
    # No validation; c may be 0 (exact no-op) to mask samples in a batch.
    au = (a_inv @ u[..., None])[..., 0]
    denom = 1.0 + c * np.einsum("...i,...i->...", u, au)
    coef = np.asarray(c / denom)[..., None, None]
    out = a_inv - coef * (au[..., :, None] * au[..., None, :])
    return symmetrize(out)


def rank_one_inverse_update(a_inv: np.ndarray, u: np.ndarray, c: float) -> np.ndarray:
    """Inverse of ``A + c u u^T`` given ``A^{-1}`` (Sherman-Morrison).

    ``A^{-1}`` must be symmetric positive definite and ``c > 0``; then
    ``(A + c u u^T)^{-1} = A^{-1} - c / (1 + c u^T A^{-1} u) A^{-1} u u^T A^{-1}``.
    The result is re-symmetrized to stop round-off drift over long streams.

    Args:
        a_inv: array of shape ``(..., p, p)``.
        u: array of shape ``(..., p)``.
        c: positive weight, scalar or broadcastable to the batch shape.

    Returns:
        The updated inverse, same shape as ``a_inv``.
    """
    a_inv = np.asarray(a_inv, dtype=float)
    u = np.asarray(u, dtype=float)
    c_arr = np.asarray(c, dtype=float)
    if a_inv.shape[-1] != a_inv.shape[-2] or u.shape[-1] != a_inv.shape[-1]:
        raise DimensionError(f"incompatible shapes {a_inv.shape} and {u.shape}")
    if not (np.all(np.isfinite(a_inv)) and np.all(np.isfinite(u)) and np.all(np.isfinite(c_arr))):
        raise NumericalInputError("rank-one update received non-finite input")
    if np.any(c_arr <= 0):
        raise NumericalInputError("rank-one weight c must be positive")
    return _rank_one_inverse_update(a_inv, u, c_arr)


def quad_form(x: np.ndarray, a: np.ndarray) -> np.ndarray | float:
    """``x^T A x``, broadcasting over leading axes."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    if a.shape[-1] != a.shape[-2] or x.shape[-1] != a.shape[-1]:
        raise DimensionError(f"incompatible shapes {x.shape} and {a.shape}")
    out = np.einsum("...i,...ij,...j->...", x, a, x)
    return float(out) if out.ndim == 0 else out


def cholesky(a: np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with ``L L^T = a``.

    Raises:
        DecompositionError: ``a`` is not symmetric positive definite.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionError(f"expected square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericalInputError("cholesky received non-finite input")
    scale = max(1.0, float(np.max(np.abs(a))))
    if not np.allclose(a, np.swapaxes(a, -1, -2), rtol=0.0, atol=1e-12 * scale):
        raise DecompositionError("matrix is not symmetric")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError("matrix is not positive definite") from exc
