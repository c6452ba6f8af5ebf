"""Per-sample loss, gradient and Hessian for the geometric median.

The geometric median of ``X`` minimizes ``h -> E[||X - h|| - ||X||]``. Every
function here evaluates the integrand ``g(x, h)`` (or its derivatives) for a
single observation, broadcasting over any leading batch axes.

When ``x`` and ``h`` coincide (within ``eps``) the gradient is undefined.
``grad_g`` reports that case with a flag and a zero gradient, while
``hessian_g`` raises, since there is nothing sensible to return.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DegenerateSampleError


def default_eps(x: np.ndarray) -> np.ndarray:
    """Coincidence threshold ``1e-12 * (1 + ||x||)``."""
    return 1e-12 * (1.0 + np.linalg.norm(x, axis=-1))


class GradResult(NamedTuple):
    grad: np.ndarray
    degenerate: np.ndarray | bool


def _unit(diff: np.ndarray, eps) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unit vector of ``diff``, its norm and the degeneracy mask.

    Degenerate rows get a zero unit vector.
    """
    r = np.linalg.norm(diff, axis=-1)
    degenerate = r <= eps
    safe_r = np.where(degenerate, 1.0, r)
    u = np.where(degenerate[..., None], 0.0, diff / safe_r[..., None])
    return u, r, degenerate


def loss_g(x: np.ndarray, h: np.ndarray) -> np.ndarray | float:
    """``||x - h|| - ||x||``; may be negative."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    out = np.linalg.norm(x - h, axis=-1) - np.linalg.norm(x, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def grad_g(x: np.ndarray, h: np.ndarray, eps=None) -> GradResult:
    """Gradient in ``h``: ``-(x - h) / ||x - h||``.

    Returns a zero gradient with ``degenerate=True`` where ``||x - h|| <= eps``.
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    if eps is None:
        eps = default_eps(x)
    u, _, degenerate = _unit(x - h, eps)
    if np.ndim(degenerate) == 0:
        degenerate = bool(degenerate)
    return GradResult(-u, degenerate)


def hessian_g(x: np.ndarray, h: np.ndarray, eps=None) -> np.ndarray:
    """Hessian in ``h``: ``(I - u u^T) / r`` with ``r = ||x - h||``, ``u = (x - h) / r``.

    Raises:
        DegenerateSampleError: if ``||x - h|| <= eps`` for any batch entry.
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    if eps is None:
        eps = default_eps(x)
    u, r, degenerate = _unit(x - h, eps)
    if np.any(degenerate):
        raise DegenerateSampleError("observation coincides with evaluation point")
    return _hessian_from_unit(u, r)


def _hessian_from_unit(u: np.ndarray, r: np.ndarray) -> np.ndarray:
    p = u.shape[-1]
    proj = np.eye(p) - u[..., :, None] * u[..., None, :]
    return proj / np.asarray(r)[..., None, None]
