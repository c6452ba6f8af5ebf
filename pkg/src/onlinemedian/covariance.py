"""Online estimate of ``Sigma = E[grad g(X, m) grad g(X, m)^T]``."""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .linalg import _rank_one_inverse_update
from .objective import _unit, default_eps


class CovarianceAccumulator:
    """Sum of outer products of unit directions, with its inverse.

    ``S = Sigma_0 + sum_k u_k u_k^T`` where ``u_k`` is the unit vector from
    the pre-update estimate ``m_{k-1}`` to ``X_k``; ``W_inv = S^{-1}`` is kept
    up to date by Sherman-Morrison. Degenerate samples are skipped entirely
    but still count towards ``n``.
    """

    def __init__(self, p: int, sigma0: np.ndarray | None = None, batch_shape: tuple[int, ...] = ()):
        sigma0 = np.eye(p) if sigma0 is None else np.asarray(sigma0, dtype=float)
        if sigma0.shape != (p, p):
            raise DimensionError(f"sigma0 must be {p}x{p}")
        self.p = p
        self.batch_shape = tuple(batch_shape)
        self.sigma0 = sigma0
        self.n = 0
        self.skipped = np.zeros(self.batch_shape, dtype=int)
        self.S = np.broadcast_to(sigma0, self.batch_shape + (p, p)).copy()
        self.W_inv = np.broadcast_to(np.linalg.inv(sigma0), self.batch_shape + (p, p)).copy()

    def update(self, x: np.ndarray, m_tilde: np.ndarray) -> "CovarianceAccumulator":
        x = np.asarray(x, dtype=float)
        u, _, degenerate = _unit(x - np.asarray(m_tilde, dtype=float), default_eps(x))
        c = np.where(degenerate, 0.0, 1.0)
        self.S = self.S + c[..., None, None] * (u[..., :, None] * u[..., None, :])
        self.W_inv = _rank_one_inverse_update(self.W_inv, u, c)
        self.skipped = self.skipped + degenerate
        self.n += 1
        return self

    @property
    def n_effective(self) -> np.ndarray:
        return self.n - self.skipped

    def sigma_bar(self) -> np.ndarray:
        """Normalized estimate ``S / (n + 1)``."""
        return self.S / (self.n + 1)

    def sigma_bar_inv(self) -> np.ndarray:
        """Inverse of the normalized estimate, ``(n + 1) W_inv``."""
        return (self.n + 1) * self.W_inv


def covariance_update(acc: CovarianceAccumulator, x, m_tilde) -> CovarianceAccumulator:
    return acc.update(x, m_tilde)


def sigma_bar(acc: CovarianceAccumulator) -> np.ndarray:
    return acc.sigma_bar()


def sigma_bar_inv(acc: CovarianceAccumulator) -> np.ndarray:
    return acc.sigma_bar_inv()
