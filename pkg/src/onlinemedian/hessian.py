"""Online Hessian estimates at a moving median estimate.

``HessianAccumulator`` keeps the unnormalized matrix

    A_n = H_0 + sum_k w_k phi_k phi_k^T + sum_k beta_k Z_k Z_k^T,

where ``phi_k`` is the change of the per-sample gradient under a Gaussian
perturbation of size ``alpha_k`` and ``w_k = ||X_k - m_{k-1}|| / alpha_k**2``.
Its inverse ``M_n = A_n^{-1}`` is maintained by two Sherman-Morrison updates
per sample. The normalized estimate is ``A_n / (n + 1)``, and a Newton step
``(1/(n+1)) * (A_n/(n+1))^{-1} g`` is just ``M_n g``.

``PlugInHessianAccumulator`` averages the exact per-sample Hessians instead;
it is what the chi-squared test statistic uses.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigurationError, DegenerateSampleError, DimensionError
from .linalg import _rank_one_inverse_update
from .objective import _hessian_from_unit, _unit, default_eps

VARIANTS = ("sn", "wasn")


def alpha_sequence(k: int) -> float:
    """Perturbation size ``1 / (k ln(k + 1))`` for sample index ``k >= 1``."""
    return 1.0 / (k * math.log(k + 1.0))


def check_beta(variant: str, beta: float, gamma: float | None = None) -> None:
    """Validate the regularizer exponent for a variant.

    SN needs ``0 < beta < 1/2``; WASN needs ``0 < beta < gamma - 1/2``
    (``1/2`` when ``gamma`` is not given).
    """
    if variant not in VARIANTS:
        raise ConfigurationError(f"unknown variant {variant!r}", "variant")
    upper = 0.5
    if variant == "wasn" and gamma is not None:
        upper = gamma - 0.5
    if not 0.0 < beta < upper:
        raise ConfigurationError(
            f"beta={beta} outside admissible range (0, {upper:g}) for {variant}", "beta"
        )


def beta_sequence(k: int, variant: str, c_beta: float, beta: float) -> float:
    """Regularizer weight for sample ``k``.

    ``c_beta * k**-beta`` for SN and ``c_beta * k**-(1 - beta)`` for WASN.

    >>> beta_sequence(16, "sn", 1.0, 0.25)
    0.5
    """
    check_beta(variant, beta)
    if variant == "sn":
        return c_beta * k ** (-beta)
    return c_beta * k ** (-(1.0 - beta))


def _phi(x, m, z, alpha, eps):
    """Gradient difference plus the norm at ``m`` and a degeneracy mask."""
    u0, r0, deg0 = _unit(x - m, eps)
    u1, _, deg1 = _unit(x - m - alpha * z, eps)
    # grad(m + alpha z) - grad(m) = -u1 + u0
    return u0 - u1, r0, deg0 | deg1


def phi(x: np.ndarray, m: np.ndarray, z: np.ndarray, alpha: float, eps=None) -> np.ndarray:
    """``grad_g(x, m + alpha z) - grad_g(x, m)``.

    Raises:
        DegenerateSampleError: if ``x`` coincides with ``m`` or ``m + alpha z``.
    """
    x = np.asarray(x, dtype=float)
    m = np.asarray(m, dtype=float)
    z = np.asarray(z, dtype=float)
    if eps is None:
        eps = default_eps(x)
    out, _, degenerate = _phi(x, m, z, alpha, eps)
    if np.any(degenerate):
        raise DegenerateSampleError("observation coincides with a perturbation point")
    return out


class HessianAccumulator:
    """Perturbation-based Hessian sum with a maintained inverse.

    Args:
        p: dimension.
        variant: ``"sn"`` or ``"wasn"``; selects the regularizer schedule.
        c_beta: regularizer scale. Keep it small next to the Hessian's
            eigenvalues: its bias ``c_beta n**-beta / (1 - beta)`` decays slowly.
        beta: regularizer exponent (defaults 0.25 for SN, 0.1 for WASN).
        gamma: WASN step exponent, only used to validate ``beta``.
        h0: symmetric positive seed matrix (identity by default).
        regularize: add the ``beta_k Z_k Z_k^T`` terms. Disable for the
            plain estimate used in confidence intervals.
        batch_shape: leading shape for independent parallel streams.
    """

    def __init__(
        self,
        p: int,
        variant: str = "sn",
        c_beta: float = 0.01,
        beta: float | None = None,
        gamma: float | None = None,
        h0: np.ndarray | None = None,
        regularize: bool = True,
        batch_shape: tuple[int, ...] = (),
    ):
        if p < 1:
            raise ConfigurationError("dimension must be positive", "p")
        if beta is None:
            beta = 0.25 if variant == "sn" else 0.1
        if regularize:
            check_beta(variant, beta, gamma)
            if c_beta <= 0:
                raise ConfigurationError("c_beta must be positive", "c_beta")
        h0 = np.eye(p) if h0 is None else np.asarray(h0, dtype=float)
        if h0.shape != (p, p):
            raise DimensionError(f"h0 must be {p}x{p}")
        self.p = p
        self.variant = variant
        self.c_beta = c_beta
        self.beta = beta
        self.regularize = regularize
        self.batch_shape = tuple(batch_shape)
        self.n = 0
        self.skipped = np.zeros(self.batch_shape, dtype=int)
        self.A = np.broadcast_to(h0, self.batch_shape + (p, p)).copy()
        self.M = np.broadcast_to(np.linalg.inv(h0), self.batch_shape + (p, p)).copy()

    def beta_weight(self, k: int) -> float:
        if self.variant == "sn":
            return self.c_beta * k ** (-self.beta)
        return self.c_beta * k ** (-(1.0 - self.beta))

    def update(self, x: np.ndarray, m: np.ndarray, z: np.ndarray) -> "HessianAccumulator":
        """Absorb observation ``x`` evaluated at ``m`` with perturbation ``z``.

        A degenerate sample contributes only its regularizer term.
        """
        x = np.asarray(x, dtype=float)
        m = np.asarray(m, dtype=float)
        z = np.asarray(z, dtype=float)
        k = self.n + 1
        alpha = alpha_sequence(k)
        ph, r, degenerate = _phi(x, m, z, alpha, default_eps(x))
        # sqrt(w) * phi keeps the magnitudes balanced; w alone grows like k^2 ln(k)^2
        v = np.sqrt(r)[..., None] / alpha * ph
        c = np.where(degenerate, 0.0, 1.0)
        self.A = self.A + c[..., None, None] * (v[..., :, None] * v[..., None, :])
        self.M = _rank_one_inverse_update(self.M, v, c)
        if self.regularize:
            b = self.beta_weight(k)
            self.A = self.A + b * (z[..., :, None] * z[..., None, :])
            self.M = _rank_one_inverse_update(self.M, z, b)
        self.skipped = self.skipped + degenerate
        self.n = k
        return self

    def newton_direction(self, g: np.ndarray) -> np.ndarray:
        """``M g``, which equals ``(1/(n+1)) * estimate^{-1} g``."""
        return (self.M @ np.asarray(g, dtype=float)[..., None])[..., 0]

    @property
    def estimate(self) -> np.ndarray:
        """Normalized Hessian estimate ``A / (n + 1)``."""
        return self.A / (self.n + 1)

    @property
    def inverse_estimate(self) -> np.ndarray:
        """Inverse of the normalized estimate, ``(n + 1) M``."""
        return (self.n + 1) * self.M


def hessian_update(acc: HessianAccumulator, x, m, z) -> HessianAccumulator:
    return acc.update(x, m, z)


def newton_direction(acc: HessianAccumulator, g) -> np.ndarray:
    return acc.newton_direction(g)


class PlugInHessianAccumulator:
    """Running average of exact per-sample Hessians, seeded with ``h0``.

    ``hstar = (h0 + sum_k hessian_g(X_k, m_{k-1})) / (n + 1)``; degenerate
    samples add nothing but still advance ``n``.
    """

    def __init__(self, p: int, h0: np.ndarray | None = None, batch_shape: tuple[int, ...] = ()):
        h0 = np.eye(p) if h0 is None else np.asarray(h0, dtype=float)
        if h0.shape != (p, p):
            raise DimensionError(f"h0 must be {p}x{p}")
        self.p = p
        self.batch_shape = tuple(batch_shape)
        self.n = 0
        self.skipped = np.zeros(self.batch_shape, dtype=int)
        self.total = np.broadcast_to(h0, self.batch_shape + (p, p)).copy()

    def update(self, x: np.ndarray, m: np.ndarray) -> "PlugInHessianAccumulator":
        x = np.asarray(x, dtype=float)
        m = np.asarray(m, dtype=float)
        u, r, degenerate = _unit(x - m, default_eps(x))
        safe_r = np.where(degenerate, 1.0, r)
        term = _hessian_from_unit(u, safe_r)
        self.total = self.total + np.where(degenerate[..., None, None], 0.0, term)
        self.skipped = self.skipped + degenerate
        self.n += 1
        return self

    @property
    def hstar(self) -> np.ndarray:
        return self.total / (self.n + 1)


def plug_in_update(acc: PlugInHessianAccumulator, x, m) -> PlugInHessianAccumulator:
    return acc.update(x, m)
