"""Directional confidence intervals and the chi-squared test for the median.

Both rely on asymptotic normality of an efficient online estimate ``m~_n``:
``sqrt(n) (m~_n - m) -> N(0, H^{-1} Sigma H^{-1})``. The caller supplies the
online estimates of ``H`` and ``Sigma``; ``OnlineInference`` bundles the
accumulators and feeds them in the right order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covariance import CovarianceAccumulator
from .errors import DimensionError, DomainError, InvalidDirectionError, NumericalDegeneracyError
from .hessian import HessianAccumulator, PlugInHessianAccumulator
from .linalg import quad_form
from .quantiles import chi_square_quantile, chi_square_sf, normal_quantile

__all__ = [
    "ConfidenceInterval",
    "TestResult",
    "confidence_interval",
    "chi_square_test",
    "wald_statistic",
    "OnlineInference",
    "normal_quantile",
    "chi_square_quantile",
]


@dataclass(frozen=True)
class ConfidenceInterval:
    direction: np.ndarray
    center: float
    half_width: float
    level: float
    n: int

    @property
    def lower(self) -> float:
        return self.center - self.half_width

    @property
    def upper(self) -> float:
        return self.center + self.half_width

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class TestResult:
    statistic: float
    dof: int
    p_value: float
    reject: bool
    level: float

    __test__ = False  # not a pytest class


def confidence_interval(m_tilde, S_bar_inv, Sigma_bar, x0, level: float, n: int) -> ConfidenceInterval:
    """Asymptotic interval for ``x0^T m``.

    Half-width is ``z_{(1+level)/2} * sqrt(x0^T S^{-1} Sigma S^{-1} x0 / n)``.
    """
    x0 = np.asarray(x0, dtype=float)
    m_tilde = np.asarray(m_tilde, dtype=float)
    S_bar_inv = np.asarray(S_bar_inv, dtype=float)
    if x0.shape != m_tilde.shape or S_bar_inv.shape != (x0.size, x0.size):
        raise DimensionError("direction, estimate and matrices must share dimension")
    if not np.any(x0):
        raise InvalidDirectionError("direction must be non-zero")
    if not 0.0 < level < 1.0:
        raise DomainError(f"level {level} outside (0, 1)")
    if n < 1:
        raise DomainError("n must be at least 1")
    v = S_bar_inv @ x0
    variance = quad_form(v, Sigma_bar)
    if not variance > 0.0:
        raise NumericalDegeneracyError(f"variance form is {variance}")
    half = normal_quantile(0.5 * (1.0 + level)) * math.sqrt(variance / n)
    return ConfidenceInterval(x0, float(x0 @ m_tilde), half, level, n)


def wald_statistic(m_tilde, H_star, Sigma_bar_inv, m_test, n: int):
    """``n d^T H* Sigma^{-1} H* d`` with ``d = m~ - m_test``; broadcasts over batches."""
    d = np.asarray(m_tilde, dtype=float) - np.asarray(m_test, dtype=float)
    hd = (np.asarray(H_star, dtype=float) @ d[..., None])[..., 0]
    return n * quad_form(hd, Sigma_bar_inv)


def chi_square_test(m_tilde, H_star, Sigma_bar_inv, m_test, n: int, alpha: float) -> TestResult:
    """Test ``m = m_test``; reject when the statistic exceeds the ``1 - alpha`` chi-squared quantile."""
    m_tilde = np.asarray(m_tilde, dtype=float)
    p = m_tilde.shape[-1]
    if np.shape(H_star) != (p, p) or np.shape(Sigma_bar_inv) != (p, p) or np.shape(m_test) != (p,):
        raise DimensionError("test inputs must share dimension")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha {alpha} outside (0, 1)")
    stat = float(wald_statistic(m_tilde, H_star, Sigma_bar_inv, m_test, n))
    threshold = chi_square_quantile(1.0 - alpha, p)
    return TestResult(stat, p, chi_square_sf(stat, p), stat > threshold, alpha)


class OnlineInference:
    """Accumulators behind online intervals and tests for one estimate sequence.

    Feed ``update(x, m_prev, z)`` with the estimate *before* it absorbed
    ``x``. The covariance and the plug-in Hessian are always tracked; the
    perturbation Hessian used by intervals only when ``track_ci`` is set. That
    Hessian omits the eigenvalue regularizer unless ``ci_regularized`` is set.
    """

    def __init__(
        self,
        p: int,
        track_ci: bool = True,
        ci_regularized: bool = False,
        sigma0=None,
        s0=None,
        h0_star=None,
        batch_shape: tuple[int, ...] = (),
    ):
        self.p = p
        self.cov = CovarianceAccumulator(p, sigma0, batch_shape)
        self.plug_in = PlugInHessianAccumulator(p, h0_star, batch_shape)
        self.s_acc = (
            HessianAccumulator(p, variant="sn", h0=s0, regularize=ci_regularized, batch_shape=batch_shape)
            if track_ci else None
        )
        self.n = 0

    def update(self, x, m_prev, z=None) -> "OnlineInference":
        self.cov.update(x, m_prev)
        self.plug_in.update(x, m_prev)
        if self.s_acc is not None:
            if z is None:
                raise ValueError("interval tracking needs the Gaussian perturbation z")
            self.s_acc.update(x, m_prev, z)
        self.n += 1
        return self

    def confidence_interval(self, m_tilde, x0, level: float = 0.95) -> ConfidenceInterval:
        if self.s_acc is None:
            raise ValueError("constructed with track_ci=False")
        return confidence_interval(
            m_tilde, self.s_acc.inverse_estimate, self.cov.sigma_bar(), x0, level, max(self.n, 1)
        )

    def test(self, m_tilde, m_test, alpha: float = 0.05) -> TestResult:
        return chi_square_test(
            m_tilde, self.plug_in.hstar, self.cov.sigma_bar_inv(), np.asarray(m_test, dtype=float),
            max(self.n, 1), alpha,
        )
