"""Online geometric-median estimators.

Each estimator is a single-writer state machine fed one observation at a
time via ``step(x, z)``; ``z`` is the standard Gaussian perturbation used by
the Newton-type Hessian estimates (ignored by ASGD). All states broadcast
over a leading batch shape, so ``B`` independent streams can advance in
lock-step by passing ``(B, p)`` arrays.

Degenerate samples (observation equal to the current iterate) leave the
iterate in place; counters, averages and regularizers still advance.
"""

from __future__ import annotations

import inspect
import math

import numpy as np

from .errors import ConfigurationError, DimensionError
from .hessian import HessianAccumulator
from .objective import _unit, default_eps

ALGORITHMS = ("asgd", "sn", "asn", "wasn")


def _as_m0(m0) -> np.ndarray:
    m0 = np.array(m0, dtype=float)
    if m0.ndim < 1 or m0.shape[-1] < 1:
        raise DimensionError("m0 must have a trailing dimension axis")
    if not np.all(np.isfinite(m0)):
        raise ConfigurationError("m0 must be finite", "m0")
    return m0


class ASGD:
    """Averaged stochastic gradient descent.

    ``m_sg`` moves by ``c_gamma * k**-gamma`` along the unit direction toward
    the ``k``-th observation; ``m_bar`` is the plain mean of ``m_sg_1..m_sg_n``
    (``m0`` before any step).
    """

    name = "asgd"

    def __init__(self, m0, c_gamma: float = 1.0, gamma: float = 2.0 / 3.0):
        if c_gamma <= 0:
            raise ConfigurationError("c_gamma must be positive", "c_gamma")
        if not 0.5 < gamma < 1.0:
            raise ConfigurationError("gamma must lie in (1/2, 1)", "gamma")
        self.m_sg = _as_m0(m0)
        self.m_bar = self.m_sg.copy()
        self.c_gamma = c_gamma
        self.gamma = gamma
        self.n = 0
        self.skipped = np.zeros(self.m_sg.shape[:-1], dtype=int)

    def step(self, x, z=None) -> "ASGD":
        x = np.asarray(x, dtype=float)
        k = self.n + 1
        u, _, degenerate = _unit(x - self.m_sg, default_eps(x))
        self.m_sg = self.m_sg + self.c_gamma * k ** (-self.gamma) * u
        self.m_bar = self.m_bar + (self.m_sg - self.m_bar) / k
        self.skipped = self.skipped + degenerate
        self.n = k
        return self

    @property
    def estimate(self) -> np.ndarray:
        return self.m_bar


class StochasticNewton:
    """Stochastic Newton with step ``1/(n+1)`` and a regularized Hessian.

    One step: take the Newton direction from the accumulator as it stands,
    move the median, then let the accumulator absorb the observation at the
    pre-move estimate.
    """

    name = "sn"

    def __init__(self, m0, c_beta: float = 0.01, beta: float = 0.25, h0=None):
        self.m = _as_m0(m0)
        self.hess = HessianAccumulator(
            self.m.shape[-1], variant="sn", c_beta=c_beta, beta=beta, h0=h0,
            batch_shape=self.m.shape[:-1],
        )
        self.n = 0
        self.skipped = np.zeros(self.m.shape[:-1], dtype=int)

    def step(self, x, z) -> "StochasticNewton":
        x = np.asarray(x, dtype=float)
        u, _, degenerate = _unit(x - self.m, default_eps(x))
        m_prev = self.m
        self.m = m_prev + self.hess.newton_direction(u)
        self.hess.update(x, m_prev, z)
        self.skipped = self.skipped + degenerate
        self.n += 1
        return self

    @property
    def estimate(self) -> np.ndarray:
        return self.m


class WASN:
    """Weighted averaged stochastic Newton.

    The fast iterate ``m_hat`` moves by ``c_gamma (n+1+c_gamma')**-gamma``
    times the inverse normalized Hessian (``(n+1) M``) applied to the unit
    direction. ``m_tau`` averages the fast iterates with weights
    ``ln(k+1)**omega``; the Hessian is estimated at ``m_tau``.

    ``omega=0`` gives the plain averaged variant (ASN). The weight of ``m0``
    is ``ln(1)**omega``, taken as 0 for every omega so the average always
    starts at ``m_hat_1``.
    """

    name = "wasn"

    def __init__(
        self,
        m0,
        c_gamma: float = 1.0,
        c_gamma_prime: float = 0.0,
        gamma: float = 0.75,
        omega: float = 2.0,
        c_beta: float = 0.01,
        beta: float = 0.1,
        h0=None,
    ):
        if c_gamma <= 0:
            raise ConfigurationError("c_gamma must be positive", "c_gamma")
        if c_gamma_prime < 0:
            raise ConfigurationError("c_gamma_prime must be non-negative", "c_gamma_prime")
        if not 0.5 < gamma <= 1.0:
            raise ConfigurationError("gamma must lie in (1/2, 1]", "gamma")
        if omega < 0:
            raise ConfigurationError("omega must be non-negative", "omega")
        self.m_hat = _as_m0(m0)
        self.m_tau = self.m_hat.copy()
        self.c_gamma = c_gamma
        self.c_gamma_prime = c_gamma_prime
        self.gamma = gamma
        self.omega = omega
        self.tau_denominator = 0.0
        self.hess = HessianAccumulator(
            self.m_hat.shape[-1], variant="wasn", c_beta=c_beta, beta=beta,
            gamma=min(gamma, 1.0), h0=h0, batch_shape=self.m_hat.shape[:-1],
        )
        self.n = 0
        self.skipped = np.zeros(self.m_hat.shape[:-1], dtype=int)

    def tau(self, k: int) -> float:
        """Averaging weight for the ``k``-th fast iterate (updates the running sum)."""
        w = 1.0 if self.omega == 0 else math.log(k + 1.0) ** self.omega
        self.tau_denominator += w
        return w / self.tau_denominator

    def step(self, x, z) -> "WASN":
        x = np.asarray(x, dtype=float)
        n = self.n
        u, _, degenerate = _unit(x - self.m_hat, default_eps(x))
        step_size = self.c_gamma * (n + 1 + self.c_gamma_prime) ** (-self.gamma) * (n + 1)
        self.m_hat = self.m_hat + step_size * self.hess.newton_direction(u)
        m_tau_prev = self.m_tau
        t = self.tau(n + 1)
        self.m_tau = (1.0 - t) * m_tau_prev + t * self.m_hat
        self.hess.update(x, m_tau_prev, z)
        self.skipped = self.skipped + degenerate
        self.n = n + 1
        return self

    @property
    def estimate(self) -> np.ndarray:
        return self.m_tau


def ASN(m0, **kwargs) -> WASN:
    """Averaged stochastic Newton: WASN with ``omega=0``."""
    kwargs["omega"] = 0.0
    est = WASN(m0, **kwargs)
    est.name = "asn"
    return est


_FACTORIES = {"asgd": ASGD, "sn": StochasticNewton, "asn": ASN, "wasn": WASN}

HYPERPARAMETERS = {
    "asgd": ("c_gamma", "gamma"),
    "sn": ("c_beta", "beta"),
    "asn": ("c_gamma", "c_gamma_prime", "gamma", "c_beta", "beta"),
    "wasn": ("c_gamma", "c_gamma_prime", "gamma", "omega", "c_beta", "beta"),
}


def make_estimator(name: str, m0, **hyper):
    """Build an estimator by name, rejecting unknown hyperparameters."""
    if name not in _FACTORIES:
        raise ConfigurationError(f"unknown algorithm {name!r}", "algorithm")
    unknown = set(hyper) - set(HYPERPARAMETERS[name]) - {"h0"}
    if unknown:
        raise ConfigurationError(f"unknown hyperparameters {sorted(unknown)} for {name}", "hyperparameters")
    return _FACTORIES[name](m0, **hyper)


def asgd_step(s: ASGD, x) -> ASGD:
    return s.step(x)


def sn_step(s: StochasticNewton, x, z) -> StochasticNewton:
    return s.step(x, z)


def wasn_step(s: WASN, x, z) -> WASN:
    return s.step(x, z)


def default_hyperparameters(name: str) -> dict[str, float]:
    """Default hyperparameter values for an algorithm."""
    if name not in _FACTORIES:
        raise ConfigurationError(f"unknown algorithm {name!r}", "algorithm")
    cls = WASN if name == "asn" else _FACTORIES[name]
    sig = inspect.signature(cls.__init__)
    out = {k: sig.parameters[k].default for k in HYPERPARAMETERS[name]}
    if name == "asn":
        out = {k: v for k, v in out.items() if k != "omega"}
    return out
