"""Monte-Carlo harness: Gaussian streams, the Weiszfeld oracle and experiments.

Replications run in lock-step as a leading batch axis of the estimator
states, which keeps the per-sample Python overhead independent of the number
of replications. Every replication owns its random generators, spawned from
the master seed, so its draws do not depend on the batch it runs in.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Iterator

import numpy as np

from .errors import ConfigurationError, DecompositionError, NonConvergenceError
from .estimators import ALGORITHMS, HYPERPARAMETERS, make_estimator
from .inference import OnlineInference, wald_statistic
from .linalg import cholesky
from .quantiles import chi_square_cdf, chi_square_quantile, normal_quantile

STRUCTURE_KINDS = ("identity", "toeplitz_half", "spiked", "custom")
CSV_COLUMNS = ("algorithm", "n", "aggregate", "value", "std_error")


@dataclass(frozen=True)
class CovStructure:
    """Covariance of the simulated Gaussian observations.

    ``toeplitz_half``: ``rho**|i-j|``; ``spiked``: identity with the first
    diagonal entry replaced by ``spike``; ``custom``: an explicit matrix.
    """

    kind: str = "toeplitz_half"
    p: int = 10
    rho: float = 0.5
    spike: float = 1000.0
    matrix: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if self.kind not in STRUCTURE_KINDS:
            raise ConfigurationError(f"unknown kind {self.kind!r}", "structure.kind")
        if self.kind == "custom":
            if self.matrix is None:
                raise ConfigurationError("custom structure needs a matrix", "structure.matrix")
            mat = np.asarray(self.matrix, dtype=float)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise ConfigurationError("matrix must be square", "structure.matrix")
            object.__setattr__(self, "p", mat.shape[0])
            object.__setattr__(self, "matrix", tuple(tuple(float(v) for v in row) for row in mat))
        if self.p < 1:
            raise ConfigurationError("p must be positive", "structure.p")
        try:
            cholesky(self.covariance())
        except DecompositionError as exc:
            raise ConfigurationError(f"covariance is not SPD ({exc})", "structure") from exc

    def covariance(self) -> np.ndarray:
        if self.kind == "identity":
            return np.eye(self.p)
        if self.kind == "toeplitz_half":
            idx = np.arange(self.p)
            return self.rho ** np.abs(idx[:, None] - idx[None, :])
        if self.kind == "spiked":
            cov = np.eye(self.p)
            cov[0, 0] = self.spike
            return cov
        return np.asarray(self.matrix, dtype=float)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind, "p": self.p}
        if self.kind == "toeplitz_half":
            out["rho"] = self.rho
        elif self.kind == "spiked":
            out["spike"] = self.spike
        elif self.kind == "custom":
            out["matrix"] = [list(row) for row in self.matrix]
        return out


class GaussianStream:
    """I.i.d. draws of ``location + L g`` with ``L L^T = Sigma`` and ``g`` standard normal.

    Deterministic given ``seed`` (an int, a ``SeedSequence`` or a
    ``Generator``); drawing in blocks or one at a time yields the same
    sequence.
    """

    def __init__(self, structure: CovStructure, seed=0, location=0.0):
        self.structure = structure
        self.p = structure.p
        self.chol = cholesky(structure.covariance())
        self.location = np.broadcast_to(np.asarray(location, dtype=float), (self.p,)).copy()
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    def draw(self, size: int) -> np.ndarray:
        g = self.rng.standard_normal((size, self.p))
        return g @ self.chol.T + self.location

    def __iter__(self) -> Iterator[np.ndarray]:
        return self

    def __next__(self) -> np.ndarray:
        return self.draw(1)[0]


def gaussian_stream(structure: CovStructure, seed=0, location=0.0) -> GaussianStream:
    return GaussianStream(structure, seed, location)


@dataclass(frozen=True)
class WeiszfeldResult:
    point: np.ndarray
    n_iter: int
    grad_norm: float


def _subgradient(points: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray, np.ndarray, int]:
    """Min-norm subgradient norm of the mean distance at ``y``.

    Also returns the distances, the coincidence mask and its count.
    """
    diff = points - y
    dist = np.linalg.norm(diff, axis=1)
    coincide = dist <= 1e-12 * (1.0 + np.linalg.norm(y))
    eta = int(coincide.sum())
    keep = ~coincide
    pull = (diff[keep] / dist[keep, None]).sum(axis=0)
    grad = max(np.linalg.norm(pull) - eta, 0.0) / len(points)
    return grad, dist, coincide, eta


def weiszfeld(samples, tol: float = 1e-10, max_iter: int = 10_000, full_output: bool = False):
    """Sample geometric median by the modified Weiszfeld iteration.

    Starts from the centroid. When the iterate sits on a data point with
    multiplicity ``eta``, the step is damped by ``max(0, 1 - eta/r)`` (Vardi
    and Zhang) so the iteration can leave a non-optimal data point. Each
    iteration also tests the nearest data point for optimality, since plain
    Weiszfeld only approaches an optimal data point geometrically.

    Stops when the subgradient norm of ``y -> mean ||x_i - y||`` is ``<= tol``.

    Raises:
        NonConvergenceError: after ``max_iter`` iterations; carries the last iterate.
    """
    points = np.asarray(samples, dtype=float)
    if points.ndim != 2 or len(points) < 2:
        raise ConfigurationError("need a (n, p) array with n >= 2", "samples")
    if not np.all(np.isfinite(points)):
        raise ConfigurationError("samples must be finite", "samples")
    if np.all(points == points[0]):
        raise ConfigurationError("need at least two distinct points", "samples")

    y = points.mean(axis=0)
    grad = math.inf
    for it in range(max_iter + 1):
        grad, dist, coincide, eta = _subgradient(points, y)
        if grad <= tol:
            break
        j = int(np.argmin(np.where(coincide, np.inf, dist)))
        grad_j = _subgradient(points, points[j])[0]
        if grad_j <= tol:
            y, grad = points[j].copy(), grad_j
            break
        if it == max_iter:
            raise NonConvergenceError(
                f"Weiszfeld did not reach tol={tol} in {max_iter} iterations", y, it, grad
            )
        keep = ~coincide
        w = 1.0 / dist[keep]
        target = (w[:, None] * points[keep]).sum(axis=0) / w.sum()
        if eta:
            r = np.linalg.norm((w[:, None] * (points[keep] - y)).sum(axis=0))
            y = max(0.0, 1.0 - eta / r) * target + min(1.0, eta / r) * y
        else:
            y = target
    if full_output:
        return WeiszfeldResult(y, it, float(grad))
    return y


def log_grid(n: int, points: int = 30) -> tuple[int, ...]:
    """Up to ``points`` log-spaced integers in ``[1, n]``, always including ``n``."""
    grid = np.unique(np.round(np.logspace(0, math.log10(n), points)).astype(int))
    return tuple(int(v) for v in grid if 1 <= v <= n)


def ks_distance(sample, cdf) -> float:
    """Kolmogorov-Smirnov distance between a sample and a continuous CDF."""
    xs = np.sort(np.asarray(sample, dtype=float))
    m = len(xs)
    f = np.array([cdf(v) for v in xs])
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - f), np.max(f - (i - 1) / m)))


_CONFIG_KEYS = {
    "mode", "p", "n", "replications", "algorithms", "init_radius", "hyperparameters", "seed",
    "structure", "record_grid", "alpha", "level", "direction", "location", "test_point",
    "ci_regularized", "sigma0_scale", "s0_scale", "h0_star_scale",
}


def _require_number(d: dict, key: str, kind=float, lo=None, hi=None, lo_open=False, hi_open=False, prefix=""):
    v = d[key]
    path = prefix + key
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (kind is int and not float(v).is_integer()):
        raise ConfigurationError(f"expected {kind.__name__}, got {v!r}", path)
    v = kind(v)
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise ConfigurationError(f"value {v} below {'or at ' if lo_open else ''}{lo}", path)
    if hi is not None and (v > hi or (hi_open and v == hi)):
        raise ConfigurationError(f"value {v} above {'or at ' if hi_open else ''}{hi}", path)
    return v


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one Monte-Carlo experiment.

    The seed determines every random draw: per-replication data streams,
    perturbations and initial points ``m0 = init_radius * U``.
    """

    p: int = 10
    n: int = 15000
    replications: int = 50
    algorithms: tuple[str, ...] = ALGORITHMS
    init_radius: float = 1.0
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 20240601
    structure: CovStructure = field(default_factory=CovStructure)
    record_grid: tuple[int, ...] | None = None
    alpha: float = 0.05
    level: float = 0.95
    direction: tuple[float, ...] | None = None
    location: float = 0.0
    test_point: tuple[float, ...] | None = None
    ci_regularized: bool = False
    sigma0_scale: float = 1.0
    s0_scale: float = 1.0
    h0_star_scale: float = 1.0

    def __post_init__(self):
        if self.p < 1:
            raise ConfigurationError("p must be positive", "p")
        if self.n < 1:
            raise ConfigurationError("n must be >= 1", "n")
        if self.replications < 1:
            raise ConfigurationError("replications must be >= 1", "replications")
        if self.structure.p != self.p:
            raise ConfigurationError(f"structure dimension {self.structure.p} != p={self.p}", "structure.p")
        if not self.algorithms:
            raise ConfigurationError("at least one algorithm required", "algorithms")
        for i, name in enumerate(self.algorithms):
            if name not in ALGORITHMS:
                raise ConfigurationError(f"unknown algorithm {name!r}", f"algorithms[{i}]")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ConfigurationError("duplicate algorithm", "algorithms")
        for name, hyper in self.hyperparameters.items():
            if name not in ALGORITHMS:
                raise ConfigurationError(f"unknown algorithm {name!r}", f"hyperparameters.{name}")
            for key in hyper:
                if key not in HYPERPARAMETERS[name]:
                    raise ConfigurationError("unknown hyperparameter", f"hyperparameters.{name}.{key}")
        if self.record_grid is not None:
            if any(not 1 <= g <= self.n for g in self.record_grid):
                raise ConfigurationError("grid points must lie in [1, n]", "record_grid")
        for key, vec in (("direction", self.direction), ("test_point", self.test_point)):
            if vec is not None and len(vec) != self.p:
                raise ConfigurationError(f"expected {self.p} entries", key)
        if self.direction is not None and not any(self.direction):
            raise ConfigurationError("direction must be non-zero", "direction")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError("alpha must lie in (0, 1)", "alpha")
        if not 0.0 < self.level < 1.0:
            raise ConfigurationError("level must lie in (0, 1)", "level")
        for key in ("sigma0_scale", "s0_scale", "h0_star_scale"):
            if getattr(self, key) <= 0:
                raise ConfigurationError("must be positive", key)
        # fail fast on bad hyperparameter values
        for name in self.algorithms:
            make_estimator(name, np.zeros(self.p), **self.hyperparameters.get(name, {}))

    @property
    def grid(self) -> tuple[int, ...]:
        grid = self.record_grid if self.record_grid is not None else log_grid(self.n)
        return tuple(sorted(set(grid) | {self.n}))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        """Validate a plain mapping (e.g. parsed JSON/YAML) into a config."""
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a mapping")
        unknown = sorted(set(data) - _CONFIG_KEYS)
        if unknown:
            raise ConfigurationError("unknown key", unknown[0])
        kw: dict[str, Any] = {}
        for key, kind, lo in (("p", int, 1), ("n", int, 1), ("replications", int, 1), ("seed", int, 0)):
            if key in data:
                kw[key] = _require_number(data, key, kind, lo)
        for key in ("init_radius", "location"):
            if key in data:
                kw[key] = _require_number(data, key, float, 0.0 if key == "init_radius" else None)
        for key in ("alpha", "level"):
            if key in data:
                kw[key] = _require_number(data, key, float, 0.0, 1.0, True, True)
        for key in ("sigma0_scale", "s0_scale", "h0_star_scale"):
            if key in data:
                kw[key] = _require_number(data, key, float, 0.0, lo_open=True)
        if "ci_regularized" in data:
            if not isinstance(data["ci_regularized"], bool):
                raise ConfigurationError("expected boolean", "ci_regularized")
            kw["ci_regularized"] = data["ci_regularized"]
        if "algorithms" in data:
            algs = data["algorithms"]
            if not isinstance(algs, list) or not all(isinstance(a, str) for a in algs):
                raise ConfigurationError("expected a list of names", "algorithms")
            kw["algorithms"] = tuple(algs)
        if "hyperparameters" in data:
            hyper = data["hyperparameters"]
            if not isinstance(hyper, dict):
                raise ConfigurationError("expected a mapping", "hyperparameters")
            clean = {}
            for name, values in hyper.items():
                if not isinstance(values, dict):
                    raise ConfigurationError("expected a mapping", f"hyperparameters.{name}")
                for k in values:
                    _require_number(values, k, prefix=f"hyperparameters.{name}.")
                clean[name] = {k: float(v) for k, v in values.items()}
            kw["hyperparameters"] = clean
        for key in ("record_grid", "direction", "test_point"):
            if key in data and data[key] is not None:
                vals = data[key]
                if not isinstance(vals, list):
                    raise ConfigurationError("expected a list", key)
                for i, _ in enumerate(vals):
                    _require_number({f"{key}[{i}]": vals[i]}, f"{key}[{i}]", int if key == "record_grid" else float)
                kw[key] = tuple(int(v) if key == "record_grid" else float(v) for v in vals)
        p = kw.get("p", cls.p)
        if "structure" in data:
            st = data["structure"]
            if not isinstance(st, dict):
                raise ConfigurationError("expected a mapping", "structure")
            extra = sorted(set(st) - {"kind", "p", "rho", "spike", "matrix"})
            if extra:
                raise ConfigurationError("unknown key", f"structure.{extra[0]}")
            skw: dict[str, Any] = {"kind": st.get("kind", "toeplitz_half"), "p": p}
            if "p" in st and st["p"] != p:
                raise ConfigurationError(f"structure dimension {st['p']} != p={p}", "structure.p")
            if "rho" in st:
                skw["rho"] = _require_number(st, "rho", float, -1.0, 1.0, True, True, prefix="structure.")
            if "spike" in st:
                skw["spike"] = _require_number(st, "spike", float, 0.0, lo_open=True, prefix="structure.")
            if "matrix" in st:
                try:
                    skw["matrix"] = tuple(tuple(float(v) for v in row) for row in st["matrix"])
                except (TypeError, ValueError) as exc:
                    raise ConfigurationError("matrix must be numeric rows", "structure.matrix") from exc
            kw["structure"] = CovStructure(**skw)
        else:
            kw["structure"] = CovStructure(p=p)
        return cls(**kw)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["algorithms"] = list(self.algorithms)
        out["structure"] = self.structure.to_dict()
        for key in ("record_grid", "direction", "test_point"):
            if out[key] is not None:
                out[key] = list(out[key])
        return out


@dataclass
class ExperimentResult:
    """Aggregated experiment output.

    ``rows`` are long-format records ``(algorithm, n, aggregate, value,
    std_error)``; ``statistics`` keeps per-replication raw values (squared
    errors, test statistics or coverage indicators) keyed by algorithm.
    """

    kind: str
    rows: list[tuple[str, int, str, float, float]]
    statistics: dict[str, np.ndarray]
    config: ExperimentConfig

    def value(self, algorithm: str, aggregate: str, n: int | None = None) -> float:
        for alg, nn, agg, val, _ in self.rows:
            if alg == algorithm and agg == aggregate and (n is None or nn == n):
                if n is None and nn != self.config.n:
                    continue
                return val
        raise KeyError((algorithm, aggregate, n))

    def series(self, algorithm: str, aggregate: str = "mse") -> tuple[np.ndarray, np.ndarray]:
        pts = [(nn, val) for alg, nn, agg, val, _ in self.rows if alg == algorithm and agg == aggregate]
        ns, vals = zip(*pts)
        return np.array(ns), np.array(vals)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for alg, n, agg, val, se in self.rows:
            writer.writerow((alg, n, agg, repr(float(val)), repr(float(se))))
        return buf.getvalue()


def _replication_streams(cfg: ExperimentConfig):
    """Per-replication data streams, perturbation generators and initial points."""
    location = cfg.location
    data, perturb, m0 = [], [], []
    for child in np.random.SeedSequence(cfg.seed).spawn(cfg.replications):
        s_data, s_z, s_init = child.spawn(3)
        data.append(GaussianStream(cfg.structure, s_data, location))
        perturb.append(np.random.default_rng(s_z))
        m0.append(cfg.init_radius * np.random.default_rng(s_init).standard_normal(cfg.p))
    return data, perturb, np.array(m0)


def _run(cfg: ExperimentConfig, track_inference: bool, track_ci: bool, on_record, chunk: int = 256):
    """Drive all algorithms over all replications; ``on_record(k, states)`` at grid points."""
    data, perturb, m0 = _replication_streams(cfg)
    batch = (cfg.replications,)
    p = cfg.p
    states = {}
    for name in cfg.algorithms:
        est = make_estimator(name, m0.copy(), **cfg.hyperparameters.get(name, {}))
        inf = None
        if track_inference:
            inf = OnlineInference(
                p, track_ci=track_ci, ci_regularized=cfg.ci_regularized,
                sigma0=cfg.sigma0_scale * np.eye(p), s0=cfg.s0_scale * np.eye(p),
                h0_star=cfg.h0_star_scale * np.eye(p), batch_shape=batch,
            )
        states[name] = (est, inf)
    grid = set(cfg.grid)
    k = 0
    while k < cfg.n:
        size = min(chunk, cfg.n - k)
        xs = np.stack([s.draw(size) for s in data], axis=1)
        zs = np.stack([g.standard_normal((size, p)) for g in perturb], axis=1)
        for j in range(size):
            x, z = xs[j], zs[j]
            for est, inf in states.values():
                m_prev = est.estimate
                est.step(x, z)
                if inf is not None:
                    inf.update(x, m_prev, z)
            k += 1
            if k in grid:
                on_record(k, states)
    return states


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    m = len(values)
    se = float(np.std(values, ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return float(np.mean(values)), se


def run_mse_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Mean squared error ``E||m_hat - m||^2`` on the record grid, per algorithm."""
    truth = np.full(cfg.p, cfg.location)
    rows = []
    finals = {}

    def record(k, states):
        for name, (est, _) in states.items():
            sq = np.sum((est.estimate - truth) ** 2, axis=-1)
            mean, se = _mean_se(sq)
            rows.append((name, k, "mse", mean, se))
            if k == cfg.n:
                finals[name] = sq

    _run(cfg, track_inference=False, track_ci=False, on_record=record)
    rows.sort(key=lambda r: (cfg.algorithms.index(r[0]), r[1]))
    return ExperimentResult("mse", rows, finals, cfg)


def run_level_experiment(cfg: ExperimentConfig, alpha: float | None = None) -> ExperimentResult:
    """Rejection rate of the chi-squared test of ``m = test_point`` (default 0).

    Under the null (``location`` equal to the test point) this is the
    empirical level; otherwise it is the power.
    """
    alpha = cfg.alpha if alpha is None else alpha
    m_test = np.zeros(cfg.p) if cfg.test_point is None else np.asarray(cfg.test_point)
    threshold = chi_square_quantile(1.0 - alpha, cfg.p)
    stats: dict[str, np.ndarray] = {}

    def record(k, states):
        if k != cfg.n:
            return
        for name, (est, inf) in states.items():
            stats[name] = wald_statistic(
                est.estimate, inf.plug_in.hstar, inf.cov.sigma_bar_inv(), m_test, k
            )

    _run(cfg, track_inference=True, track_ci=False, on_record=record)
    rows = []
    for name in cfg.algorithms:
        rate = float(np.mean(stats[name] > threshold))
        se = math.sqrt(rate * (1.0 - rate) / cfg.replications)
        rows.append((name, cfg.n, "rejection_rate", rate, se))
    return ExperimentResult("levels", rows, stats, cfg)


def run_coverage_experiment(cfg: ExperimentConfig, level: float | None = None) -> ExperimentResult:
    """Coverage of directional confidence intervals for ``direction^T m``."""
    level = cfg.level if level is None else level
    x0 = np.eye(cfg.p)[0] if cfg.direction is None else np.asarray(cfg.direction, dtype=float)
    target = float(x0 @ np.full(cfg.p, cfg.location))
    zq = normal_quantile(0.5 * (1.0 + level))
    covered: dict[str, np.ndarray] = {}
    widths: dict[str, np.ndarray] = {}

    def record(k, states):
        if k != cfg.n:
            return
        for name, (est, inf) in states.items():
            v = (inf.s_acc.inverse_estimate @ x0)
            var = np.einsum("...i,...ij,...j->...", v, inf.cov.sigma_bar(), v)
            half = zq * np.sqrt(var / k)
            center = est.estimate @ x0
            covered[name] = (np.abs(center - target) <= half).astype(float)
            widths[name] = half

    _run(cfg, track_inference=True, track_ci=True, on_record=record)
    rows = []
    for name in cfg.algorithms:
        rate = float(np.mean(covered[name]))
        rows.append((name, cfg.n, "coverage", rate, math.sqrt(rate * (1.0 - rate) / cfg.replications)))
        rows.append((name, cfg.n, "mean_half_width", *_mean_se(widths[name])))
    return ExperimentResult("coverage", rows, covered, cfg)


def chi_square_ks(statistics, dof: int) -> float:
    """KS distance of test statistics to the chi-squared law with ``dof`` degrees of freedom."""
    return ks_distance(statistics, lambda v: chi_square_cdf(v, dof))
