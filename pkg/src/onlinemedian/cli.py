"""Command-line interface.

    onlinemedian estimate data.csv --algorithm wasn --direction 1,0,0 --test-point 0,0,0
    onlinemedian simulate levels bundled:levels_structure_i --out runs/levels
    onlinemedian weiszfeld data.csv
    onlinemedian rerun runs/levels/manifest.json --out runs/again

Exit codes: 0 success, 2 input/config error, 3 I/O error, 4 oracle
non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import re
import sys
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Iterator

import numpy as np
import yaml

from . import __version__
from .errors import ConfigurationError, NonConvergenceError, OnlineMedianError
from .estimators import ALGORITHMS, HYPERPARAMETERS, default_hyperparameters, make_estimator
from .inference import OnlineInference
from .simulation import (
    ExperimentConfig,
    chi_square_ks,
    run_coverage_experiment,
    run_level_experiment,
    run_mse_experiment,
    weiszfeld,
)

EXIT_OK, EXIT_INPUT, EXIT_IO, EXIT_NONCONVERGENCE = 0, 2, 3, 4
DEFAULT_SEED = 20240601

_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_HYPER_FLAGS = ("gamma", "c_gamma", "c_gamma_prime", "omega", "beta", "c_beta")


class InputError(Exception):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


def _parse_number(text: str, row: int) -> float:
    text = text.strip()
    if not _NUMBER.match(text):
        raise InputError(f"not a decimal number: {text!r}", row)
    return float(text)


def _detect_format(path: Path, fmt: str) -> str:
    if fmt != "auto":
        return fmt
    return "jsonl" if path.suffix.lower() in (".jsonl", ".ndjson") else "csv"


def read_rows(path: Path, fmt: str = "auto") -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(row_number, observation)`` one line at a time.

    CSV rows may be preceded by one header line; JSONL lines hold a JSON
    array of numbers. Row numbers are 1-based physical line numbers.
    """
    fmt = _detect_format(path, fmt)
    p = None
    with open(path, newline="", encoding="utf-8") as fh:
        if fmt == "jsonl":
            for row, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    values = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise InputError(f"invalid JSON ({exc.msg})", row) from exc
                if not isinstance(values, list) or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
                ):
                    raise InputError("expected a JSON array of numbers", row)
                x = np.array(values, dtype=float)
                p = _check_row(x, p, row)
                yield row, x
        else:
            for row, fields in enumerate(csv.reader(fh), start=1):
                if not fields or all(not f.strip() for f in fields):
                    continue
                if row == 1 and not all(_NUMBER.match(f.strip()) for f in fields):
                    if any(_NUMBER.match(f.strip()) for f in fields):
                        raise InputError("mixed header/numeric first row", row)
                    continue
                x = np.array([_parse_number(f, row) for f in fields])
                p = _check_row(x, p, row)
                yield row, x


def _check_row(x: np.ndarray, p: int | None, row: int) -> int:
    if not np.all(np.isfinite(x)):
        raise InputError("non-finite value", row)
    if p is None:
        if x.size < 1:
            raise InputError("empty observation", row)
        return x.size
    if x.size != p:
        raise InputError(f"dimension mismatch: expected {p} values, got {x.size}", row)
    return p


def _parse_vector(text: str, name: str) -> list[float]:
    try:
        return [_parse_number(t, 0) for t in text.split(",")]
    except InputError as exc:
        raise ConfigurationError(f"expected comma-separated reals, got {text!r}", name) from exc


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _prepare_out(out: str | None) -> Path | None:
    if out is None:
        return None
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    probe = path / ".write-test"
    probe.write_text("")
    probe.unlink()
    return path


def _write_manifest(out: Path, command: str, params: dict, started: str, inputs: list[Path]) -> None:
    manifest = {
        "command": command,
        "parameters": params,
        "seed": params.get("seed"),
        "version": __version__,
        "started_at": started,
        "finished_at": _now(),
        "inputs": [{"path": str(p), "sha256": _sha256(p)} for p in inputs],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def run_estimate(params: dict) -> dict:
    """One pass over the input; returns the result document."""
    path = Path(params["input"])
    name = params["algorithm"]
    hyper = params["hyperparameters"]
    directions = [np.asarray(d, dtype=float) for d in params["directions"]]
    test_point = params["test_point"]
    level = params["level"]
    every = params["checkpoint_every"]
    rng = np.random.default_rng(params["seed"])

    est = inf = None
    trace: list[list[float]] = []
    for row, x in read_rows(path, params["format"]):
        if est is None:
            p = x.size
            for i, d in enumerate(directions):
                if d.size != p:
                    raise ConfigurationError(f"expected {p} entries", f"direction[{i}]")
            if test_point is not None and len(test_point) != p:
                raise ConfigurationError(f"expected {p} entries", "test_point")
            m0 = x if params["init"] is None else np.asarray(params["init"], dtype=float)
            if m0.size != p:
                raise ConfigurationError(f"expected {p} entries", "init")
            est = make_estimator(name, m0.copy(), **hyper)
            inf = OnlineInference(p, track_ci=bool(directions))
        z = rng.standard_normal(x.size)
        m_prev = est.estimate
        est.step(x, z)
        inf.update(x, m_prev, z)
        if every and est.n % every == 0:
            trace.append([est.n, *est.estimate.tolist()])
    if est is None:
        raise InputError("input holds no observations")

    m = est.estimate
    result = {
        "algorithm": name,
        "hyperparameters": {**default_hyperparameters(name), **hyper},
        "n": est.n,
        "p": int(m.size),
        "skipped": int(est.skipped),
        "estimate": m.tolist(),
        "confidence_intervals": [],
        "test": None,
    }
    for d in directions:
        ci = inf.confidence_interval(m, d, level)
        result["confidence_intervals"].append({
            "direction": d.tolist(), "level": level, "center": ci.center,
            "half_width": ci.half_width, "lower": ci.lower, "upper": ci.upper,
        })
    if test_point is not None:
        res = inf.test(m, np.asarray(test_point, dtype=float), float(f"{1.0 - level:.12g}"))
        result["test"] = {
            "point": list(test_point), "statistic": res.statistic, "dof": res.dof,
            "p_value": res.p_value, "reject": bool(res.reject), "alpha": res.level,
        }
    if every and (not trace or trace[-1][0] != est.n):
        trace.append([est.n, *m.tolist()])
    result["_trace"] = trace
    return result


def _estimate_outputs(params: dict, out: Path | None, started: str) -> int:
    result = run_estimate(params)
    trace = result.pop("_trace")
    text = _dump(result)
    sys.stdout.write(text)
    if out is not None:
        (out / "result.json").write_text(text)
        if params["checkpoint_every"]:
            with open(out / "trace.csv", "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["n"] + [f"m{i + 1}" for i in range(result["p"])])
                for row in trace:
                    writer.writerow([row[0]] + [repr(v) for v in row[1:]])
        _write_manifest(out, "estimate", params, started, [Path(params["input"])])
    return EXIT_OK


def load_config(source: str) -> dict:
    """Read a JSON/YAML experiment config; ``bundled:<name>`` selects a shipped one."""
    if source.startswith("bundled:"):
        name = source.split(":", 1)[1]
        res = resources.files("onlinemedian") / "configs" / f"{name}.yaml"
        if not res.is_file():
            raise ConfigurationError(f"no bundled config named {name!r}", "config")
        text = res.read_text()
    else:
        text = Path(source).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"unparseable config ({exc})", "config") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a mapping", "config")
    return data


def _summary(mode: str, result, cfg: ExperimentConfig) -> str:
    lines = [f"mode: {mode}", f"p={cfg.p} n={cfg.n} replications={cfg.replications} "
             f"init_radius={cfg.init_radius} structure={cfg.structure.kind} seed={cfg.seed}", ""]
    final = [r for r in result.rows if r[1] == cfg.n]
    for alg, _, agg, val, se in final:
        extra = ""
        if mode == "levels":
            extra = f"  ks_to_chi2={chi_square_ks(result.statistics[alg], cfg.p):.4f}"
        lines.append(f"{alg:>5}  {agg}={val:.6g} (se {se:.2g}){extra}")
    return "\n".join(lines) + "\n"


def _simulate_outputs(params: dict, out: Path, started: str) -> int:
    mode = params["mode"]
    cfg = ExperimentConfig.from_dict(params["config"])
    runner = {"mse": run_mse_experiment, "levels": run_level_experiment, "coverage": run_coverage_experiment}[mode]
    result = runner(cfg)
    (out / "results.csv").write_text(result.to_csv())
    if mode != "mse":
        with open(out / "statistics.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["algorithm", "replication", "value"])
            for alg in cfg.algorithms:
                for i, v in enumerate(result.statistics[alg]):
                    writer.writerow([alg, i, repr(float(v))])
    (out / "summary.txt").write_text(_summary(mode, result, cfg))
    _write_manifest(out, "simulate", params, started, [])
    sys.stdout.write(_summary(mode, result, cfg))
    return EXIT_OK


def _weiszfeld_outputs(params: dict, out: Path | None, started: str) -> int:
    points = np.array([x for _, x in read_rows(Path(params["input"]), params["format"])])
    if len(points) == 0:
        raise InputError("input holds no observations")
    code = EXIT_OK
    try:
        res = weiszfeld(points, params["tol"], params["max_iter"], full_output=True)
        doc = {"median": res.point.tolist(), "n": len(points), "n_iter": res.n_iter,
               "grad_norm": res.grad_norm, "converged": True}
    except NonConvergenceError as exc:
        doc = {"median": np.asarray(exc.last_iterate).tolist(), "n": len(points), "n_iter": exc.n_iter,
               "grad_norm": exc.grad_norm, "converged": False}
        code = EXIT_NONCONVERGENCE
    text = _dump(doc)
    sys.stdout.write(text)
    if out is not None:
        (out / "result.json").write_text(text)
        _write_manifest(out, "weiszfeld", params, started, [Path(params["input"])])
    return code


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="onlinemedian", description="Online geometric median estimation.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="stream a CSV/JSONL file through an online estimator")
    est.add_argument("input")
    est.add_argument("--format", choices=("auto", "csv", "jsonl"), default="auto")
    est.add_argument("--algorithm", choices=ALGORITHMS, default="wasn")
    for flag in _HYPER_FLAGS:
        est.add_argument("--" + flag.replace("_", "-"), type=float, default=None, dest=flag)
    est.add_argument("--init", default=None, help="initial point, comma-separated (default: first row)")
    est.add_argument("--direction", action="append", default=[], help="CI direction, comma-separated; repeatable")
    est.add_argument("--test-point", default=None, help="hypothesized median, comma-separated")
    est.add_argument("--level", type=float, default=0.95, help="CI level; the test uses alpha = 1 - level")
    est.add_argument("--seed", type=int, default=DEFAULT_SEED)
    est.add_argument("--checkpoint-every", type=int, default=0)
    est.add_argument("--out", default=None)

    sim = sub.add_parser("simulate", help="run a Monte-Carlo experiment from a config file")
    sim.add_argument("mode", choices=("mse", "levels", "coverage"))
    sim.add_argument("config", help="JSON/YAML path or bundled:<name>")
    sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    sim.add_argument("--out", required=True)

    wz = sub.add_parser("weiszfeld", help="offline sample geometric median")
    wz.add_argument("input")
    wz.add_argument("--format", choices=("auto", "csv", "jsonl"), default="auto")
    wz.add_argument("--tol", type=float, default=1e-10)
    wz.add_argument("--max-iter", type=int, default=10_000)
    wz.add_argument("--out", default=None)

    rr = sub.add_parser("rerun", help="repeat a run from its manifest.json")
    rr.add_argument("manifest")
    rr.add_argument("--out", default=None)
    return parser


def _resolve(args: argparse.Namespace) -> dict:
    if args.command == "estimate":
        hyper = {k: getattr(args, k) for k in _HYPER_FLAGS if getattr(args, k) is not None}
        bad = sorted(set(hyper) - set(HYPERPARAMETERS[args.algorithm]))
        if bad:
            raise ConfigurationError(f"not a hyperparameter of {args.algorithm}", bad[0].replace("_", "-"))
        if not 0.0 < args.level < 1.0:
            raise ConfigurationError("must lie in (0, 1)", "level")
        if args.checkpoint_every < 0:
            raise ConfigurationError("must be non-negative", "checkpoint-every")
        return {
            "input": str(Path(args.input).resolve()), "format": args.format, "algorithm": args.algorithm,
            "hyperparameters": hyper,
            "init": None if args.init is None else _parse_vector(args.init, "init"),
            "directions": [_parse_vector(d, f"direction[{i}]") for i, d in enumerate(args.direction)],
            "test_point": None if args.test_point is None else _parse_vector(args.test_point, "test-point"),
            "level": args.level, "seed": args.seed, "checkpoint_every": args.checkpoint_every,
        }
    if args.command == "simulate":
        data = load_config(args.config)
        if args.seed is not None:
            data["seed"] = args.seed
        data.pop("mode", None)
        cfg = ExperimentConfig.from_dict(data)
        return {"mode": args.mode, "config": cfg.to_dict(), "seed": cfg.seed}
    return {"input": str(Path(args.input).resolve()), "format": args.format, "tol": args.tol, "max_iter": args.max_iter}


def _dispatch(command: str, params: dict, out_arg: str | None) -> int:
    started = _now()
    out = _prepare_out(out_arg)
    if command == "estimate":
        return _estimate_outputs(params, out, started)
    if command == "simulate":
        return _simulate_outputs(params, out, started)
    return _weiszfeld_outputs(params, out, started)


def _rerun(manifest_path: str, out: str | None) -> int:
    manifest = json.loads(Path(manifest_path).read_text())
    for item in manifest.get("inputs", []):
        if _sha256(Path(item["path"])) != item["sha256"]:
            raise InputError(f"input {item['path']} changed since the recorded run")
    command = manifest["command"]
    if command == "simulate" and out is None:
        raise ConfigurationError("simulate reruns need --out", "out")
    return _dispatch(command, manifest["parameters"], out)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "rerun":
            return _rerun(args.manifest, args.out)
        return _dispatch(args.command, _resolve(args), args.out)
    except (InputError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OnlineMedianError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
