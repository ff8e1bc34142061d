"""Experiment orchestration and the ``occulab`` command line.

Subcommands: simulate-fbm, constants, verify, limit-law, first-order, fdd,
zprocess.  Every run writes results.csv (fixed columns: experiment, d, H, n,
t, order, estimate, se, target, ratio), summary.json (config echo, summaries
and pass/fail per acceptance band) and manifest.json (timestamps, version and
sha256 digests of the outputs).  Timestamps live only in the manifest, so
re-running an identical config reproduces results.csv byte for byte, and the
worker pool only changes wall time, never numbers.

Exit codes: 0 success, 1 acceptance-band failure or inequality violations,
2 invalid input.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from . import __version__, checks, constants
from .fbm import FbmSpec, sample_cholesky, sample_circulant
from .functions import TestFunction
from .limitlab import (
    FddReport,
    MomentSummary,
    run_fdd,
    run_first_order,
    run_second_order,
    z_process_summary,
)
from .occupation import DEFAULT_GRID_CAP, DEFAULT_SPACING, OccupationConfig

__all__ = ["ExperimentConfig", "RunManifest", "run", "main", "replica_pool"]

CSV_COLUMNS = ("experiment", "d", "H", "n", "t", "order", "estimate", "se", "target", "ratio")

SEED_ENV_VAR = "OCCULAB_SEED"

COMMANDS = ("simulate-fbm", "constants", "verify", "limit-law", "first-order", "fdd", "zprocess")


@dataclass
class ExperimentConfig:
    command: str
    dim: int = 2
    hurst: float | None = None  # derived as 1/dim for the critical-case commands
    critical: bool = True
    function: str = "gaussdiff:sigma=2"
    n_list: list = field(default_factory=lambda: [8.0])
    t_list: list = field(default_factory=lambda: [1.0])
    replicas: int = 400
    spacing: float = DEFAULT_SPACING
    grid_cap: int = DEFAULT_GRID_CAP
    seed: int = 0
    output_dir: str = "occulab-out"
    workers: int = 1
    # command-specific knobs
    steps: int = 256            # simulate-fbm grid size
    sampler: str = "circulant"  # simulate-fbm sampler
    walk_steps: int = 10**6     # zprocess walk resolution
    check: str = "all"          # verify target
    trials: int = 10**6         # verify sweep size

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if self.replicas < 1:
            raise ValueError("replicas must be positive")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if self.spacing <= 0.0:
            raise ValueError("spacing must be positive")
        if self.command in ("limit-law", "first-order", "fdd"):
            derived = 1.0 / self.dim
            if self.hurst is not None and abs(self.hurst - derived) > 1e-12:
                raise ValueError(
                    f"{self.command} runs the critical case: hurst must be 1/dim"
                )
            self.hurst = derived
        elif self.hurst is None:
            self.hurst = 1.0 / self.dim if self.critical else 0.5
        if self.critical and abs(self.hurst * self.dim - 1.0) > 1e-12:
            raise ValueError("critical flag requires hurst * dim == 1")
        if not self.n_list:
            raise ValueError("n_list must be nonempty")
        if not self.t_list:
            raise ValueError("t_list must be nonempty")

    def test_function(self) -> TestFunction:
        return TestFunction.from_flag(self.function, self.dim)

    def occupation(self, n: float, t: float) -> OccupationConfig:
        return OccupationConfig(
            n=n, t=t, f=self.test_function(), spacing=self.spacing, grid_cap=self.grid_cap
        )


@dataclass
class RunManifest:
    config: dict
    version: str
    started_at: str
    finished_at: str
    outputs: dict  # filename -> sha256


# --------------------------------------------------------------------------
# config file: flat key = value lines
# --------------------------------------------------------------------------

def load_config_file(path: str | Path) -> dict:
    """Parse a flat TOML-style key = value file (numbers, strings, lists)."""
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line (expected key = value): {raw!r}")
        key, _, text = line.partition("=")
        values[key.strip().replace("-", "_")] = _parse_scalar(text.strip())
    return values


def _parse_scalar(text: str):
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        return [_parse_scalar(item.strip()) for item in inner.split(",")] if inner else []
    if text.startswith(("'", '"')) and text.endswith(text[0]) and len(text) >= 2:
        return text[1:-1]
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


# --------------------------------------------------------------------------
# deterministic serialization
# --------------------------------------------------------------------------

def _csv_cell(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    number = float(value)
    if math.isnan(number):
        return ""
    return repr(number)


def write_results_csv(path: Path, rows: list[tuple]) -> None:
    body = ",".join(CSV_COLUMNS) + "\n"
    for row in rows:
        body += ",".join(_csv_cell(cell) for cell in row) + "\n"
    _atomic_write(path, body)


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, newline="\n")
    os.replace(tmp, path)


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonify(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


def write_summary_json(path: Path, payload: dict) -> None:
    _atomic_write(path, json.dumps(_jsonify(payload), indent=2, sort_keys=True) + "\n")


def write_manifest(out_dir: Path, config: ExperimentConfig, started: str) -> None:
    digests = {}
    for name in ("results.csv", "summary.json", "path.csv"):
        target = out_dir / name
        if target.exists():
            digests[name] = hashlib.sha256(target.read_bytes()).hexdigest()
    manifest = RunManifest(
        config=dataclasses.asdict(config),
        version=__version__,
        started_at=started,
        finished_at=time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        outputs=digests,
    )
    write_summary_json(out_dir / "manifest.json", dataclasses.asdict(manifest))


# --------------------------------------------------------------------------
# worker pool
# --------------------------------------------------------------------------

@contextmanager
def replica_pool(workers: int):
    """map function over a process pool; plain map when workers == 1."""
    if workers <= 1:
        yield map
        return
    with Pool(processes=workers) as pool:
        yield pool.map


# --------------------------------------------------------------------------
# band evaluation
# --------------------------------------------------------------------------

def _band(name: str, passed: bool, observed, allowed) -> dict:
    return {
        "band": name,
        "passed": bool(passed),
        "observed": _jsonify(observed),
        "allowed": _jsonify(allowed),
    }


def second_order_bands(summaries: dict[tuple, MomentSummary]) -> list[dict]:
    """Bands for criterion-style second-order runs keyed by (n, t)."""
    bands = []
    for (n, t), s in sorted(summaries.items()):
        for order in (1, 3):
            m = s.moment(order)
            bands.append(
                _band(
                    f"odd_moment_{order}_within_3se[n={n:g},t={t:g}]",
                    abs(m.estimate) <= 3.0 * m.se,
                    m.estimate,
                    {"se": m.se, "max_abs": 3.0 * m.se},
                )
            )
        var_ratio = s.moment(2).estimate / s.moment(2).target
        bands.append(
            _band(
                f"variance_ratio[n={n:g},t={t:g}]",
                0.6 <= var_ratio <= 1.4,
                var_ratio,
                [0.6, 1.4],
            )
        )
        bands.append(
            _band(
                f"excess_kurtosis_above_1[n={n:g},t={t:g}]",
                s.kurtosis - 2.0 * s.kurtosis_se > 1.0,
                {"kurtosis": s.kurtosis, "se": s.kurtosis_se},
                "> 1 with 2 SE margin",
            )
        )
    by_t: dict[float, list] = {}
    for (n, t), s in summaries.items():
        by_t.setdefault(t, []).append((n, s))
    for t, runs in sorted(by_t.items()):
        runs.sort()
        for (n_lo, s_lo), (n_hi, s_hi) in zip(runs, runs[1:]):
            noise = 2.0 * math.hypot(s_lo.ks_se, s_hi.ks_se)
            bands.append(
                _band(
                    f"ks_non_increasing[n={n_lo:g}->{n_hi:g},t={t:g}]",
                    s_hi.ks_distance <= s_lo.ks_distance + noise,
                    {"ks_low_n": s_lo.ks_distance, "ks_high_n": s_hi.ks_distance},
                    {"slack_2se": noise},
                )
            )
    return bands


def first_order_bands(summaries: dict[tuple, MomentSummary]) -> list[dict]:
    bands = []
    for (n, t), s in sorted(summaries.items()):
        m = s.moment(1)
        rel = abs(m.estimate - m.target) / m.target
        bands.append(
            _band(f"mean_within_15pct[n={n:g},t={t:g}]", rel <= 0.15, m.estimate, {"target": m.target, "rel_tol": 0.15})
        )
    by_t: dict[float, list] = {}
    for (n, t), s in summaries.items():
        by_t.setdefault(t, []).append((n, s))
    for t, runs in sorted(by_t.items()):
        runs.sort()
        for (n_lo, s_lo), (n_hi, s_hi) in zip(runs, runs[1:]):
            bands.append(
                _band(
                    f"ks_decreasing[n={n_lo:g}->{n_hi:g},t={t:g}]",
                    s_hi.ks_distance < s_lo.ks_distance,
                    {"ks_low_n": s_lo.ks_distance, "ks_high_n": s_hi.ks_distance},
                    "strictly below",
                )
            )
    return bands


def fdd_bands(report: FddReport) -> list[dict]:
    bands = []
    k = len(report.intervals)
    for i in range(k):
        for j in range(i + 1, k):
            z = abs(report.cross_cov[i, j]) / report.cross_cov_se[i, j]
            bands.append(
                _band(
                    f"cross_cov_within_4se[{report.intervals[i]}x{report.intervals[j]}]",
                    z <= 4.0,
                    report.cross_cov[i, j],
                    {"se": report.cross_cov_se[i, j], "max_abs_z": 4.0},
                )
            )
    for (a, b), s in zip(report.intervals, report.summaries):
        ratio = s.moment(2).estimate / s.moment(2).target
        bands.append(
            _band(f"increment_variance_ratio[({a:g},{b:g}]]", 0.6 <= ratio <= 1.4, ratio, [0.6, 1.4])
        )
    if k >= 2:
        v = [s.moment(2).estimate / (b - a) for (a, b), s in zip(report.intervals, report.summaries)]
        for i in range(k - 1):
            ratio = v[i + 1] / v[i]
            bands.append(
                _band(
                    f"variance_ratio_consecutive[{i}->{i+1}]",
                    0.6 <= ratio <= 1.4,
                    ratio,
                    [0.6, 1.4],
                )
            )
    return bands


def zprocess_bands(summaries: dict[float, MomentSummary]) -> list[dict]:
    bands = []
    for t, s in sorted(summaries.items()):
        m = s.moment(1)
        rel = abs(m.estimate - t) / t
        bands.append(_band(f"mean_within_5pct[t={t:g}]", rel <= 0.05, m.estimate, {"target": t, "rel_tol": 0.05}))
        bands.append(_band(f"ks_below_0.05[t={t:g}]", s.ks_distance < 0.05, s.ks_distance, 0.05))
    return bands


# --------------------------------------------------------------------------
# command bodies
# --------------------------------------------------------------------------

def _summary_rows(experiment, d, hurst, n, t, s: MomentSummary, kurt_target=None) -> list[tuple]:
    rows = []
    for m in s.moments:
        ratio = (
            m.estimate / m.target
            if (m.target and not math.isnan(m.target))
            else None
        )
        rows.append((experiment, d, hurst, n, t, str(m.order), m.estimate, m.se, m.target, ratio))
    rows.append((experiment, d, hurst, n, t, "ks", s.ks_distance, s.ks_se, None, None))
    rows.append((experiment, d, hurst, n, t, "kurtosis", s.kurtosis, s.kurtosis_se, kurt_target, None))
    return rows


def _run_simulate_fbm(config: ExperimentConfig, out: Path) -> tuple[list, dict, int]:
    spec = FbmSpec(
        hurst=config.hurst,
        dim=config.dim,
        step=config.spacing,
        n_steps=config.steps,
        critical=config.critical,
    )
    sampler = sample_cholesky if config.sampler == "cholesky" else sample_circulant
    path = sampler(spec, config.seed)
    lines = ["t," + ",".join(f"x_{i+1}" for i in range(spec.dim))]
    for k in range(spec.n_steps + 1):
        lines.append(",".join([repr(float(path.times[k]))] + [repr(float(v)) for v in path.values[k]]))
    _atomic_write(out / "path.csv", "\n".join(lines) + "\n")
    rows = [
        ("simulate-fbm", config.dim, config.hurst, None, None, "terminal_value_coord1",
         float(path.values[-1, 0]), None, None, None)
    ]
    summary = {
        "spec": dataclasses.asdict(spec),
        "sampler": config.sampler,
        "terminal_values": path.values[-1].tolist(),
    }
    return rows, summary, 0


def _run_constants(config: ExperimentConfig, out: Path) -> tuple[list, dict, int]:
    f = config.test_function()
    limit = constants.c_fd(f)
    gamma_residuals = {str(d): constants.gamma_identity_check(d) for d in range(1, 7)}
    payload = {
        "c_fd": limit.c_fd,
        "c_fd_squared": limit.c_fd_squared,
        "quadrature_error_estimate": limit.quadrature_error_estimate,
        "bracket": None,
        "norm1_residual": None,
        "gamma_residuals": gamma_residuals,
    }
    if f.dim == 2:
        br = constants.bracket(f)
        payload["bracket"] = br.value
        payload["bracket_error_estimate"] = br.quadrature_error_estimate
        payload["norm1_residual"] = abs(limit.c_fd_squared - br.value) / max(
            limit.c_fd_squared, 1e-12
        )
    print(json.dumps(_jsonify(payload), indent=2, sort_keys=True))
    rows = [
        ("constants", config.dim, None, None, None, "c_fd_squared", limit.c_fd_squared,
         limit.quadrature_error_estimate, None, None),
    ]
    if payload["bracket"] is not None:
        rows.append(("constants", config.dim, None, None, None, "bracket", payload["bracket"],
                     payload["bracket_error_estimate"], limit.c_fd_squared, None))
    for d_str, res in gamma_residuals.items():
        rows.append(("constants", int(d_str), None, None, None, "gamma_identity_residual",
                     res, None, 0.0, None))
    return rows, payload, 0


def _run_verify(config: ExperimentConfig, out: Path) -> tuple[list, dict, int]:
    wanted = config.check
    reports = []
    if wanted in ("all", "cov"):
        reports.append(checks.check_cov_bounds(config.trials, config.seed))
    if wanted in ("all", "taylor"):
        reports.append(checks.check_taylor_bound())
    if wanted in ("all", "lnd"):
        reports.append(checks.check_lnd(n_points=3, trials=min(config.trials, 10**5), seed=config.seed))
        reports.append(checks.check_lnd(n_points=4, trials=min(config.trials, 10**5), seed=config.seed))
    if wanted in ("all", "lower"):
        reports.append(checks.check_lower_inequality())
    if not reports:
        raise ValueError(f"unknown check {wanted!r} (use all|cov|taylor|lnd|lower)")
    print(json.dumps(_jsonify([dataclasses.asdict(r) for r in reports]), indent=2, sort_keys=True))
    rows = [
        ("verify", None, None, r.trials, None, r.check_name, r.violations, None, 0.0, None)
        for r in reports
    ]
    summary = {"reports": [dataclasses.asdict(r) for r in reports]}
    total = sum(r.violations for r in reports)
    return rows, summary, 1 if total else 0


def _run_limit_law(config: ExperimentConfig, out: Path) -> tuple[list, dict, int]:
    f = config.test_function()
    scale = constants.c_fd(f).c_fd
    summaries: dict[tuple, MomentSummary] = {}
    rows: list[tuple] = []
    with replica_pool(config.workers) as map_fn:
        for n in config.n_list:
            for t in config.t_list:
                occ = config.occupation(n, t)
                s = run_second_order(occ, config.replicas, config.seed, scale=scale, map_fn=map_fn)
                summaries[(n, t)] = s
                rows.extend(_summary_rows("limit-law", config.dim, config.hurst, n, t, s, kurt_target=3.0))
    bands = second_order_bands(summaries)
    summary = {
        "scale_c_fd": scale,
        "runs": {f"n={n:g},t={t:g}": s for (n, t), s in summaries.items()},
        "bands": bands,
        "passed": all(b["passed"] for b in bands),
    }
    return rows, summary, 0 if summary["passed"] else 1


def _run_first_order(config: ExperimentConfig, out: Path) -> tuple[list, dict, int]:
    summaries: dict[tuple, MomentSummary] = {}
    rows: list[tuple] = []
    with replica_pool(config.workers) as map_fn:
        for n in config.n_list:
            for t in config.t_list:
                occ = config.occupation(n, t)
                s = run_first_order(occ, config.replicas, config.seed, map_fn=map_fn)
                summaries[(n, t)] = s
                rows.extend(_summary_rows("first-order", config.dim, config.hurst, n, t, s, kurt_target=6.0))
    bands = first_order_bands(summaries)
    summary = {
        "runs": {f"n={n:g},t={t:g}": s for (n, t), s in summaries.items()},
        "bands": bands,
        "passed": all(b["passed"] for b in bands),
    }
    return rows, summary, 0 if summary["passed"] else 1


def _run_fdd(config: ExperimentConfig, out: Path) -> tuple[list, dict, int]:
    boundaries = [float(t) for t in config.t_list]
    if len(boundaries) < 2:
        raise ValueError("fdd needs at least two boundaries in t_list")
    intervals = list(zip(boundaries, boundaries[1:]))
    f = config.test_function()
    scale = constants.c_fd(f).c_fd
    rows: list[tuple] = []
    summaries = {}
    all_bands: list[dict] = []
    with replica_pool(config.workers) as map_fn:
        for n in config.n_list:
            occ = config.occupation(n, boundaries[-1])
            report = run_fdd(occ, intervals, config.replicas, config.seed, scale=scale, map_fn=map_fn)
            for (a, b), s in zip(report.intervals, report.summaries):
                rows.extend(
                    _summary_rows("fdd", config.dim, config.hurst, n, f"{a:g}..{b:g}", s)
                )
            for i in range(len(intervals)):
                for j in range(i + 1, len(intervals)):
                    rows.append(
                        ("fdd", config.dim, config.hurst, n, None, f"cross_cov_{i}_{j}",
                         report.cross_cov[i, j], report.cross_cov_se[i, j], 0.0, None)
                    )
            summaries[f"n={n:g}"] = report
            all_bands.extend(fdd_bands(report))
    summary = {
        "scale_c_fd": scale,
        "runs": summaries,
        "bands": all_bands,
        "passed": all(b["passed"] for b in all_bands),
    }
    return rows, summary, 0 if summary["passed"] else 1


def _run_zprocess(config: ExperimentConfig, out: Path) -> tuple[list, dict, int]:
    summaries: dict[float, MomentSummary] = {}
    rows: list[tuple] = []
    with replica_pool(config.workers) as map_fn:
        for t in config.t_list:
            s = z_process_summary(
                float(t), config.walk_steps, config.replicas, config.seed, map_fn=map_fn
            )
            summaries[float(t)] = s
            rows.extend(_summary_rows("zprocess", None, None, None, t, s, kurt_target=6.0))
    bands = zprocess_bands(summaries)
    summary = {
        "walk_steps": config.walk_steps,
        "runs": {f"t={t:g}": s for t, s in summaries.items()},
        "bands": bands,
        "passed": all(b["passed"] for b in bands),
    }
    return rows, summary, 0 if summary["passed"] else 1


_COMMAND_BODIES = {
    "simulate-fbm": _run_simulate_fbm,
    "constants": _run_constants,
    "verify": _run_verify,
    "limit-law": _run_limit_law,
    "first-order": _run_first_order,
    "fdd": _run_fdd,
    "zprocess": _run_zprocess,
}


def run(config: ExperimentConfig) -> int:
    """Execute one experiment: write results.csv, summary.json, manifest.json."""
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, summary, code = _COMMAND_BODIES[config.command](config, out)
    write_results_csv(out / "results.csv", rows)
    payload = {"experiment": config.command, "config": dataclasses.asdict(config)}
    payload.update(summary)
    write_summary_json(out / "summary.json", payload)
    write_manifest(out, config, started)
    return code


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip() != ""]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="occulab",
        description="Occupation-time limit-law laboratory for critical fractional Brownian motion",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file; flags override it")
        p.add_argument("--dim", type=int)
        p.add_argument("--hurst", type=float)
        p.add_argument("--critical", action="store_true", default=None)
        p.add_argument("--function", help="gaussdiff:sigma=2 or gauss")
        p.add_argument("--n", dest="n_list", type=_float_list, help="comma separated")
        p.add_argument("--t", dest="t_list", type=_float_list, help="comma separated")
        p.add_argument("--replicas", type=int)
        p.add_argument("--spacing", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--workers", type=int)
        p.add_argument("--steps", type=int)
        p.add_argument("--sampler", choices=("circulant", "cholesky"))
        p.add_argument("--walk-steps", dest="walk_steps", type=int)
        p.add_argument("--check", choices=("all", "cov", "taylor", "lnd", "lower"))
        p.add_argument("--trials", type=int)
    return parser


def build_config(argv: list[str]) -> ExperimentConfig:
    args = vars(_build_parser().parse_args(argv))
    file_path = args.pop("config", None)
    merged: dict = {}
    if file_path:
        merged.update(load_config_file(file_path))
    for key, value in args.items():
        if value is not None:
            merged[key] = value
    if "seed" not in merged and os.environ.get(SEED_ENV_VAR):
        merged["seed"] = int(os.environ[SEED_ENV_VAR])
    merged.setdefault("command", args["command"])
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(merged) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**merged)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = build_config(argv)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    try:
        return run(config)
    except (ValueError, constants.DivergentIntegral, constants.UnsupportedDimension) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
