"""Experiment configuration, seeded trial execution and CSV emission.

Trial i of every grid cell uses seed ``base_seed + i``.  Metric rows go to
``<experiment>.csv``; wall times go to ``<experiment>_times.csv`` so reruns
can be compared byte for byte.  Each CSV opens with ``#`` comment lines
carrying the experiment name, config hash and base seed, then a header row.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
import os
import re
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .empirical import FunctionalClass, loglog_slope, process_eval
from .ensembles import Ensemble, RngState, psi2_estimate, sample_matrix
from .geometry import SetKind, gaussian_width, parse_set, r_star, rstar_closed_form
from .linalg import apply
from .lp import FEAS_TOL, OPT_TOL, PIVOT_TOL
from .polytope import MARGIN_TOL, neighborly_scan
from .recover import (SUCCESS_TOL, SparseVector, approx_reconstruct, exact_recover,
                      random_l1_sphere_point, random_l1_vertex)

EXPERIMENTS = ("ensemble-check", "width", "rstar", "empirical", "recover", "phase", "neighborly")
GRID_AXES = ("n", "k", "m", "theta", "epsilon")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``line`` points into the JSON text when known."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass
class ExperimentConfig:
    experiment: str
    ensemble: str = "gaussian"
    n: list = field(default_factory=lambda: [64])
    k: list = field(default_factory=lambda: [32])
    m: list = field(default_factory=lambda: [4])
    theta: list = field(default_factory=lambda: [0.5])
    epsilon: list = field(default_factory=lambda: [1e-4])
    set: str = "l1"
    trials: int = 10
    seed: int = 0
    c_norm: float = 1.0
    alpha: float | None = None  # psi_2 constant override; defaults to the ensemble's
    samples: int = 2000
    mode: str = "exact"
    symmetric: bool = False
    sampled: int | None = None
    strict_lt: bool = False
    max_iters: int = 10_000
    out: str = "results"

    def __post_init__(self):
        for axis in GRID_AXES:
            value = getattr(self, axis)
            if not isinstance(value, (list, tuple)):
                value = [value]
            setattr(self, axis, list(value))
        self.validate()

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        try:
            Ensemble.of(self.ensemble)
        except ValueError:
            raise ConfigError(f"unknown ensemble {self.ensemble!r}") from None
        for axis in GRID_AXES:
            grid = getattr(self, axis)
            if not grid:
                raise ConfigError(f"grid {axis!r} is empty")
            for v in grid:
                if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
                    raise ConfigError(f"grid {axis!r} needs positive numbers, got {v!r}")
            if axis in ("n", "k", "m") and any(int(v) != v for v in grid):
                raise ConfigError(f"grid {axis!r} needs integers")
        if not isinstance(self.trials, int) or isinstance(self.trials, bool) or self.trials < 0:
            raise ConfigError("trials must be a nonnegative integer")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.mode not in ("exact", "approx"):
            raise ConfigError("mode must be 'exact' or 'approx'")
        if self.alpha is not None and not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if self.samples < 2:
            raise ConfigError("samples must be at least 2")
        if self.sampled is not None and self.sampled < 1:
            raise ConfigError("sampled must be a positive query count")
        try:
            parse_set(self.set, 2)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def canonical_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        """Hash of every setting except the output directory."""
        settings = asdict(self)
        del settings["out"]
        text = json.dumps(settings, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def cells(self):
        axes = {a: [int(v) if a in ("n", "k", "m") else float(v) for v in getattr(self, a)]
                for a in CELL_AXES[self.experiment]}
        for combo in itertools.product(*axes.values()):
            yield dict(zip(axes, combo))


CELL_AXES = {
    "ensemble-check": ("n",),
    "width": ("n",),
    "rstar": ("n", "k", "theta"),
    "empirical": ("n", "k"),
    "recover": ("n", "k", "m"),
    "phase": ("n", "k", "m"),
    "neighborly": ("n", "k", "m"),
}


def _line_of_key(text: str, key: str) -> int | None:
    for lineno, line in enumerate(text.splitlines(), 1):
        if re.search(r'"%s"\s*:' % re.escape(key), line):
            return lineno
    return None


def parse_config(text: str, overrides: dict | None = None,
                 expect: str | None = None) -> ExperimentConfig:
    """Build a config from JSON text, reporting the offending line on errors.

    ``overrides`` (None values skipped) take precedence over the text.  With
    ``expect`` set, a config naming a different experiment is rejected.
    """
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, exc.lineno) from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object", 1)
    known = {f.name for f in fields(ExperimentConfig)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", _line_of_key(text, key))
    if expect is not None and raw.get("experiment", expect) != expect:
        raise ConfigError(f"config is for {raw['experiment']!r}, not {expect!r}",
                          _line_of_key(text, "experiment"))
    merged = {**raw, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    if "experiment" not in merged:
        raise ConfigError("missing required key 'experiment'", 1)
    try:
        return ExperimentConfig(**merged)
    except ConfigError as exc:
        bad = next((k for k in raw if k in str(exc)), None)
        if bad is not None and exc.line is None and bad not in (overrides or {}):
            raise ConfigError(str(exc), _line_of_key(text, bad)) from None
        raise
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# --- trials -----------------------------------------------------------------
# Each trial function returns the metric columns for one (cell, trial) pair.

def _trial_ensemble_check(cfg, cell, seed):
    rng = RngState(seed)
    n = cell["n"]
    X = sample_matrix(Ensemble.of(cfg.ensemble), cfg.samples, n, rng.split(0))
    d = rng.split(1).normal(n)
    proj = apply(X, d / np.linalg.norm(d))
    sq = proj**2
    return {"empirical_moment": float(sq.mean()),
            "std_err": float(sq.std(ddof=1) / math.sqrt(cfg.samples)),
            "psi2_estimate": psi2_estimate(proj)}


def _trial_width(cfg, cell, seed):
    est = gaussian_width(parse_set(cfg.set, cell["n"]), cfg.samples, RngState(seed))
    return {"value": est.value, "std_err": est.std_err}


def _trial_rstar(cfg, cell, seed):
    T = parse_set(cfg.set, cell["n"])
    alpha = cfg.alpha if cfg.alpha is not None else Ensemble.of(cfg.ensemble).alpha
    res = r_star(cell["theta"], T, cell["k"], alpha, cfg.c_norm, cfg.samples, RngState(seed))
    closed = math.nan
    if T.kind is SetKind.L1_BALL and T.param == 1.0:
        closed = rstar_closed_form(cell["theta"], cell["k"], cell["n"], alpha)
    elif T.kind is SetKind.WEAK_LP:
        closed = rstar_closed_form(cell["theta"], cell["k"], cell["n"], alpha, T.param)
    return {"value": res.value, "exhausted": int(res.exhausted), "closed_form": closed}


def _trial_empirical(cfg, cell, seed):
    gamma = sample_matrix(Ensemble.of(cfg.ensemble), cell["k"], cell["n"], RngState(seed))
    rep = process_eval(FunctionalClass.canonical(cell["n"]), gamma)
    return {"sup_abs_Z": rep.sup_abs_Z, "argmax": rep.argmax}


def _trial_recover(cfg, cell, seed):
    rng = RngState(seed)
    n, k, m = cell["n"], cell["k"], cell["m"]
    gamma = sample_matrix(Ensemble.of(cfg.ensemble), k, n, rng.split(0))
    if cfg.mode == "exact":
        if m > n:
            raise ConfigError(f"m={m} exceeds n={n}")
        res = exact_recover(gamma, SparseVector.random(n, m, rng.split(1)))
        return {"outcome": "success" if res.success else "failure",
                "error": res.error, "residual": res.residual}
    eps = cfg.epsilon[0]
    v = random_l1_sphere_point(n, rng.split(1))
    rec = approx_reconstruct(gamma, apply(gamma, v), parse_set("l1", n), eps, cfg.max_iters,
                             t0=random_l1_vertex(n, rng.split(2)))
    return {"outcome": "converged" if rec.residual <= eps else "max_iters",
            "error": float(np.linalg.norm(rec.t - v)), "residual": rec.residual}


def _trial_neighborly(cfg, cell, seed):
    rng = RngState(seed)
    gamma = sample_matrix(Ensemble.of(cfg.ensemble), cell["k"], cell["n"], rng.split(0))
    v = neighborly_scan(gamma, cell["m"], cfg.symmetric, cfg.sampled, rng.split(1), cfg.strict_lt)
    cex = ""
    if v.counterexample is not None:
        cex = " ".join([f"+{i}" for i in v.counterexample.i_plus]
                       + [f"-{i}" for i in v.counterexample.i_minus])
    return {"verdict": "neighborly" if v.neighborly else "counterexample",
            "counterexample": cex, "queries_checked": v.queries_checked,
            "degenerate": v.degenerate}


TRIALS = {
    "ensemble-check": (_trial_ensemble_check, ("empirical_moment", "std_err", "psi2_estimate")),
    "width": (_trial_width, ("value", "std_err")),
    "rstar": (_trial_rstar, ("value", "exhausted", "closed_form")),
    "empirical": (_trial_empirical, ("sup_abs_Z", "argmax")),
    "recover": (_trial_recover, ("outcome", "error", "residual")),
    "phase": (_trial_recover, ("outcome", "error", "residual")),
    "neighborly": (_trial_neighborly, ("verdict", "counterexample", "queries_checked", "degenerate")),
}


def _run_task(args):
    cfg, cell, trial = args
    start = time.perf_counter()
    metrics = TRIALS[cfg.experiment][0](cfg, cell, cfg.seed + trial)
    return metrics, 1000.0 * (time.perf_counter() - start)


# --- output -----------------------------------------------------------------

def fmt(value) -> str:
    """Render a CSV cell: reals with 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(value)


def write_csv(path, header: list, rows, comments: dict):
    """Write comment lines, a header and rows; ``path`` may be an open text stream."""
    if hasattr(path, "write"):
        _emit(path, header, rows, comments)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _emit(fh, header, rows, comments)


def _emit(fh, header, rows, comments):
    for key, value in comments.items():
        fh.write(f"# {key}={value}\r\n")
    writer = csv.writer(fh, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])


def read_csv(path) -> tuple[dict, list, list]:
    """Return (comment metadata, header, rows) of a harness CSV."""
    meta, lines = {}, []
    with open(path, newline="", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") and not lines:
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value
            else:
                lines.append(line)
    records = list(csv.reader(io.StringIO("".join(lines))))
    if not records:
        raise ValueError(f"{path}: missing header row")
    return meta, records[0], records[1:]


def version_string() -> str:
    try:
        rev = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True,
                             text=True, cwd=Path(__file__).parent, timeout=5)
        if rev.returncode == 0 and rev.stdout.strip():
            return f"{__version__}+{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


TOLERANCES = {"lp_feasibility": FEAS_TOL, "lp_optimality": OPT_TOL, "lp_pivot": PIVOT_TOL,
              "recovery_success": SUCCESS_TOL, "face_margin": MARGIN_TOL}


def _stem(name: str) -> str:
    return name.replace("-", "_")


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> dict:
    """Run every (cell, trial) pair and write CSV, times CSV, manifest (and the
    success-rate matrix for ``phase``).  Returns the written paths.

    Files are staged under temporary names and renamed only once everything
    succeeded, so a failure leaves no partial output behind.
    """
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = _stem(cfg.experiment)
    cells = list(cfg.cells())
    tasks = [(cfg, cell, t) for cell in cells for t in range(cfg.trials)]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]

    axes = list(CELL_AXES[cfg.experiment])
    metric_cols = list(TRIALS[cfg.experiment][1])
    comments = {"experiment": cfg.experiment, "config_hash": cfg.config_hash(), "base_seed": cfg.seed}
    rows, times = [], []
    for (_, cell, trial), (metrics, ms) in zip(tasks, results):
        key = [cell[a] for a in axes] + [trial, cfg.seed + trial]
        rows.append(key + [metrics[c] for c in metric_cols])
        times.append(key + [ms])

    staged = {}
    try:
        targets = {"csv": out / f"{stem}.csv", "times": out / f"{stem}_times.csv",
                   "manifest": out / f"{stem}_manifest.json"}
        if cfg.experiment == "phase":
            targets["matrix"] = out / "phase_matrix.csv"
        for name, path in targets.items():
            staged[name] = path.with_name(path.name + ".partial")
        write_csv(staged["csv"], axes + ["trial", "seed"] + metric_cols, rows, comments)
        write_csv(staged["times"], axes + ["trial", "seed", "time_ms"], times, comments)
        if cfg.experiment == "phase":
            _write_phase_matrix(staged["matrix"], cfg, cells, rows, comments)
        manifest = {"experiment": cfg.experiment, "config": asdict(cfg),
                    "config_hash": cfg.config_hash(), "base_seed": cfg.seed,
                    "version": version_string(), "tolerances": TOLERANCES,
                    "files": {k: v.name for k, v in targets.items() if k != "manifest"}}
        staged["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        for name, path in targets.items():
            os.replace(staged[name], path)
        return targets
    finally:
        for path in staged.values():
            if path.exists():
                path.unlink()


def _write_phase_matrix(path, cfg, cells, rows, comments):
    """Success rate per (n, k) row and m column."""
    rate = {}
    for row in rows:
        n, k, m = row[:3]
        rate.setdefault((n, k), {}).setdefault(m, []).append(row[5] == "success")
    ms = sorted({c["m"] for c in cells})
    header = ["n", "k"] + [f"m={m}" for m in ms]
    out = []
    for (n, k), by_m in sorted(rate.items()):
        out.append([n, k] + [float(np.mean(by_m[m])) if by_m.get(m) else math.nan for m in ms])
    write_csv(path, header, out, comments)


def success_matrix(path) -> tuple[list, list, np.ndarray]:
    """Read a phase matrix back as (row keys, m values, rates)."""
    _, header, records = read_csv(path)
    ms = [int(h.split("=")[1]) for h in header[2:]]
    keys = [(int(r[0]), int(r[1])) for r in records]
    return keys, ms, np.array([[float(v) for v in r[2:]] for r in records])


# --- summaries --------------------------------------------------------------

QUANTILES = (0.1, 0.5, 0.9)
_NON_PARAMS = {"trial", "seed"}


def _as_float(text):
    try:
        return float(text)
    except ValueError:
        return None


def summarize(csv_paths, slope_axis: str = "k") -> tuple[list, list]:
    """Aggregate harness CSVs into long-format rows.

    Rows are (params..., metric, statistic, value) with statistics count,
    mean, std, q10, q50, q90 per parameter cell and numeric metric.  When
    ``slope_axis`` is a parameter with at least two positive values, the
    log-log slope of the cell means against it (other parameters held fixed)
    is appended with that parameter shown as ``*``.
    """
    paths = list(csv_paths)
    if not paths:
        raise ValueError("no inputs")
    header = kind = None
    records = []
    for p in paths:
        meta, h, rows = read_csv(p)
        if header is None:
            header, kind = h, meta.get("experiment")
        elif h != header or meta.get("experiment") != kind:
            raise ValueError(f"{p}: schema differs from {paths[0]}")
        records.extend(rows)
    if kind not in CELL_AXES:
        raise ValueError(f"{paths[0]}: unknown experiment {kind!r}")
    params = [c for c in CELL_AXES[kind] if c in header]
    metrics = [c for c in header if c not in params and c not in _NON_PARAMS]
    pidx = [header.index(c) for c in params]
    cells = {}
    for r in records:
        cells.setdefault(tuple(r[i] for i in pidx), []).append(r)

    out, means = [], {}
    for key, group in cells.items():
        for metric in metrics:
            j = header.index(metric)
            vals = [_as_float(r[j]) for r in group]
            if any(v is None for v in vals):
                levels = sorted({r[j] for r in group})
                for level in levels:
                    share = sum(r[j] == level for r in group) / len(group)
                    out.append(list(key) + [metric, f"share:{level}", share])
                continue
            x = np.array(vals)
            stats = {"count": x.size, "mean": float(x.mean()),
                     "std": float(x.std(ddof=1)) if x.size > 1 else 0.0}
            for q in QUANTILES:
                stats[f"q{int(round(q * 100))}"] = float(np.quantile(x, q))
            for name, value in stats.items():
                out.append(list(key) + [metric, name, value])
            means[(key, metric)] = stats["mean"]

    if slope_axis in params:
        a = params.index(slope_axis)
        groups = {}
        for (key, metric), mean in means.items():
            rest = key[:a] + key[a + 1:]
            groups.setdefault((rest, metric), []).append((float(key[a]), mean))
        for (rest, metric), pts in groups.items():
            pts = [(x, y) for x, y in pts if x > 0 and y > 0]
            if len({x for x, _ in pts}) < 2:
                continue
            slope, se = loglog_slope([x for x, _ in pts], [y for _, y in pts])
            key = list(rest[:a]) + ["*"] + list(rest[a:])
            out.append(key + [metric, "slope", slope])
            out.append(key + [metric, "slope_se", se])
    return params + ["metric", "statistic", "value"], out
