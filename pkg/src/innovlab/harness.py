"""Experiment orchestration: configs, runs, persistence, reports, suites.

A run is described by a flat key = value text file.  Results land in the
output directory as

* ``results.csv``  -- fixed column order, one row per localization level,
  byte-stable for a fixed (config, seed) regardless of worker count;
* ``run.jsonl``    -- one machine-readable record per run (appended);
* ``config.txt``   -- the exact canonical configuration that produced them;
* ``paths.csv``    -- optional per-path summaries.

Modes: ``continuous`` runs the Gaussian pipeline; ``discrete`` runs the
quantized pipeline against exact enumeration (plug-in entropy estimators
over the finite observation classes); ``crosscheck`` additionally reports
the Monte Carlo vs enumeration deviations.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path as FsPath
from typing import Optional

import numpy as np

from . import __version__
from .core import RandomStream, TimeGrid
from .criterion import (
    DEFAULT_LEVELS,
    GAP_FLOOR,
    LevelReport,
    classify_level,
    criterion_levels,
    criterion_verdict,
    gaussian_path_kl,
    inequality_check,
)
from .errors import ConfigurationError, InnovlabError, StageError, UsageError
from .filtering import BasisSpec, ensemble_conditional_drift, innovation_values
from .girsanov import log_weights_ensemble, normalization_diagnostic, reweight
from .lingauss import is_linear_model
from .models import (
    DriftModel,
    EnsembleSimulation,
    make_model,
    simulate_ensemble,
)
from .oracle import (
    WitnessDrift,
    base_entropy_mc,
    canonical_labels,
    conditional_energy_by_grouping,
    dpi_verdict,
    enumerate_atoms,
    estimator_crosscheck,
    finite_bayes_filter,
    gauss_quantized,
    pushforward_entropy_mc,
    sample_quantized_ensemble,
    witness_labels,
)

__all__ = [
    "ExperimentConfig",
    "ResultRecord",
    "parse_config",
    "load_config",
    "run_experiment",
    "report",
    "suite",
    "resolve_outdir",
    "OUTDIR_ENV",
]

OUTDIR_ENV = "INNOVLAB_OUTDIR"

RESULT_COLUMNS = ["model", "n", "H_hat", "H_se", "E_hat", "E_se", "gap",
                  "ess", "norm_mean", "norm_se", "verdict"]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment."""

    model: str = "zero"
    model_params: dict = field(default_factory=dict)
    grid_n: int = 128
    horizon: float = 1.0
    paths: int = 20000
    particles: int = 0
    levels: tuple = DEFAULT_LEVELS
    basis_window: int = 8
    basis_squares: bool = True
    basis_cubes: bool = False
    basis_ema: tuple = ()
    ridge: float = 1e-8
    gap_floor: float = GAP_FLOOR
    seed: int = 20260808
    outdir: str = "runs/out"
    mode: str = "continuous"
    noise_nodes: int = 3
    aux_values: tuple = ()
    aux_probs: tuple = ()
    erasure: str = "none"
    crosscheck_tol: float = 0.05
    workers: int = 1
    write_paths: bool = False

    def __post_init__(self):
        if self.mode not in ("continuous", "discrete", "crosscheck"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.mode == "continuous" and self.paths < 100:
            raise ConfigurationError("continuous mode needs at least 100 paths")
        if self.erasure not in ("none", "sign-terminal"):
            raise ConfigurationError(f"unknown erasure {self.erasure!r}")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    def basis(self) -> BasisSpec:
        return BasisSpec(window=self.basis_window, include_squares=self.basis_squares,
                         include_cubes=self.basis_cubes, ema_rates=tuple(self.basis_ema),
                         ridge=self.ridge)

    def grid(self) -> TimeGrid:
        return TimeGrid(steps=self.grid_n, horizon=self.horizon)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "model_params":
                for k in sorted(v):
                    lines.append(f"model.{k} = {_fmt(v[k])}")
                continue
            lines.append(f"{f.name} = {_fmt(v)}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


def _fmt(v) -> str:
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.12g}"
    return str(v)


_LIST_FIELDS = {"levels": float, "basis_ema": float, "aux_values": float, "aux_probs": float}
_INT_FIELDS = {"grid_n", "paths", "particles", "basis_window", "seed", "noise_nodes", "workers"}
_FLOAT_FIELDS = {"horizon", "ridge", "gap_floor", "crosscheck_tol"}
_BOOL_FIELDS = {"basis_squares", "basis_cubes", "write_paths"}
_STR_FIELDS = {"model", "outdir", "mode", "erasure"}


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse the flat key = value format; overrides win over file values."""
    values: dict = {"model_params": {}}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key.startswith("model."):
            values["model_params"][key[6:]] = _parse_scalar(val)
        elif key in _LIST_FIELDS:
            conv = _LIST_FIELDS[key]
            items = tuple(conv(x) for x in val.replace(",", " ").split()) if val else ()
            values[key] = items
        elif key in _INT_FIELDS:
            values[key] = int(val)
        elif key in _FLOAT_FIELDS:
            values[key] = float(val)
        elif key in _BOOL_FIELDS:
            values[key] = val.lower() in ("true", "1", "yes")
        elif key in _STR_FIELDS:
            values[key] = val
        else:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
    cfg = ExperimentConfig(**values)
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def _parse_scalar(val: str):
    try:
        return int(val)
    except ValueError:
        pass
    try:
        return float(val)
    except ValueError:
        pass
    if val.lower() in ("true", "false"):
        return val.lower() == "true"
    return val


def load_config(path, **overrides) -> ExperimentConfig:
    return parse_config(FsPath(path).read_text(), **overrides)


@dataclass(frozen=True)
class ResultRecord:
    """Flattened outcome of one run, as persisted to run.jsonl."""

    config_digest: str
    model: str
    mode: str
    verdict: str
    levels: list
    diagnostics: dict
    wall_clock: float
    version: str = __version__

    def to_json(self) -> str:
        def clean(x):
            if isinstance(x, float):
                if math.isinf(x):
                    return "inf"
                if math.isnan(x):
                    return None
                return x
            if isinstance(x, dict):
                return {k: clean(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [clean(v) for v in x]
            return x

        payload = {
            "config_digest": self.config_digest,
            "model": self.model,
            "mode": self.mode,
            "verdict": self.verdict,
            "levels": clean(self.levels),
            "diagnostics": clean(self.diagnostics),
            "wall_clock": self.wall_clock,
            "version": self.version,
        }
        return json.dumps(payload, sort_keys=True)


def resolve_model(name: str, params: dict) -> DriftModel:
    if name == WitnessDrift.name:
        return WitnessDrift(**params)
    return make_model(name, **params)


def resolve_outdir(config: ExperimentConfig) -> FsPath:
    env = os.environ.get(OUTDIR_ENV)
    return FsPath(env) if env else FsPath(config.outdir)


def _simulate_chunked(model, grid, size, seed, workers) -> EnsembleSimulation:
    """Worker-count-independent ensemble simulation.

    Each path draws from its own substream, so chunk boundaries cannot
    change any number; chunks are reassembled in path order.
    """
    if workers <= 1:
        return simulate_ensemble(model, grid, size, RandomStream(seed=seed))
    bounds = np.linspace(0, size, workers + 1, dtype=int)
    jobs = [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]

    def work(lo, hi):
        return simulate_ensemble(model, grid, hi - lo, RandomStream(seed=seed, substream=lo))

    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda j: work(*j), jobs))
    cat = lambda sel: np.concatenate([sel(p) for p in parts], axis=0)
    return EnsembleSimulation(
        model_name=model.name, grid=grid,
        dB=cat(lambda p: p.dB), dU=cat(lambda p: p.dU), drift=cat(lambda p: p.drift),
        aux=cat(lambda p: p.aux), U=cat(lambda p: p.U), B=cat(lambda p: p.B),
        hidden=None if parts[0].hidden is None else cat(lambda p: p.hidden),
    )


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except InnovlabError as exc:
        raise StageError(name, exc) from exc


def _level_row(r: LevelReport, model: str) -> dict:
    return {
        "model": model,
        "n": r.level,
        "H_hat": r.entropy, "H_se": r.entropy_se,
        "E_hat": r.energy, "E_se": r.energy_se,
        "gap": r.gap, "gap_se": r.gap_se,
        "ess": r.ess,
        "norm_mean": r.norm_mean, "norm_se": r.norm_se,
        "norm_passed": r.norm_passed,
        "verdict": r.verdict,
        "method": r.method,
    }


def run_experiment(config: ExperimentConfig, persist: bool = True) -> ResultRecord:
    """Execute one experiment end to end and persist its records."""
    t0 = time.time()
    model = _stage("configure", resolve_model, config.model, config.model_params)
    grid = config.grid()

    if config.mode == "continuous":
        record = _run_continuous(config, model, grid)
    else:
        record = _run_discrete(config, model, grid)

    record = replace(record, wall_clock=time.time() - t0)
    if persist:
        _persist(config, record)
    return record


def _run_continuous(config, model, grid) -> ResultRecord:
    sim = _stage("simulate", _simulate_chunked, model, grid, config.paths,
                 config.seed, config.workers)
    filt = _stage("filter", ensemble_conditional_drift, model, sim,
                  config.particles, RandomStream(seed=config.seed + 1))
    Z = _stage("innovation", innovation_values, sim.U, filt.values, grid.dt)
    reports = _stage("criterion", criterion_levels, Z, filt.values, grid,
                     config.levels, config.basis(), config.gap_floor,
                     f"{filt.method}+jensen[{config.basis().describe()}]")
    verdict = criterion_verdict(reports)

    diagnostics = {
        "filter_method": filt.method,
        "paths": config.paths,
        "grid_n": config.grid_n,
        "seed": config.seed,
        "workers": config.workers,
    }
    if is_linear_model(model):
        diagnostics["gaussian_path_kl"] = gaussian_path_kl(model, grid)
        diagnostics["gaussian_observation_kl"] = gaussian_path_kl(model, grid, "observation")

    rows = [_level_row(r, config.model) for r in reports]
    if config.write_paths:
        diagnostics["paths_file"] = "paths.csv"
    record = ResultRecord(config.digest(), config.model, config.mode, verdict,
                          rows, diagnostics, 0.0)
    if config.write_paths:
        record = replace(record, diagnostics=diagnostics)
        _write_paths_csv(config, sim, filt, Z, grid)
    return record


def _discrete_parts(config, model, grid):
    noise = gauss_quantized(config.noise_nodes, grid.dt)
    aux_values = list(config.aux_values) if model.aux_dim else None
    aux_probs = list(config.aux_probs) if config.aux_probs else None
    space = _stage("enumerate", enumerate_atoms, model, grid, noise, aux_values, aux_probs)
    relabel = witness_labels if config.erasure == "sign-terminal" else None
    system = space.system(relabel=relabel, tag=config.erasure)
    exact = dpi_verdict(system)

    sim = _stage("sample", sample_quantized_ensemble, model, grid, config.paths,
                 RandomStream(seed=config.seed), noise, aux_values, aux_probs)
    if model.observation_adapted:
        uhat = sim.drift
        method = "identity-feedback"
    else:
        filt = _stage("filter", finite_bayes_filter, model, sim, noise,
                      aux_values, aux_probs)
        uhat, method = filt.values, filt.method
    Z = innovation_values(sim.U, uhat, grid.dt)
    lw = log_weights_ensemble(uhat, Z, grid.dt)
    if config.erasure == "sign-terminal":
        labels = canonical_labels(witness_labels(Z))
    else:
        labels = canonical_labels(Z[:, 1:, 0])
    return noise, space, system, exact, sim, uhat, Z, lw, labels, method


def _run_discrete(config, model, grid) -> ResultRecord:
    (noise, space, system, exact, sim, uhat, Z, lw, labels, method) = \
        _discrete_parts(config, model, grid)

    base, base_se = base_entropy_mc(lw)
    push, push_se = pushforward_entropy_mc(lw, labels)
    gap = base - push
    gap_se = float(np.hypot(base_se, push_se))
    ens = reweight(lw)
    diag = normalization_diagnostic(lw)
    e_terms = np.einsum("mkd,mkd->m", uhat, uhat) * grid.dt
    energy_mc = 0.5 * float(ens.weights @ e_terms)
    verdict = classify_level(gap, gap_se, config.gap_floor)

    row = {
        "model": config.model, "n": float("inf"),
        "H_hat": push, "H_se": push_se,
        "E_hat": base, "E_se": base_se,
        "gap": gap, "gap_se": gap_se,
        "ess": ens.ess,
        "norm_mean": diag.mean, "norm_se": diag.se, "norm_passed": diag.passed,
        "verdict": verdict,
        "method": f"{method}+plugin[{config.erasure}]",
    }
    diagnostics = {
        "filter_method": method,
        "atoms": space.atoms,
        "exact_base_entropy": exact.base_entropy,
        "exact_pushforward_entropy": exact.pushforward_entropy,
        "exact_gap": exact.gap,
        "exact_energy": exact.energy,
        "density_z_measurable": exact.density_z_measurable,
        "u_recoverable_from_z": exact.u_recoverable_from_z,
        "energy_mc": energy_mc,
        "paths": config.paths,
        "seed": config.seed,
    }

    if config.mode == "crosscheck":
        aux_vals = list(config.aux_values) if model.aux_dim else None
        cc = estimator_crosscheck(space, sim, uhat, base, push, energy_mc,
                                  config.crosscheck_tol, aux_vals)
        diagnostics["crosscheck"] = {
            "entropy_rel_error": cc.entropy_rel_error,
            "base_entropy_rel_error": cc.base_entropy_rel_error,
            "energy_rel_error": cc.energy_rel_error,
            "filter_deviation": cc.filter_deviation,
            "conditional_energy_exact": conditional_energy_by_grouping(space),
            "tolerance": cc.tolerance,
            "passed": cc.passed,
        }

    return ResultRecord(config.digest(), config.model, config.mode, verdict,
                        [row], diagnostics, 0.0)


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        if math.isnan(v):
            return ""
        return f"{v:.12g}"
    return str(v)


def _persist(config: ExperimentConfig, record: ResultRecord) -> None:
    outdir = resolve_outdir(config)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.txt").write_text(config.to_text())
    lines = [",".join(RESULT_COLUMNS)]
    for row in record.levels:
        lines.append(",".join(_fmt_cell(row.get(c)) for c in RESULT_COLUMNS))
    (outdir / "results.csv").write_text("\n".join(lines) + "\n")
    with (outdir / "run.jsonl").open("a") as fh:
        fh.write(record.to_json() + "\n")


def _write_paths_csv(config, sim, filt, Z, grid):
    outdir = resolve_outdir(config)
    outdir.mkdir(parents=True, exist_ok=True)
    e = np.einsum("mkd,mkd->m", filt.values, filt.values) * grid.dt
    lw = log_weights_ensemble(filt.values, Z, grid.dt)
    with (outdir / "paths.csv").open("w") as fh:
        fh.write("path,log_weight,drift_energy,terminal_innovation\n")
        for i in range(sim.size):
            fh.write(f"{i},{_fmt_cell(float(lw[i]))},{_fmt_cell(float(e[i]))},"
                     f"{_fmt_cell(float(Z[i, -1, 0]))}\n")


# ------------------------------------------------------------------- reporting

def report(in_dir, out_curves: Optional[str] = "curves.csv") -> str:
    """Human-readable table plus plot-ready columnar files."""
    in_dir = FsPath(in_dir)
    jl = in_dir / "run.jsonl"
    if not jl.exists():
        raise UsageError(f"no run.jsonl under {in_dir}")
    records = [json.loads(line) for line in jl.read_text().splitlines() if line.strip()]
    if not records:
        raise UsageError(f"run.jsonl under {in_dir} is empty")

    header = ["model", "n", "H_hat", "E_hat", "gap", "gap_se", "ess", "verdict"]
    widths = [16, 6, 11, 11, 11, 11, 9, 20]
    out = [" ".join(h.ljust(w) for h, w in zip(header, widths))]

    def cell(v, w):
        if v is None:
            s = "—"
        elif isinstance(v, float):
            s = f"{v:.6f}"
        else:
            s = str(v)
        return s.ljust(w)

    curve_rows = []
    for rec in records:
        for row in rec["levels"]:
            vals = [row.get("model"), row.get("n"), row.get("H_hat"), row.get("E_hat"),
                    row.get("gap"), row.get("gap_se"), row.get("ess"), row.get("verdict")]
            vals = [float(v) if isinstance(v, (int, float)) else v for v in vals]
            out.append(" ".join(cell(v, w) for v, w in zip(vals, widths)))
            curve_rows.append(row)
    text = "\n".join(out)

    if out_curves:
        cols = ["model", "n", "H_hat", "H_se", "E_hat", "E_se", "gap", "gap_se", "ess"]
        lines = [",".join(cols)]
        for row in curve_rows:
            lines.append(",".join(_fmt_cell(_as_float(row.get(c))) if c != "model"
                                  else str(row.get(c)) for c in cols))
        (in_dir / out_curves).write_text("\n".join(lines) + "\n")
    return text


def _as_float(v):
    if v == "inf":
        return float("inf")
    return v


# ---------------------------------------------------------------------- suites

def _suite_smoke(outdir: FsPath, seed: int) -> int:
    ok = True
    for name, n in [("zero", 64), ("deterministic", 128)]:
        cfg = ExperimentConfig(model=name, grid_n=n, paths=1000, seed=seed,
                               outdir=str(outdir / name))
        rec = run_experiment(cfg)
        good = rec.verdict == "EQUALITY-CONSISTENT"
        ok &= good
        print(f"smoke {name:14s} verdict={rec.verdict:20s} "
              f"H={rec.levels[-1]['H_hat']:.4f} E={rec.levels[-1]['E_hat']:.4f} "
              f"{'ok' if good else 'FAIL'}")
    return 0 if ok else 1


PAPER_RUNS = [
    ("zero", {}, 128),
    ("deterministic", {}, 128),
    ("linear-feedback", {"a": 1.0}, 128),
    ("independent", {}, 128),
    ("kalman-bucy", {"beta": 1.0, "sigma": 1.0}, 512),
    ("tsirelson", {"levels": 8}, 512),
]


def _suite_paper(outdir: FsPath, seed: int) -> int:
    ok = True
    for name, params, n in PAPER_RUNS:
        cfg = ExperimentConfig(model=name, model_params=params, grid_n=n,
                               paths=20000, seed=seed, outdir=str(outdir / name))
        rec = run_experiment(cfg)
        last = rec.levels[-1]
        gated = name != "tsirelson"
        good = (rec.verdict == "EQUALITY-CONSISTENT") if gated else True
        ineq = all(inequality_check(r["H_hat"], r["H_se"], r["E_hat"], r["E_se"])
                   for r in rec.levels)
        ok &= good and ineq
        tag = "gated" if gated else "exploratory"
        print(f"paper {name:16s} verdict={rec.verdict:20s} "
              f"gap={last['gap']:+.5f}+-{last['gap_se']:.5f} ({tag}) "
              f"{'ok' if good and ineq else 'FAIL'}")
        if name == "tsirelson":
            for r in rec.levels:
                lo, hi = r["gap"] - 3 * r["gap_se"], r["gap"] + 3 * r["gap_se"]
                print(f"      tsirelson n={r['n']}: gap={r['gap']:+.5f} "
                      f"CI3=[{lo:+.5f}, {hi:+.5f}]")
    return 0 if ok else 1


def _suite_oracle(outdir: FsPath, seed: int) -> int:
    from .oracle import system_battery, witness_space

    battery = system_battery(100, seed=7)
    dpi_ok = equiv_ok = 0
    equal_cnt = strict_cnt = 0
    for s in battery:
        v = dpi_verdict(s)
        if v.pushforward_entropy <= v.base_entropy + 1e-12:
            dpi_ok += 1
        if (abs(v.gap) <= 1e-12) == v.density_z_measurable:
            equiv_ok += 1
        if abs(v.gap) <= 1e-12:
            equal_cnt += 1
        elif v.gap > 1e-12:
            strict_cnt += 1
    print(f"oracle battery: dpi {dpi_ok}/100, equivalence {equiv_ok}/100, "
          f"equality {equal_cnt}, strict {strict_cnt}")

    space, system = witness_space()
    v = dpi_verdict(system)
    witness_ok = (v.gap > 1e-6 and not v.density_z_measurable
                  and not v.u_recoverable_from_z)
    print(f"oracle witness: exact gap={v.gap:.6f} measurable={v.density_z_measurable} "
          f"recoverable={v.u_recoverable_from_z} {'ok' if witness_ok else 'FAIL'}")

    cfg = ExperimentConfig(model=WitnessDrift.name, mode="discrete", grid_n=2,
                           paths=20000, noise_nodes=2, erasure="sign-terminal",
                           seed=seed, outdir=str(outdir / "witness"))
    rec = run_experiment(cfg)
    mc_ok = rec.verdict == "POSITIVE-GAP"
    print(f"oracle witness MC: verdict={rec.verdict} gap={rec.levels[0]['gap']:.5f} "
          f"(exact {rec.diagnostics['exact_gap']:.5f}) {'ok' if mc_ok else 'FAIL'}")

    all_ok = (dpi_ok == 100 and equiv_ok == 100 and equal_cnt >= 10
              and strict_cnt >= 10 and witness_ok and mc_ok)
    return 0 if all_ok else 1


def suite(name: str, outdir: Optional[str] = None, seed: int = 20260808) -> int:
    """Run a named suite; returns a process exit status."""
    base = FsPath(outdir) if outdir else FsPath("runs") / name
    if name == "smoke":
        return _suite_smoke(base, seed)
    if name == "paper":
        return _suite_paper(base, seed)
    if name == "oracle":
        return _suite_oracle(base, seed)
    raise UsageError(f"unknown suite {name!r}; known: smoke, paper, oracle")
