"""Benchmark harness reproducing the simulation protocol at desk scale.

A benchmark sweeps sample sizes for one parameter scenario: per
replication it simulates from the benchmark model, initializes, fits,
aligns, and records graph accuracy and parameter RMSE.  Replications are
independent (seed = base + rep index) and may run in parallel processes;
failures are recorded as NaN rows instead of aborting the sweep.
"""

from __future__ import annotations

import json
import os
import time
try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .benchmarks import make_benchmark_params
from .errors import ValidationError
from .estimation import FitConfig, fit
from .evaluation import accuracy_G, align, rmse_theta
from .io import SCHEMA
from .model import family_from_name, graphs_from_coefficients, sample
from .spectral import select_latent_dims

_TASKS = ("fit", "select-k", "ablation-init")


@dataclass
class ExperimentSpec:
    """One benchmark scenario: parameters, sample sizes, and protocol."""

    family: str
    kind: str = "strict"
    J: int = 18
    K: list[int] = field(default_factory=lambda: [6, 2])
    N: list[int] = field(default_factory=lambda: [2000])
    reps: int = 20
    algo: str = "saem"
    penalty: str = "hard"
    init: str = "spectral"
    task: str = "fit"
    base_seed: int = 0
    lam: float | None = None
    tau: float | None = None
    max_iter: int = 0

    def __post_init__(self):
        if self.reps < 1:
            raise ValidationError("reps must be at least 1")
        if self.task not in _TASKS:
            raise ValidationError(f"unknown task {self.task!r}")
        family_from_name(self.family)  # validates the name

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentSpec":
        path = Path(path)
        if path.suffix == ".toml":
            raw = tomllib.loads(path.read_text())
        else:
            raw = json.loads(path.read_text())
        raw.pop("schema", None)
        return cls(**raw)


def _fit_config(spec: ExperimentSpec, seed: int, init: str) -> FitConfig:
    return FitConfig(algorithm=spec.algo, penalty=spec.penalty, lam=spec.lam,
                     tau=spec.tau, max_iter=spec.max_iter, init=init,
                     seed=seed)


def _fit_metrics(spec: ExperimentSpec, data, model_star, seed: int,
                 init: str) -> dict:
    t0 = time.perf_counter()
    report = fit(data, list(spec.K), _fit_config(spec, seed, init))
    a = align(report.model, model_star)
    acc = accuracy_G(report.graphs, graphs_from_coefficients(model_star), a)
    return {
        "acc": acc,
        "acc_mean": float(np.mean(acc)),
        "rmse": rmse_theta(report.model, model_star, a),
        "converged": report.converged,
        "seconds": time.perf_counter() - t0,
    }


def run_replication(spec: ExperimentSpec, N: int, rep: int) -> dict:
    """One independent replication; exceptions become a failure record."""
    seed = spec.base_seed + rep
    row: dict = {"N": N, "rep": rep, "seed": seed, "failed": False}
    try:
        family = family_from_name(spec.family)
        model_star = make_benchmark_params(spec.kind, spec.J, list(spec.K),
                                           family)
        data, _ = sample(model_star, N, seed)
        if spec.task == "select-k":
            t0 = time.perf_counter()
            chosen = select_latent_dims(data, len(spec.K))
            row.update(K_hat=chosen, correct=(chosen == list(spec.K)),
                       seconds=time.perf_counter() - t0)
        elif spec.task == "ablation-init":
            for label, init in (("spectral", "spectral"), ("random", "random")):
                m = _fit_metrics(spec, data, model_star, seed, init)
                row.update({f"acc_mean_{label}": m["acc_mean"],
                            f"rmse_{label}": m["rmse"],
                            f"seconds_{label}": m["seconds"]})
        else:
            row.update(_fit_metrics(spec, data, model_star, seed, spec.init))
    except Exception as exc:  # failures recorded, never fatal
        row.update(failed=True, error=f"{type(exc).__name__}: {exc}")
    return row


def _numeric_keys(rows: list[dict]) -> list[str]:
    keys = []
    for row in rows:
        for k, v in row.items():
            if k in ("N", "rep", "seed", "failed") or k in keys:
                continue
            if isinstance(v, (int, float, bool)) and not isinstance(v, str):
                keys.append(k)
    return keys


def run_benchmark(spec: ExperimentSpec, workers: int | None = None) -> dict:
    """Full sweep; returns {"rows": per-rep records, "aggregate": per-N}."""
    if workers is None:
        workers = max(1, int(os.environ.get("DDE_THREADS", "1")))
    jobs = [(N, rep) for N in spec.N for rep in range(spec.reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_replication, [spec] * len(jobs),
                                 [j[0] for j in jobs], [j[1] for j in jobs]))
    else:
        rows = [run_replication(spec, N, rep) for N, rep in jobs]
    aggregate = []
    for N in spec.N:
        group = [r for r in rows if r["N"] == N]
        good = [r for r in group if not r["failed"]]
        entry: dict = {"N": N, "reps": len(group),
                       "failures": len(group) - len(good)}
        for key in _numeric_keys(good):
            vals = np.array([float(r[key]) for r in good if key in r])
            entry[f"mean_{key}"] = float(vals.mean()) if vals.size else None
            entry[f"sd_{key}"] = (float(vals.std(ddof=1))
                                  if vals.size > 1 else None)
        if spec.task == "fit" and good:
            acc = np.array([r["acc"] for r in good])
            entry["mean_acc_layers"] = acc.mean(axis=0).tolist()
            entry["sd_acc_layers"] = (acc.std(axis=0, ddof=1).tolist()
                                      if acc.shape[0] > 1 else None)
        aggregate.append(entry)
    return {"schema": SCHEMA, "spec": asdict(spec), "rows": rows,
            "aggregate": aggregate}


def write_benchmark(result: dict, out_prefix: str | Path) -> tuple[Path, Path]:
    """Write the JSON result and a flat per-N CSV of the aggregate curves."""
    out_prefix = Path(out_prefix)
    json_path = out_prefix.with_suffix(".json")
    csv_path = out_prefix.with_suffix(".csv")
    json_path.write_text(json.dumps(result, indent=2, default=_jsonify) + "\n")
    agg = result["aggregate"]
    cols = sorted({k for entry in agg for k in entry
                   if not isinstance(entry[k], (list, dict))},
                  key=lambda k: (k != "N", k))
    lines = [",".join(cols)]
    for entry in agg:
        lines.append(",".join("" if entry.get(c) is None else str(entry[c])
                              for c in cols))
    csv_path.write_text("\n".join(lines) + "\n")
    return json_path, csv_path


def _jsonify(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")
