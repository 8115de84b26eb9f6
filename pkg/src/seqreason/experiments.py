"""Config-driven experiment harness.

A single versioned JSON document describes one experiment: the model and
training settings, the seed list, optional ablation switches, and an
optional forget-factor grid. Unknown keys are rejected at load so a typo
in an ablation switch cannot silently produce a baseline run.

Emits plain files: results.json (metrics only, byte-stable across reruns),
metrics.csv, timing.csv, sweep CSVs, and comparison CSV/PNG.
"""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .training import DEFAULT_SEEDS, TrainConfig, evaluate, mean_std, train

SCHEMA_VERSION = 1
OUT_ENV_VAR = "SEQREASON_OUT"

_SWITCHES = ("gate_swap", "no_cross_attention", "attention_preprocessor")

_KEYS = {
    "schema_version",
    "name",
    "task_id",
    "processor",
    "gate",
    "d",
    "fixed_alpha",
    "batch_size",
    "steps",
    "lr",
    "n_train",
    "eval_sizes",
    "eval_instances",
    "clip_norm",
    "seeds",
    "gate_swap",
    "no_cross_attention",
    "attention_preprocessor",
    "alpha_grid",
    "out_dir",
}
_REQUIRED = {"schema_version", "name", "task_id"}


class ConfigError(ValueError):
    """Invalid experiment config; message carries the file anchor when known."""


@dataclass
class ExperimentConfig:
    name: str
    task_id: str
    processor: str = "gnn"
    gate: str | None = None
    d: int = 64
    fixed_alpha: tuple = (0.0, 0.0)
    batch_size: int | None = None
    steps: int = 2000
    lr: float | None = None
    n_train: tuple = (4, 8)
    eval_sizes: tuple = (4, 8)
    eval_instances: int = 64
    clip_norm: float | None = None
    seeds: tuple = DEFAULT_SEEDS
    gate_swap: bool = False
    no_cross_attention: bool = False
    attention_preprocessor: bool = False
    alpha_grid: tuple | None = None  # ((a1 values...), (a2 values...))
    out_dir: str | None = None

    def __post_init__(self):
        if not self.name or not str(self.name).strip():
            raise ConfigError("name must be a non-empty string")
        on = [s for s in _SWITCHES if getattr(self, s)]
        if len(on) > 1:
            raise ConfigError(f"ablation switches are mutually exclusive, got {on}")
        if self.attention_preprocessor:
            if self.gate not in (None, "attention"):
                raise ConfigError(
                    f"attention_preprocessor conflicts with gate={self.gate!r}"
                )
            self.gate = "attention"
        self.fixed_alpha = tuple(self.fixed_alpha)
        self.n_train = tuple(self.n_train)
        self.eval_sizes = tuple(self.eval_sizes)
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.alpha_grid is not None:
            if len(self.alpha_grid) != 2:
                raise ConfigError("alpha_grid needs exactly two axes")
            axes = tuple(tuple(float(a) for a in axis) for axis in self.alpha_grid)
            if not axes[0] or not axes[1]:
                raise ConfigError("alpha_grid axes must be non-empty")
            for axis in axes:
                for a in axis:
                    if not 0.0 <= a <= 1.0:
                        raise ConfigError(f"alpha_grid value {a} outside [0, 1]")
            self.alpha_grid = axes
        self.train_config(self.seeds[0])  # validate; raises on bad combos

    def train_config(self, seed, **overrides) -> TrainConfig:
        kw = dict(
            task_id=self.task_id,
            processor=self.processor,
            gate=self.gate,
            d=self.d,
            fixed_alpha=self.fixed_alpha,
            gate_swap=self.gate_swap,
            no_cross_attention=self.no_cross_attention,
            batch_size=self.batch_size,
            steps=self.steps,
            lr=self.lr,
            n_train=self.n_train,
            eval_sizes=self.eval_sizes,
            eval_instances=self.eval_instances,
            clip_norm=self.clip_norm,
            seed=int(seed),
        )
        kw.update(overrides)
        return TrainConfig(**kw)

    def as_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "task_id": self.task_id,
            "processor": self.processor,
            "gate": self.gate,
            "d": self.d,
            "fixed_alpha": list(self.fixed_alpha),
            "batch_size": self.batch_size,
            "steps": self.steps,
            "lr": self.lr,
            "n_train": list(self.n_train),
            "eval_sizes": list(self.eval_sizes),
            "eval_instances": self.eval_instances,
            "clip_norm": self.clip_norm,
            "seeds": list(self.seeds),
            "gate_swap": self.gate_swap,
            "no_cross_attention": self.no_cross_attention,
            "attention_preprocessor": self.attention_preprocessor,
            "alpha_grid": None if self.alpha_grid is None else [list(a) for a in self.alpha_grid],
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - _KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = _REQUIRED - set(data)
        if missing:
            raise ConfigError(f"missing required keys: {sorted(missing)}")
        if data["schema_version"] != SCHEMA_VERSION:
            raise ConfigError(
                f"schema_version {data['schema_version']} unsupported (expected {SCHEMA_VERSION})"
            )
        kw = {k: v for k, v in data.items() if k != "schema_version"}
        return cls(**kw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: top level must be a JSON object")
    try:
        return ExperimentConfig.from_dict(data)
    except (ConfigError, ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.as_dict(), indent=2, sort_keys=True) + "\n")


def resolve_out_dir(cfg: ExperimentConfig, out_dir=None) -> Path:
    """Priority: explicit argument, config field, $SEQREASON_OUT/name, runs/name."""
    if out_dir is not None:
        return Path(out_dir)
    if cfg.out_dir is not None:
        return Path(cfg.out_dir)
    root = os.environ.get(OUT_ENV_VAR)
    return (Path(root) if root else Path("runs")) / cfg.name


def _write_csv(path, fieldnames, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _cell(cfg_dict, seed, overrides):
    """Train and evaluate one (config, seed) cell; returns plain dicts."""
    cfg = ExperimentConfig.from_dict(cfg_dict)
    tc = cfg.train_config(seed, **overrides)
    result = train(tc)
    report = evaluate(result.model, tc)
    return {
        "seed": int(seed),
        "report": report.as_dict(),
        "train_seconds": result.seconds,
        "eval_seconds": report.seconds,
    }


def _run_cells(cfg: ExperimentConfig, cells, jobs=1):
    """cells: list of (seed, overrides). Order of results matches input."""
    if jobs <= 1:
        return [_cell(cfg.as_dict(), seed, ov) for seed, ov in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_cell, cfg.as_dict(), seed, ov) for seed, ov in cells]
        return [f.result() for f in futures]


def _dump_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def run(cfg: ExperimentConfig, out_dir=None, jobs=1) -> dict:
    """Train/evaluate each seed; write results.json, metrics.csv, timing.csv.

    results.json holds scores only, so reruns of the same config and seeds
    produce byte-identical bytes; wall-clock goes to timing.csv.
    """
    out = resolve_out_dir(cfg, out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = _run_cells(cfg, [(s, {}) for s in cfg.seeds], jobs=jobs)
    reports = [c["report"] for c in cells]
    mean, std = mean_std([r["aggregate"] for r in reports])
    results = {
        "schema_version": SCHEMA_VERSION,
        "name": cfg.name,
        "task_id": cfg.task_id,
        "config": cfg.as_dict(),
        "seeds": list(cfg.seeds),
        "per_seed": {str(c["seed"]): c["report"]["aggregate"] for c in cells},
        "mean": mean,
        "std": std,
        "output_scores": {
            name: list(mean_std([r["output_scores"][name] for r in reports]))
            for name in reports[0]["output_scores"]
        },
        "hint_scores": {
            name: list(mean_std([r["hint_scores"][name] for r in reports]))
            for name in reports[0]["hint_scores"]
        },
    }
    _dump_json(out / "results.json", results)

    metric_rows = []
    for c in cells:
        seed, rep = c["seed"], c["report"]
        metric_rows.append({"seed": seed, "metric": "aggregate", "value": rep["aggregate"]})
        for name, v in sorted(rep["output_scores"].items()):
            metric_rows.append({"seed": seed, "metric": f"output/{name}", "value": v})
        for name, v in sorted(rep["hint_scores"].items()):
            metric_rows.append({"seed": seed, "metric": f"hint/{name}", "value": v})
    _write_csv(out / "metrics.csv", ["seed", "metric", "value"], metric_rows)

    timing_rows = []
    for c in cells:
        timing_rows.append({"seed": c["seed"], "phase": "train", "seconds": c["train_seconds"]})
        timing_rows.append({"seed": c["seed"], "phase": "eval", "seconds": c["eval_seconds"]})
    _write_csv(out / "timing.csv", ["seed", "phase", "seconds"], timing_rows)
    return {"out_dir": out, "results": results}


def sweep_alpha(cfg: ExperimentConfig, out_dir=None, jobs=1) -> dict:
    """Train one fixed-gate model per (alpha1, alpha2, seed) grid cell.

    Writes sweep.csv (one row per cell) and sweep_grid.csv (seed-averaged
    matrix, alpha1 down the rows, alpha2 across the columns).
    """
    if cfg.alpha_grid is None:
        raise ConfigError(f"config {cfg.name!r} has no alpha_grid")
    out = resolve_out_dir(cfg, out_dir)
    out.mkdir(parents=True, exist_ok=True)
    a1_axis, a2_axis = cfg.alpha_grid
    cells = []
    for a1 in a1_axis:
        for a2 in a2_axis:
            for seed in cfg.seeds:
                cells.append((seed, {"gate": "fixed", "fixed_alpha": (a1, a2)}))
    outcomes = _run_cells(cfg, cells, jobs=jobs)
    rows = []
    i = 0
    for a1 in a1_axis:
        for a2 in a2_axis:
            for seed in cfg.seeds:
                rows.append(
                    {
                        "alpha1": a1,
                        "alpha2": a2,
                        "seed": seed,
                        "score": outcomes[i]["report"]["aggregate"],
                    }
                )
                i += 1
    _write_csv(out / "sweep.csv", ["alpha1", "alpha2", "seed", "score"], rows)

    grid_rows = []
    for a1 in a1_axis:
        row = {"alpha1": a1}
        for a2 in a2_axis:
            scores = [r["score"] for r in rows if r["alpha1"] == a1 and r["alpha2"] == a2]
            row[str(a2)] = float(np.mean(scores))
        grid_rows.append(row)
    _write_csv(out / "sweep_grid.csv", ["alpha1"] + [str(a) for a in a2_axis], grid_rows)
    return {"out_dir": out, "rows": rows, "grid": grid_rows}


def _load_results(path):
    path = Path(path)
    data = json.loads(path.read_text())
    timing = path.parent / "timing.csv"
    train_seconds = None
    if timing.exists():
        secs = [float(r["seconds"]) for r in read_csv(timing) if r["phase"] == "train"]
        if secs:
            train_seconds = float(np.mean(secs))
    return {
        "path": path,
        "name": data["name"],
        "task_id": data["task_id"],
        "mean": float(data["mean"]),
        "std": float(data["std"]),
        "train_seconds": train_seconds,
    }


def compare(paths, out_dir) -> dict:
    """Pair results files by task (first seen = baseline, second = candidate)
    and emit per-task deltas sorted descending plus side-by-side timings."""
    entries = [_load_results(p) for p in paths]
    by_task = {}
    for e in entries:
        by_task.setdefault(e["task_id"], []).append(e)
    bad = {t: len(v) for t, v in by_task.items() if len(v) != 2}
    if bad:
        raise ConfigError(
            f"compare needs exactly two results per task, got {bad}"
        )
    rows = []
    for task, (base, cand) in sorted(by_task.items()):
        ratio = None
        if base["train_seconds"] and cand["train_seconds"]:
            ratio = cand["train_seconds"] / base["train_seconds"]
        rows.append(
            {
                "task": task,
                "base_name": base["name"],
                "cand_name": cand["name"],
                "base_score": base["mean"],
                "cand_score": cand["mean"],
                "delta": cand["mean"] - base["mean"],
                "base_std": base["std"],
                "cand_std": cand["std"],
                "base_train_seconds": base["train_seconds"],
                "cand_train_seconds": cand["train_seconds"],
                "timing_ratio": ratio,
            }
        )
    rows.sort(key=lambda r: r["delta"], reverse=True)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out / "comparison.csv",
        [
            "task",
            "base_name",
            "cand_name",
            "base_score",
            "cand_score",
            "delta",
            "base_std",
            "cand_std",
            "base_train_seconds",
            "cand_train_seconds",
            "timing_ratio",
        ],
        rows,
    )
    plot_path = out / "comparison.png"
    _plot_comparison(rows, plot_path)
    return {"out_dir": out, "rows": rows}


def _plot_comparison(rows, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    tasks = [r["task"] for r in rows]
    deltas = [r["delta"] for r in rows]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(rows)), 3.2))
    ax.bar(range(len(rows)), deltas, color=["#2a6" if d >= 0 else "#c44" for d in deltas])
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(tasks, rotation=30, ha="right")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_ylabel("score delta (candidate - base)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
