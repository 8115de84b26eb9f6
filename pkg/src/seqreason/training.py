"""Training loop, free-running evaluation, and cross-seed aggregation.

Batches are generated on the fly (fresh instances every step); an optional
frozen dataset supports memorization checks. Evaluation hardens each step's
predictions and feeds them forward, then scores outputs at each trace's
final step: masks by F1 over the positive class, pointers by exact match,
scalars by a 0.01 tolerance on the normalized value. The aggregate is the
element-weighted mean over output probes. Hint probes are scored the same
way and reported separately as diagnostics.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, replace

import numpy as np

from .autodiff import ContractError, zero_grads
from .optim import adam_step, clip_grads, init_adam_state
from .pipeline import Model, ModelConfig, harden, rng_for, rollout, sequence_loss
from .tasks import TASKS

# seeds used for headline numbers; override via multi_seed(cfg, seeds=...)
DEFAULT_SEEDS = (5, 18, 25, 30, 42)

SCALAR_TOL = 0.01


class TrainError(RuntimeError):
    """Aborted training run; carries the offending step and batch."""

    def __init__(self, message, step=None, batch=None):
        super().__init__(message)
        self.step = step
        self.batch = batch


@dataclass
class TrainConfig:
    task_id: str
    processor: str = "gnn"
    gate: str | None = None
    d: int = 64
    fixed_alpha: tuple[float, float] = (0.0, 0.0)
    gate_swap: bool = False
    no_cross_attention: bool = False
    batch_size: int | None = None
    steps: int = 2000
    lr: float | None = None
    seed: int = 42
    n_train: tuple[int, int] = (4, 8)
    eval_sizes: tuple[int, int] = (4, 8)
    eval_instances: int = 64
    clip_norm: float | None = None

    def __post_init__(self):
        # stock settings: the message-passing family trains at batch 32 /
        # lr 0.001, the attention family at batch 4 / lr 0.00025
        if self.batch_size is None:
            self.batch_size = 32 if self.processor == "gnn" else 4
        if self.lr is None:
            self.lr = 0.001 if self.processor == "gnn" else 0.00025
        if self.batch_size < 1:
            raise ContractError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.steps < 0:
            raise ContractError(f"steps must be >= 0, got {self.steps}")
        if self.lr < 0:
            raise ContractError(f"lr must be >= 0, got {self.lr}")
        if self.eval_instances < 1:
            raise ContractError(f"eval_instances must be >= 1, got {self.eval_instances}")
        for lo, hi in (self.n_train, self.eval_sizes):
            if lo < 1 or hi < lo:
                raise ContractError(f"bad size range ({lo}, {hi})")
        self.model_config()  # validate model fields eagerly

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            task_id=self.task_id,
            processor=self.processor,
            gate=self.gate,
            d=self.d,
            fixed_alpha=tuple(self.fixed_alpha),
            gate_swap=self.gate_swap,
            no_cross_attention=self.no_cross_attention,
        )


@dataclass
class TrainResult:
    model: Model
    log: list  # rows {step, loss, seconds}
    seconds: float


@dataclass
class EvalReport:
    task_id: str
    output_scores: dict
    output_elements: dict
    hint_scores: dict
    aggregate: float
    instances: int
    seconds: float

    def as_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "output_scores": dict(self.output_scores),
            "output_elements": {k: int(v) for k, v in self.output_elements.items()},
            "hint_scores": dict(self.hint_scores),
            "aggregate": self.aggregate,
            "instances": self.instances,
            "seconds": self.seconds,
        }


@dataclass
class MultiSeedReport:
    task_id: str
    seeds: tuple
    mean: float
    std: float
    per_seed: dict  # seed -> aggregate
    output_scores: dict  # probe -> (mean, std)
    hint_scores: dict
    train_seconds: list
    eval_seconds: list

    def as_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "seeds": list(self.seeds),
            "mean": self.mean,
            "std": self.std,
            "per_seed": {str(k): v for k, v in self.per_seed.items()},
            "output_scores": {k: list(v) for k, v in self.output_scores.items()},
            "hint_scores": {k: list(v) for k, v in self.hint_scores.items()},
            "train_seconds": list(self.train_seconds),
            "eval_seconds": list(self.eval_seconds),
        }


def mean_std(values) -> tuple[float, float]:
    """Mean and sample standard deviation; a single value has std 0."""
    v = np.asarray(list(values), dtype=np.float64)
    if v.size == 0:
        raise ContractError("mean_std needs at least one value")
    std = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return float(np.mean(v)), std


def sample_batch(task_id, rng, n_lo, n_hi, size):
    """One training batch: a shared node count, freshly sampled instances."""
    n = int(rng.integers(n_lo, n_hi + 1))
    task = TASKS[task_id]
    return [task.sample(rng, n) for _ in range(size)]


def _collect_grads(params):
    out = {}
    for name, pg in params.items():
        gw = pg.w.grad if pg.w.grad is not None else np.zeros_like(pg.w.data)
        gb = pg.b.grad if pg.b.grad is not None else np.zeros_like(pg.b.data)
        out[name] = (gw, gb)
    return out


def train(cfg: TrainConfig, dataset=None, model=None) -> TrainResult:
    """Run the teacher-forced training loop.

    dataset: optional frozen list of traces sharing one node count; each
    step then draws its batch from this list instead of sampling fresh
    instances (memorization checks). model: optional warm start.
    """
    if model is None:
        model = Model.build(cfg.model_config(), cfg.seed)
    state = init_adam_state(model.params)
    data_rng = rng_for(cfg.seed, "data")
    log = []
    t0 = time.perf_counter()
    for step in range(1, cfg.steps + 1):
        s0 = time.perf_counter()
        if dataset is None:
            batch = sample_batch(cfg.task_id, data_rng, *cfg.n_train, cfg.batch_size)
        elif len(dataset) <= cfg.batch_size:
            batch = list(dataset)
        else:
            idx = data_rng.choice(len(dataset), size=cfg.batch_size, replace=False)
            batch = [dataset[i] for i in idx]
        zero_grads(model.params)
        loss = sequence_loss(model, batch)
        value = float(loss.data)
        if not np.isfinite(value):
            raise TrainError(f"non-finite loss {value} at step {step}", step=step, batch=batch)
        loss.backward()
        grads = _collect_grads(model.params)
        if cfg.clip_norm is not None:
            grads = clip_grads(grads, cfg.clip_norm)
        adam_step(model.params, grads, state, lr=cfg.lr)
        log.append({"step": step, "loss": value, "seconds": time.perf_counter() - s0})
    return TrainResult(model=model, log=log, seconds=time.perf_counter() - t0)


def write_training_log(path, log) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["step", "loss", "seconds"])
        writer.writeheader()
        for row in log:
            writer.writerow(row)


def read_training_log(path) -> list:
    with open(path, newline="") as fh:
        return [
            {"step": int(r["step"]), "loss": float(r["loss"]), "seconds": float(r["seconds"])}
            for r in csv.DictReader(fh)
        ]


class ProbePool:
    """Pooled score accumulator for one probe across instances and steps."""

    def __init__(self, kind):
        if kind not in ("scalar", "mask", "node_index"):
            raise ContractError(f"unknown probe kind {kind!r}")
        self.kind = kind
        self.tp = 0.0
        self.fp = 0.0
        self.fn = 0.0
        self.hits = 0.0
        self.elements = 0

    def add(self, pred, truth):
        pred = np.asarray(pred)
        truth = np.asarray(truth)
        if pred.shape != truth.shape:
            raise ContractError(f"shape mismatch {pred.shape} vs {truth.shape}")
        if self.kind == "mask":
            p = pred > 0.5
            t = truth > 0.5
            self.tp += float(np.sum(p & t))
            self.fp += float(np.sum(p & ~t))
            self.fn += float(np.sum(~p & t))
        elif self.kind == "node_index":
            self.hits += float(np.sum(pred.astype(np.int64) == truth.astype(np.int64)))
        else:
            self.hits += float(np.sum(np.abs(pred - truth) < SCALAR_TOL))
        self.elements += pred.size

    def score(self) -> float:
        if self.elements == 0:
            raise ContractError("empty pool has no score")
        if self.kind == "mask":
            denom = 2.0 * self.tp + self.fp + self.fn
            # vacuous case: no positives predicted or required anywhere
            return 1.0 if denom == 0.0 else 2.0 * self.tp / denom
        return self.hits / self.elements


def evaluate_traces(model: Model, traces) -> EvalReport:
    """Free-running rollout and scoring over an explicit instance list."""
    if not traces:
        raise ContractError("need at least one trace")
    t0 = time.perf_counter()
    specs = model.specs
    out_pools = {s.name: ProbePool(s.kind) for s in specs if s.stage == "output"}
    hint_pools = {s.name: ProbePool(s.kind) for s in specs if s.stage == "hint"}
    groups = {}
    for tr in traces:
        groups.setdefault(tr.graph.n, []).append(tr)
    for group in groups.values():
        steps = rollout(model, group, teacher_forcing=False)
        for step in steps:
            hard_h = harden(step.logits, specs, for_stage="hint")
            hard_o = harden(step.logits, specs, for_stage="output")
            for b, tr in enumerate(group):
                if step.t <= tr.T:
                    for name, pool in hint_pools.items():
                        pool.add(hard_h[name][b], tr.hints[step.t - 1][name])
                if step.t == tr.T:
                    for name, pool in out_pools.items():
                        pool.add(hard_o[name][b], tr.outputs[name])
    output_scores = {name: pool.score() for name, pool in out_pools.items()}
    output_elements = {name: pool.elements for name, pool in out_pools.items()}
    hint_scores = {name: pool.score() for name, pool in hint_pools.items()}
    total = sum(output_elements.values())
    aggregate = sum(output_scores[k] * output_elements[k] for k in output_scores) / total
    return EvalReport(
        task_id=model.cfg.task_id,
        output_scores=output_scores,
        output_elements=output_elements,
        hint_scores=hint_scores,
        aggregate=aggregate,
        instances=len(traces),
        seconds=time.perf_counter() - t0,
    )


def evaluate(model: Model, cfg: TrainConfig, instances=None, seed=None) -> EvalReport:
    """Sample fresh instances at the configured eval sizes and score them."""
    instances = cfg.eval_instances if instances is None else instances
    seed = cfg.seed if seed is None else seed
    t0 = time.perf_counter()
    rng = rng_for(seed, "eval")
    lo, hi = cfg.eval_sizes
    task = TASKS[cfg.task_id]
    traces = [task.sample(rng, int(rng.integers(lo, hi + 1))) for _ in range(instances)]
    report = evaluate_traces(model, traces)
    report.seconds = time.perf_counter() - t0  # include sampling
    return report


def multi_seed(cfg: TrainConfig, seeds=DEFAULT_SEEDS) -> MultiSeedReport:
    """Train and evaluate once per seed; report mean and sample std per metric."""
    seeds = tuple(seeds)
    if not seeds:
        raise ContractError("need at least one seed")
    reports = []
    train_seconds = []
    eval_seconds = []
    for s in seeds:
        run_cfg = replace(cfg, seed=int(s))
        result = train(run_cfg)
        report = evaluate(result.model, run_cfg)
        reports.append(report)
        train_seconds.append(result.seconds)
        eval_seconds.append(report.seconds)
    mean, std = mean_std([r.aggregate for r in reports])
    output_scores = {
        name: mean_std([r.output_scores[name] for r in reports])
        for name in reports[0].output_scores
    }
    hint_scores = {
        name: mean_std([r.hint_scores[name] for r in reports])
        for name in reports[0].hint_scores
    }
    return MultiSeedReport(
        task_id=cfg.task_id,
        seeds=seeds,
        mean=mean,
        std=std,
        per_seed={int(s): r.aggregate for s, r in zip(seeds, reports)},
        output_scores=output_scores,
        hint_scores=hint_scores,
        train_seconds=train_seconds,
        eval_seconds=eval_seconds,
    )


def _timed_steps(cfg: TrainConfig):
    """Generator running the train() loop one step per next(); yields seconds."""
    model = Model.build(cfg.model_config(), cfg.seed)
    state = init_adam_state(model.params)
    data_rng = rng_for(cfg.seed, "data")
    while True:
        s0 = time.perf_counter()
        batch = sample_batch(cfg.task_id, data_rng, *cfg.n_train, cfg.batch_size)
        zero_grads(model.params)
        loss = sequence_loss(model, batch)
        loss.backward()
        adam_step(model.params, _collect_grads(model.params), state, lr=cfg.lr)
        yield time.perf_counter() - s0


def training_overhead(cef_cfg: TrainConfig, base_cfg: TrainConfig, steps=60, warmup=10) -> dict:
    """Median per-step training time of a context-gated model vs its base.

    The two loops advance in lockstep (one cef step, then one base step),
    so load spikes and clock-frequency drift hit both streams equally;
    sequential phase timing on a busy machine can swing 30% either way.
    Warmup steps are dropped so allocator effects do not skew the ratio.
    """
    if steps - warmup < 5:
        raise ContractError("need at least 5 timed steps after warmup")
    gens = {"cef": _timed_steps(cef_cfg), "base": _timed_steps(base_cfg)}
    times = {"cef": [], "base": []}
    for i in range(steps):
        for label in ("cef", "base"):
            seconds = next(gens[label])
            if i >= warmup:
                times[label].append(seconds)
    rows = {label: float(np.median(ts)) for label, ts in times.items()}
    return {
        "cef_step_seconds": rows["cef"],
        "base_step_seconds": rows["base"],
        "ratio": rows["cef"] / rows["base"],
    }
