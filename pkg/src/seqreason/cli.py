"""Command-line entry points.

Subcommands:
  gen          sample task instances and write their traces as JSON
  train        train one seed from an experiment config; save checkpoint + log
  eval         score a saved checkpoint on fresh instances
  run          full multi-seed experiment -> results.json/metrics.csv/timing.csv
  sweep-alpha  fixed forget-factor grid -> sweep.csv/sweep_grid.csv
  compare      pair results files by task -> comparison.csv/png

The default output root is ./runs, overridable with $SEQREASON_OUT or --out.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .checkpoint import load_params, save_params
from .experiments import (
    ConfigError,
    compare,
    load_config,
    resolve_out_dir,
    run,
    sweep_alpha,
)
from .pipeline import Model, rng_for
from .tasks import TASKS
from .graphs import trace_to_json
from .training import evaluate, train, write_training_log


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seqreason", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write task traces as JSON files")
    g.add_argument("--task", required=True, choices=sorted(TASKS))
    g.add_argument("--count", type=int, default=10)
    g.add_argument("--n-min", type=int, default=4)
    g.add_argument("--n-max", type=int, default=8)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default=None, help="output directory")

    t = sub.add_parser("train", help="train one seed and save a checkpoint")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int, default=None, help="override first config seed")
    t.add_argument("--out", default=None)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--config", required=True)
    e.add_argument("--params", required=True, help="checkpoint .npz")
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--out", default=None)

    r = sub.add_parser("run", help="multi-seed experiment from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None)
    r.add_argument("--jobs", type=int, default=1)

    s = sub.add_parser("sweep-alpha", help="fixed forget-factor grid sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default=None)
    s.add_argument("--jobs", type=int, default=1)

    c = sub.add_parser("compare", help="pair results.json files by task")
    c.add_argument("results", nargs="+", help="paths to results.json files")
    c.add_argument("--out", required=True)
    return p


def _cmd_gen(args) -> int:
    out = Path(args.out) if args.out else Path("runs") / f"gen_{args.task}"
    out.mkdir(parents=True, exist_ok=True)
    rng = rng_for(args.seed, "data")
    task = TASKS[args.task]
    for i in range(args.count):
        n = int(rng.integers(args.n_min, args.n_max + 1))
        tr = task.sample(rng, n)
        path = out / f"{args.task}_{i:04d}.json"
        path.write_text(trace_to_json(tr))
        print(path)
    return 0


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seeds[0] if args.seed is None else args.seed
    out = resolve_out_dir(cfg, args.out)
    out.mkdir(parents=True, exist_ok=True)
    tc = cfg.train_config(seed)
    result = train(tc)
    ckpt = out / f"checkpoint_seed{seed}.npz"
    save_params(ckpt, result.model.params)
    write_training_log(out / f"train_log_seed{seed}.csv", result.log)
    print(f"{ckpt} loss={result.log[-1]['loss']:.6f} seconds={result.seconds:.1f}")
    return 0


def _cmd_eval(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seeds[0] if args.seed is None else args.seed
    out = resolve_out_dir(cfg, args.out)
    out.mkdir(parents=True, exist_ok=True)
    tc = cfg.train_config(seed)
    model = Model(cfg=tc.model_config(), params=load_params(args.params))
    report = evaluate(model, tc)
    path = out / f"eval_report_seed{seed}.json"
    path.write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n")
    print(f"{path} aggregate={report.aggregate:.4f}")
    return 0


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    outcome = run(cfg, out_dir=args.out, jobs=args.jobs)
    print(f"{outcome['out_dir']} mean={outcome['results']['mean']:.4f}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    outcome = sweep_alpha(cfg, out_dir=args.out, jobs=args.jobs)
    print(f"{outcome['out_dir']} cells={len(outcome['rows'])}")
    return 0


def _cmd_compare(args) -> int:
    outcome = compare(args.results, args.out)
    for row in outcome["rows"]:
        print(f"{row['task']}: delta={row['delta']:+.4f}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "run": _cmd_run,
    "sweep-alpha": _cmd_sweep,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
