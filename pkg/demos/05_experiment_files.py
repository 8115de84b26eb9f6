"""
Experiments as files: run, sweep, compare
=========================================

The experiment harness is driven by one JSON config per experiment and
emits plain CSV/JSON artifacts. This demo runs a tiny baseline and a
tiny gated variant, sweeps a 2x2 forget-factor grid, and renders the
comparison, all under a temporary directory.
"""
import json
import tempfile
from pathlib import Path

from seqreason import ExperimentConfig, compare, run, sweep_alpha

root = Path(tempfile.mkdtemp(prefix="seqreason_demo_"))
print(f"writing under {root}")

common = dict(
    task_id="bfs",
    d=16,
    batch_size=8,
    steps=120,
    n_train=[4, 6],
    eval_sizes=[4, 6],
    eval_instances=24,
    seeds=[5, 18],
)

base = ExperimentConfig(name="bfs_base", **common)
cef = ExperimentConfig(name="bfs_cef", gate="gnn_tanh_relu", **common)

out_base = run(base, out_dir=root / "base")
out_cef = run(cef, out_dir=root / "cef")
print(f"base mean: {out_base['results']['mean']:.4f}")
print(f"cef  mean: {out_cef['results']['mean']:.4f}")

for f in sorted((root / "base").iterdir()):
    print(f"  emitted {f.name}")

# the sweep trains one fixed-gate model per grid cell and seed
sweep_cfg = ExperimentConfig(
    name="bfs_sweep", alpha_grid=[[0.0, 0.5], [0.0, 0.5]], **common
)
swept = sweep_alpha(sweep_cfg, out_dir=root / "sweep")
print("\nsweep grid (mean score per cell):")
for row in swept["grid"]:
    cells = {k: v for k, v in row.items() if k != "alpha1"}
    print(f"  alpha1={row['alpha1']}: {cells}")

# a zero-zero cell is the baseline, bit for bit, seed for seed
zero = [r for r in swept["rows"] if r["alpha1"] == 0.0 and r["alpha2"] == 0.0]
per_seed = json.loads((root / "base" / "results.json").read_text())["per_seed"]
print("zero cell == baseline:",
      all(r["score"] == per_seed[str(r["seed"])] for r in zero))

cmp_out = compare(
    [root / "base" / "results.json", root / "cef" / "results.json"],
    root / "comparison",
)
row = cmp_out["rows"][0]
print(f"\ncomparison: delta={row['delta']:+.4f}, timing ratio={row['timing_ratio']:.2f}")
print(f"plot: {root / 'comparison' / 'comparison.png'}")
