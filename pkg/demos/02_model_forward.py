"""
One forward pass through the encode-process-decode pipeline
===========================================================

Builds a context-gated message-passing model, rolls a batch of BFS
traces forward under teacher forcing, and inspects shapes, losses,
and the forget factors the gate actually produced.
"""
import numpy as np

from seqreason import Model, ModelConfig, rollout, sequence_loss
from seqreason.autodiff import linear
from seqreason.pipeline import rng_for
from seqreason.tasks import TASKS

cfg = ModelConfig(task_id="bfs", processor="gnn", gate="gnn_tanh_relu", d=32)
model = Model.build(cfg, seed=0)
print(f"model: {cfg.processor} + {cfg.gate}, d={cfg.d}")
print(f"parameter groups: {len(model.params)}")
for name in sorted(model.params)[:6]:
    pg = model.params[name]
    print(f"  {name}: w{pg.w.data.shape}")
print("  ...")

# a batch must share one node count; T may differ per element
rng = rng_for(3, "data")
batch = [TASKS["bfs"].sample(rng, 6) for _ in range(4)]
print(f"\nbatch: {len(batch)} instances at n=6, T in {sorted(tr.T for tr in batch)}")

steps = rollout(model, batch, teacher_forcing=True)
for s in steps[:2]:
    shapes = {k: v.shape for k, v in s.logits.items()}
    print(f"  step {s.t} logits: {shapes}")

loss = sequence_loss(model, batch, steps=steps)
print(f"teacher-forced loss (summed over {len(steps)} steps): {float(loss.data):.4f}")

# the gate maps the running context to a forget factor per node;
# at step 1 the context is all zeros, so alpha is exactly zero and
# the latents pass straight through
ctx = np.zeros((1, 6, cfg.d))
pre = ctx @ model.params["gate.node"].w.data.T + model.params["gate.node"].b.data
alpha = np.maximum(np.tanh(pre), 0.0)
print(f"cold-start alpha: {np.unique(alpha)}")

rng2 = np.random.default_rng(1)
ctx = rng2.normal(size=(1, 6, cfg.d))
pre = ctx @ model.params["gate.node"].w.data.T + model.params["gate.node"].b.data
alpha = np.maximum(np.tanh(pre), 0.0)
print(f"random-context alpha range: [{alpha.min():.4f}, {alpha.max():.4f}] (always < 1)")
