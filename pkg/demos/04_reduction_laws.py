"""
Reduction laws: the gated pipeline contains the plain one
=========================================================

Two identities hold bit for bit, not approximately:

  1. a fixed forget factor of zero reproduces the gate-free pipeline,
     because 0.0 * c + 1.0 * x == x in IEEE arithmetic for finite x;
  2. the context-attending transformer processor with context equal to
     its latents reproduces the plain transformer processor.

Both rely on shared layers being initialized from per-name RNG streams,
so adding a gate never reshuffles existing parameters.
"""
import numpy as np

from seqreason import Model, ModelConfig, rollout
from seqreason.autodiff import tensor
from seqreason.pipeline import build_params, rng_for
from seqreason.processors import cef_rt_process, rt_process
from seqreason.tasks import TASKS

rng = rng_for(1, "data")
batch = [TASKS["bfs"].sample(rng, 5) for _ in range(3)]

plain = Model.build(ModelConfig(task_id="bfs", processor="gnn", gate=None, d=16), seed=9)
fixed0 = Model.build(
    ModelConfig(task_id="bfs", processor="gnn", gate="fixed", fixed_alpha=(0.0, 0.0), d=16),
    seed=9,
)
print("shared parameter groups identical:",
      all(np.array_equal(plain.params[k].w.data, fixed0.params[k].w.data) for k in plain.params))

for mode in (True, False):
    a = rollout(plain, batch, teacher_forcing=mode)
    b = rollout(fixed0, batch, teacher_forcing=mode)
    same = all(
        np.array_equal(sa.logits[k].data, sb.logits[k].data)
        for sa, sb in zip(a, b)
        for k in sa.logits
    )
    label = "teacher-forced" if mode else "free-running"
    print(f"fixed alpha (0,0) == gate disabled, {label}: {same}")

# second law: hand the processor its own latents as context
params = build_params(ModelConfig(task_id="bellman_ford", processor="transformer", d=8), seed=2)
r = np.random.default_rng(0)
n = 5
z_V = tensor(r.normal(size=(2, n, 16)))
z_E = tensor(r.normal(size=(2, n, n, 16)))
adj = r.random((2, n, n)) > 0.4
base_V, base_E = rt_process(params, z_V, z_E, adj)
cef_V, cef_E = cef_rt_process(params, z_V, z_E, z_V, z_E, adj)
print("context == latents collapses to plain attention:",
      np.array_equal(base_V.data, cef_V.data) and np.array_equal(base_E.data, cef_E.data))
