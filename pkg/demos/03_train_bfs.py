"""
Training a small model on BFS
=============================

Trains a context-gated message-passing model at reduced size, then
evaluates it free-running: each step consumes the model's own hardened
predictions instead of ground truth. Takes about half a minute on CPU.
"""
from seqreason import TrainConfig, evaluate, train

cfg = TrainConfig(
    task_id="bfs",
    gate="gnn_tanh_relu",
    d=32,
    batch_size=16,
    steps=400,
    lr=0.001,
    seed=5,
)

result = train(cfg)
log = result.log
print(f"trained {cfg.steps} steps in {result.seconds:.1f}s")
for i in (0, 99, 249, 399):
    print(f"  step {log[i]['step']:4d}: loss {log[i]['loss']:.4f}")

report = evaluate(result.model, cfg)
print(f"\nfree-running eval on {report.instances} fresh instances:")
for name, score in sorted(report.output_scores.items()):
    print(f"  output {name}: {score:.4f}")
for name, score in sorted(report.hint_scores.items()):
    print(f"  hint   {name}: {score:.4f}")
print(f"aggregate: {report.aggregate:.4f}")
