"""Sequential graph reasoning with context-state preprocessing.

Exact trace generators for six classical graph algorithms feed an
encode-process-decode pipeline. Optional gated context states accumulate
latent history across reasoning steps; reduction laws guarantee that a
zero forget factor reproduces the ungated pipeline bit for bit.
"""

from .autodiff import (
    ContractError,
    ParamGroup,
    ShapeError,
    Tensor,
    finite_difference_check,
    grad,
    tensor,
)
from .checkpoint import load_params, save_params
from .experiments import (
    ConfigError,
    ExperimentConfig,
    compare,
    load_config,
    run,
    save_config,
    sweep_alpha,
)
from .graphs import (
    Graph,
    GraphError,
    ProbeSpec,
    Trace,
    random_graph,
    trace_from_json,
    trace_to_json,
    validate_trace,
)
from .optim import adam_step, clip_grads, init_adam_state
from .pipeline import (
    Model,
    ModelConfig,
    harden,
    rng_for,
    rollout,
    run_step,
    sequence_loss,
)
from .tasks import TASKS, TaskError, sample_instance
from .training import (
    DEFAULT_SEEDS,
    EvalReport,
    TrainConfig,
    TrainError,
    TrainResult,
    evaluate,
    evaluate_traces,
    multi_seed,
    train,
    training_overhead,
)

__version__ = "0.1.0"

__all__ = [
    "ContractError",
    "ParamGroup",
    "ShapeError",
    "Tensor",
    "finite_difference_check",
    "grad",
    "tensor",
    "load_params",
    "save_params",
    "ConfigError",
    "ExperimentConfig",
    "compare",
    "load_config",
    "run",
    "save_config",
    "sweep_alpha",
    "Graph",
    "GraphError",
    "ProbeSpec",
    "Trace",
    "random_graph",
    "trace_from_json",
    "trace_to_json",
    "validate_trace",
    "adam_step",
    "clip_grads",
    "init_adam_state",
    "Model",
    "ModelConfig",
    "harden",
    "rng_for",
    "rollout",
    "run_step",
    "sequence_loss",
    "TASKS",
    "TaskError",
    "sample_instance",
    "DEFAULT_SEEDS",
    "EvalReport",
    "TrainConfig",
    "TrainError",
    "TrainResult",
    "evaluate",
    "evaluate_traces",
    "multi_seed",
    "train",
    "training_overhead",
    "__version__",
]
