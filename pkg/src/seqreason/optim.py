"""Adam optimizer with bias correction, operating on named ParamGroups."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Array, Grads, ParamGroup, Params, ShapeError


@dataclass
class OptimizerState:
    """First/second moment accumulators mirroring the parameter shapes."""

    m: dict[str, tuple[Array, Array]] = field(default_factory=dict)
    v: dict[str, tuple[Array, Array]] = field(default_factory=dict)
    step: int = 0


def init_adam_state(params: Params) -> OptimizerState:
    state = OptimizerState()
    for name, pg in params.items():
        state.m[name] = (np.zeros_like(pg.w.data), np.zeros_like(pg.b.data))
        state.v[name] = (np.zeros_like(pg.w.data), np.zeros_like(pg.b.data))
    return state


def adam_step(
    params: Params,
    grads: Grads,
    state: OptimizerState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[Params, OptimizerState]:
    """One Adam update in place; returns (params, state) for chaining.

    lr must be non-negative (zero is a legal no-op used in tests); 0.001
    and 0.00025 are the stock settings for the message-passing and
    attention model families respectively.
    """
    if lr < 0:
        raise ValueError(f"learning rate must be non-negative, got {lr}")
    state.step += 1
    t = state.step
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, pg in params.items():
        gw, gb = grads[name]
        if gw.shape != pg.w.data.shape or gb.shape != pg.b.data.shape:
            raise ShapeError(f"gradient shape mismatch for {name}")
        for arr, g, m, v in (
            (pg.w.data, gw, state.m[name][0], state.v[name][0]),
            (pg.b.data, gb, state.m[name][1], state.v[name][1]),
        ):
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * (g * g)
            arr -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params, state


def clip_grads(grads: Grads, max_norm: float) -> Grads:
    """Global-norm gradient clipping; returns clipped copies when needed."""
    total = 0.0
    for gw, gb in grads.values():
        total += float((gw * gw).sum() + (gb * gb).sum())
    norm = np.sqrt(total)
    if norm <= max_norm or norm == 0.0:
        return grads
    scale = max_norm / norm
    return {name: (gw * scale, gb * scale) for name, (gw, gb) in grads.items()}
