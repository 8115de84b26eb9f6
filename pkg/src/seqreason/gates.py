"""Context-state preprocessor: gated blends and the attention variant.

Each node (and, for the transformer path, each edge) carries a context
vector across reasoning steps. Before the processor runs, the context is
blended with the fresh latent (or with z = [latent, hidden]) through a
scalar forget factor alpha produced from the context itself:

    gnn path:          alpha = relu(tanh(linear(c)));  s = c' = a*c + (1-a)*l
    transformer path:  alpha = sigmoid(linear(c));     c' = a*c + (1-a)*z

alpha is a per-node/per-edge scalar, not per-channel. One linear layer is
shared across all nodes (and a second across all edges); with zero-bias
init the cold start is alpha = 0 (gnn) or 0.5 (transformer), so fresh
input dominates early.

The attention variant replaces the blend with QKV attention over the
full history of latents; its memory grows linearly in t by design.

fixed_gate pins alpha to a constant for the forget-factor sweep; with
alpha = 0 every variant reduces bitwise to the no-context baseline.
"""
import numpy as np

from .autodiff import concat, expand, linear, softmax, stack


class GateError(ValueError):
    pass


def _alpha(pg, c, activation):
    pre = linear(pg, c)  # (..., 1), one scalar per node/edge
    if activation == "relu_tanh":
        return pre.tanh().relu()
    if activation == "sigmoid":
        return pre.sigmoid()
    raise GateError(f"unknown gate activation {activation!r}")


def gnn_gate(l_V, c_V, params, activation="relu_tanh"):
    """Blend node latents with node contexts; returns (s_V, c_V_next).

    s and c_next are the same value by construction. Edge latents are the
    caller's pass-through (no edge context on this path).
    """
    if l_V.shape != c_V.shape:
        raise GateError(f"latent {l_V.shape} vs context {c_V.shape}")
    a = _alpha(params["gate.node"], c_V, activation)
    s = a * c_V + (1.0 - a) * l_V
    return s, s


def transformer_gate(l, h_prev, c, pg, activation="sigmoid"):
    """Build z = [l, h_prev], gate it against the context; returns (z, c_next).

    Used once with the node linear and once with the edge linear; the
    processor consumes both z and c_next (mutual sharing).
    """
    z = concat([l, h_prev], axis=-1)
    if z.shape != c.shape:
        raise GateError(f"z {z.shape} vs context {c.shape}")
    a = _alpha(pg, c, activation)
    c_next = a * c + (1.0 - a) * z
    return z, c_next


def attention_enhance(l_V, history, params):
    """QKV attention of the current latent over the latent history.

    Empty history (t = 1) attends over the current latent itself, giving
    a single weight of exactly 1. Returns (s_V, history_next) where the
    history grows by one entry per step.
    """
    entries = list(history) if history else [l_V]
    d = params["gate.q"].d_out
    q = linear(params["gate.q"], l_V)
    keys = stack([linear(params["gate.k"], e) for e in entries], axis=-2)
    vals = stack([linear(params["gate.v"], e) for e in entries], axis=-2)
    qx = expand(q, -2, len(entries))
    scores = (qx * keys).sum(axis=-1) * (1.0 / np.sqrt(d))
    w = softmax(scores, axis=-1)
    s = (expand(w, -1, d) * vals).sum(axis=-2)
    return s, [l_V] + list(history)


def fixed_gate(x, c, alpha):
    """Constant-alpha blend for the sweep; returns (s, c_next), s = c_next.

    alpha = 0 reproduces the fresh input exactly (IEEE: 0*c + 1*x == x),
    which is what makes the no-context reduction bitwise.
    """
    if not 0.0 <= alpha <= 1.0:
        raise GateError(f"alpha {alpha} outside [0,1]")
    s = alpha * c + (1.0 - alpha) * x
    return s, s
