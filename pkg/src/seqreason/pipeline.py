"""Encode-process-decode pipeline with the context-state preprocessor.

One reasoning step is: encode the current feature bundle into latents,
enhance latents (or z) against the per-node/edge context state, run the
processor, decode every hint/output probe from the hidden states. The
rollout repeats this T times, feeding ground-truth hints (teacher
forcing) or the model's own hardened predictions (free running).

Parameter RNG streams are derived per layer name from (seed, crc32(name)),
so two model variants sharing a layer name share its exact initial values.
That is what makes "same seed" comparisons between the baseline and the
context-enhanced variants clean, and the fixed-alpha=0 reduction bitwise:
the fixed gate adds no parameters at all.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from .autodiff import (
    ContractError,
    Params,
    ShapeError,
    Tensor,
    bce_with_logits,
    concat,
    cross_entropy_with_logits,
    expand,
    linear,
    param_group,
    squared_error,
    tensor,
    zeros,
)
from .gates import attention_enhance, fixed_gate, gnn_gate, transformer_gate
from .processors import cef_rt_process, gnn_process, rt_process
from .tasks import TASKS, TaskError

PROCESSORS = ("gnn", "transformer", "cef_transformer")
GATES = (None, "gnn_tanh_relu", "transformer_sigmoid", "attention", "fixed")

# which gate variants make sense on which processor
_COMPAT = {
    "gnn": {None, "gnn_tanh_relu", "attention", "fixed"},
    "transformer": {None, "attention"},
    "cef_transformer": {"transformer_sigmoid", "fixed"},
}


@dataclass(frozen=True)
class ModelConfig:
    task_id: str
    processor: str = "gnn"
    gate: str | None = None
    d: int = 64
    fixed_alpha: tuple = (0.0, 0.0)
    gate_swap: bool = False  # swap relu(tanh) <-> sigmoid in the learned gate
    no_cross_attention: bool = False  # feed contexts as z instead of cross-attending

    def __post_init__(self):
        if self.task_id not in TASKS:
            raise TaskError(f"unknown task {self.task_id!r}")
        if self.processor not in PROCESSORS:
            raise ContractError(f"unknown processor {self.processor!r}")
        if self.gate not in GATES:
            raise ContractError(f"unknown gate {self.gate!r}")
        if self.gate not in _COMPAT[self.processor]:
            raise ContractError(f"gate {self.gate!r} incompatible with {self.processor!r}")
        a1, a2 = self.fixed_alpha
        if not (0.0 <= a1 <= 1.0 and 0.0 <= a2 <= 1.0):
            raise ContractError(f"fixed_alpha {self.fixed_alpha} outside [0,1]")
        if self.gate_swap and self.gate not in ("gnn_tanh_relu", "transformer_sigmoid"):
            raise ContractError("gate_swap needs a learned scalar gate")
        if self.no_cross_attention and self.processor != "cef_transformer":
            raise ContractError("no_cross_attention is a cef_transformer ablation")
        if self.d < 1:
            raise ContractError("d must be positive")

    @property
    def gate_activation(self):
        base = {"gnn_tanh_relu": "relu_tanh", "transformer_sigmoid": "sigmoid"}[self.gate]
        if not self.gate_swap:
            return base
        return "sigmoid" if base == "relu_tanh" else "relu_tanh"


@dataclass
class ContextState:
    """Per-variant context carried across steps; unused fields stay None."""

    node: Tensor | None = None
    edge: Tensor | None = None
    hidden: Tensor | None = None  # extra hidden-side context (fixed gnn gate)
    history: list = field(default_factory=list)


@dataclass
class StepIO:
    logits: dict  # probe name -> Tensor
    t: int
    teacher_forcing: bool


def rng_for(seed, name):
    """Independent, order-free parameter stream per (seed, layer name)."""
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode())]))


def _encoder_shapes(specs, d):
    shapes = {}
    for s in specs:
        if s.stage == "output":
            continue
        if s.kind == "node_index":
            shapes[f"enc.{s.name}.self"] = (d, 1)
            shapes[f"enc.{s.name}.ptr"] = (d, 2)
        else:
            shapes[f"enc.{s.name}"] = (d, 1)
    return shapes


def _decoder_shapes(specs, cfg):
    d = cfg.d
    shapes = {}
    for s in specs:
        if s.stage == "input":
            continue
        if s.kind == "node_index":
            shapes[f"dec.{s.name}.src"] = (d, d)
            shapes[f"dec.{s.name}.dst"] = (d, d)
        elif s.location == "node":
            shapes[f"dec.{s.name}"] = (1, d)
        else:
            # gnn runs keep no edge hiddens; decode edges from endpoint pairs
            shapes[f"dec.{s.name}"] = (1, 2 * d) if cfg.processor == "gnn" else (1, d)
    return shapes


def _processor_shapes(cfg):
    d = cfg.d
    if cfg.processor == "gnn":
        return {"proc.f1": (d, 2 * d), "proc.f2": (d, 3 * d), "proc.f3": (d, 2 * d)}
    return {
        "proc.f_query": (d, 4 * d),
        "proc.f_key": (d, 4 * d),
        "proc.f_value": (d, 4 * d),
        "proc.f_node": (d, 3 * d),
        "proc.f_edge": (d, 6 * d),
    }


def _gate_shapes(cfg):
    d = cfg.d
    if cfg.gate == "gnn_tanh_relu":
        return {"gate.node": (1, d)}
    if cfg.gate == "transformer_sigmoid":
        return {"gate.node": (1, 2 * d), "gate.edge": (1, 2 * d)}
    if cfg.gate == "attention":
        return {"gate.q": (d, d), "gate.k": (d, d), "gate.v": (d, d)}
    return {}  # None and fixed add no parameters


def build_params(cfg: ModelConfig, seed: int) -> Params:
    specs = TASKS[cfg.task_id].specs
    shapes = {}
    shapes.update(_encoder_shapes(specs, cfg.d))
    shapes.update(_decoder_shapes(specs, cfg))
    shapes.update(_processor_shapes(cfg))
    shapes.update(_gate_shapes(cfg))
    return {
        name: param_group(name, d_out, d_in, rng_for(seed, name))
        for name, (d_out, d_in) in sorted(shapes.items())
    }


@dataclass
class Model:
    cfg: ModelConfig
    params: Params

    @classmethod
    def build(cls, cfg, seed):
        return cls(cfg=cfg, params=build_params(cfg, seed))

    @property
    def specs(self):
        return TASKS[self.cfg.task_id].specs


# -- encode / decode -------------------------------------------------------------


def encode(x, specs, params, adjacency, d):
    """Sum per-probe linear embeddings into node/edge latents.

    Pointer probes contribute twice: a self-loop bit on the node side and
    forward/reverse one-hot bits on the dense edge side. Edge latents are
    zeroed outside the adjacency.
    """
    B, n = adjacency.shape[0], adjacency.shape[1]
    known = {s.name for s in specs if s.stage != "output"}
    extra = set(x) - known
    if extra:
        raise ContractError(f"unknown probes in bundle: {sorted(extra)}")
    l_V = zeros((B, n, d))
    l_E = zeros((B, n, n, d))
    eye = np.arange(n)
    for s in specs:
        if s.stage == "output" or s.name not in x:
            continue
        v = np.asarray(x[s.name])
        if s.kind == "node_index":
            fwd = (v[..., None] == eye).astype(np.float64)  # [b,v,u] = ptr[v]==u
            rev = fwd.transpose(0, 2, 1)
            l_E = l_E + linear(params[f"enc.{s.name}.ptr"], tensor(np.stack([fwd, rev], axis=-1)))
            self_bit = (v == eye).astype(np.float64)[..., None]
            l_V = l_V + linear(params[f"enc.{s.name}.self"], tensor(self_bit))
        elif s.location == "node":
            l_V = l_V + linear(params[f"enc.{s.name}"], tensor(v[..., None]))
        else:
            l_E = l_E + linear(params[f"enc.{s.name}"], tensor(v[..., None]))
    l_E = l_E * adjacency[..., None].astype(np.float64)
    return l_V, l_E


def concat_state(s, h):
    """z = [s, h] along the feature axis; shapes must agree elsewhere."""
    if s.shape[:-1] != h.shape[:-1]:
        raise ShapeError(f"concat_state: {s.shape} vs {h.shape}")
    return concat([s, h], axis=-1)


def decode(h_V, h_E, specs, params, cfg):
    """Per-probe linear decoders from hidden states.

    Node scalars/masks: one logit per node. Pointers: bilinear pairwise
    logits (src h_v) . (dst h_u) / sqrt(d), one n-way distribution per
    node. Edge probes read h_E, or endpoint pairs [h_u, h_v] on gnn runs.
    """
    n = h_V.shape[1]
    out = {}
    for s in specs:
        if s.stage == "input":
            continue
        if s.kind == "node_index":
            src = linear(params[f"dec.{s.name}.src"], h_V)
            dst = linear(params[f"dec.{s.name}.dst"], h_V)
            pair = expand(src, 2, n) * expand(dst, 1, n)  # [b,v,u]
            out[s.name] = pair.sum(axis=-1) * (1.0 / np.sqrt(cfg.d))
        elif s.location == "node":
            out[s.name] = linear(params[f"dec.{s.name}"], h_V).reshape((h_V.shape[0], n))
        else:
            if cfg.processor == "gnn":
                h_u = expand(h_V, 2, n)
                h_v = expand(h_V, 1, n)
                src = concat([h_u, h_v], axis=-1)
            else:
                src = h_E
            out[s.name] = linear(params[f"dec.{s.name}"], src).reshape((h_V.shape[0], n, n))
    return out


def step_loss(logits, y, specs, adjacency=None, weights=None):
    """Mean loss over supervised elements, summed over probes present in y.

    mask -> binary cross-entropy, node_index -> softmax cross-entropy over
    n targets, scalar -> squared error. ``weights`` is an optional (B,)
    supervision mask; edge probes additionally count only live edges.
    """
    total = None
    for s in specs:
        if s.stage == "input" or s.name not in y:
            continue
        target = np.asarray(y[s.name])
        pred = logits[s.name]
        n = pred.shape[1]
        if s.kind == "mask":
            elem = bce_with_logits(pred, target.astype(np.float64))
        elif s.kind == "node_index":
            onehot = (target[..., None] == np.arange(n)).astype(np.float64)
            elem = cross_entropy_with_logits(pred, onehot, axis=-1)
        else:
            elem = squared_error(pred, target.astype(np.float64))
        w = np.ones(elem.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
        wfull = np.broadcast_to(w.reshape((-1,) + (1,) * (len(elem.shape) - 1)), elem.shape).copy()
        if s.location == "edge":
            if adjacency is None:
                raise ContractError("edge probes need the adjacency for masking")
            wfull = wfull * adjacency
        count = wfull.sum()
        if count == 0:
            continue
        probe_loss = (elem * wfull).sum() * (1.0 / count)
        total = probe_loss if total is None else total + probe_loss
    if total is None:
        raise ContractError("no supervised probes in target bundle")
    return total


# -- step orchestration ------------------------------------------------------------


def init_state(cfg, B, n):
    """Zero hidden states and the variant's initial context."""
    d = cfg.d
    h_V = zeros((B, n, d))
    h_E = zeros((B, n, n, d)) if cfg.processor != "gnn" else None
    if cfg.gate == "gnn_tanh_relu":
        c = ContextState(node=zeros((B, n, d)))
    elif cfg.gate == "fixed" and cfg.processor == "gnn":
        c = ContextState(node=zeros((B, n, d)), hidden=zeros((B, n, d)))
    elif cfg.gate in ("transformer_sigmoid", "fixed"):
        c = ContextState(node=zeros((B, n, 2 * d)), edge=zeros((B, n, n, 2 * d)))
    elif cfg.gate == "attention":
        c = ContextState(history=[])
    else:
        c = ContextState()
    return (h_V, h_E), c


def run_step(model, x, h, c, adjacency):
    """One full reasoning step; returns (logits, h_next, c_next)."""
    cfg, params = model.cfg, model.params
    specs = model.specs
    h_V, h_E = h
    l_V, l_E = encode(x, specs, params, adjacency, cfg.d)

    if cfg.processor == "gnn":
        c_next = c
        if cfg.gate is None:
            s_V, h_in = l_V, h_V
        elif cfg.gate == "gnn_tanh_relu":
            s_V, c_node = gnn_gate(l_V, c.node, params, cfg.gate_activation)
            c_next = ContextState(node=c_node)
            h_in = h_V
        elif cfg.gate == "attention":
            s_V, hist = attention_enhance(l_V, c.history, params)
            c_next = ContextState(history=hist)
            h_in = h_V
        else:  # fixed: alpha_1 on the latent side, alpha_2 on the hidden side
            a1, a2 = cfg.fixed_alpha
            s_V, c_node = fixed_gate(l_V, c.node, a1)
            h_in, c_hidden = fixed_gate(h_V, c.hidden, a2)
            c_next = ContextState(node=c_node, hidden=c_hidden)
        z_V = concat_state(s_V, h_in)
        h_V_next = gnn_process(params, z_V, l_E, adjacency)
        logits = decode(h_V_next, None, specs, params, cfg)
        return logits, (h_V_next, None), c_next

    if cfg.processor == "transformer":
        c_next = c
        if cfg.gate == "attention":
            s_V, hist = attention_enhance(l_V, c.history, params)
            c_next = ContextState(history=hist)
        else:
            s_V = l_V
        z_V = concat_state(s_V, h_V)
        z_E = concat_state(l_E, h_E)
        h_V_next, h_E_next = rt_process(params, z_V, z_E, adjacency)
        logits = decode(h_V_next, h_E_next, specs, params, cfg)
        return logits, (h_V_next, h_E_next), c_next

    # cef_transformer: gate z against contexts, cross-attend on the contexts
    if cfg.gate == "transformer_sigmoid":
        act = cfg.gate_activation
        z_V, c_V = transformer_gate(l_V, h_V, c.node, params["gate.node"], act)
        z_E, c_E = transformer_gate(l_E, h_E, c.edge, params["gate.edge"], act)
    else:  # fixed: alpha_1 nodes, alpha_2 edges
        a1, a2 = cfg.fixed_alpha
        z_V = concat_state(l_V, h_V)
        z_E = concat_state(l_E, h_E)
        _, c_V = fixed_gate(z_V, c.node, a1)
        _, c_E = fixed_gate(z_E, c.edge, a2)
    if cfg.no_cross_attention:
        # ablation: contexts replace z outright instead of feeding attention
        h_V_next, h_E_next = rt_process(params, c_V, c_E, adjacency)
    else:
        h_V_next, h_E_next = cef_rt_process(params, z_V, z_E, c_V, c_E, adjacency)
    logits = decode(h_V_next, h_E_next, specs, model.params, cfg)
    return logits, (h_V_next, h_E_next), ContextState(node=c_V, edge=c_E)


# -- rollout --------------------------------------------------------------------


def _stack_bundles(traces, pick):
    out = {}
    for name in pick(traces[0]):
        out[name] = np.stack([pick(tr)[name] for tr in traces])
    return out


def harden(logits, specs, for_stage="hint"):
    """Turn logits into feedable values: threshold masks at p = 0.5,
    argmax pointers, clip scalars into the unit interval."""
    out = {}
    for s in specs:
        if s.stage != for_stage or s.name not in logits:
            continue
        data = logits[s.name].data
        if s.kind == "mask":
            out[s.name] = (data > 0).astype(np.float64)
        elif s.kind == "node_index":
            out[s.name] = np.argmax(data, axis=-1).astype(np.int64)
        else:
            out[s.name] = np.clip(data, 0.0, 1.0)
    return out


def rollout(model, traces, teacher_forcing):
    """Run max(T) steps over a same-n batch of traces; returns [StepIO].

    Step 1 sees only the input bundle; step t >= 2 additionally sees the
    previous step's hints: ground truth when teacher forcing (clamped to
    each trace's own horizon), else the model's hardened predictions.
    """
    n = traces[0].graph.n
    if any(tr.graph.n != n for tr in traces):
        raise ContractError("rollout batch must share one node count")
    adjacency = np.stack([tr.graph.adjacency for tr in traces])
    specs = model.specs
    inputs = _stack_bundles(traces, lambda tr: tr.inputs)
    T_max = max(tr.T for tr in traces)
    h, c = init_state(model.cfg, len(traces), n)
    steps = []
    fed = None
    for t in range(1, T_max + 1):
        x = dict(inputs)
        if t >= 2:
            if teacher_forcing:
                hint_names = [s.name for s in specs if s.stage == "hint"]
                x.update(
                    {
                        name: np.stack([tr.hints[min(t - 2, tr.T - 1)][name] for tr in traces])
                        for name in hint_names
                    }
                )
            else:
                x.update(fed)
        logits, h, c = run_step(model, x, h, c, adjacency)
        steps.append(StepIO(logits=logits, t=t, teacher_forcing=teacher_forcing))
        if not teacher_forcing:
            fed = harden(logits, specs)
    return steps


def sequence_loss(model, traces, steps=None):
    """Teacher-forced loss summed over steps: hints each step they are
    live, outputs once at each trace's final step."""
    if steps is None:
        steps = rollout(model, traces, teacher_forcing=True)
    specs = model.specs
    adjacency = np.stack([tr.graph.adjacency for tr in traces])
    outputs = _stack_bundles(traces, lambda tr: tr.outputs)
    hint_names = [s.name for s in specs if s.stage == "hint"]
    total = None
    for step in steps:
        t = step.t
        live = np.array([t <= tr.T for tr in traces], dtype=np.float64)
        y = {
            name: np.stack([tr.hints[min(t - 1, tr.T - 1)][name] for tr in traces])
            for name in hint_names
        }
        part = step_loss(step.logits, y, specs, adjacency, weights=live)
        final = np.array([t == tr.T for tr in traces], dtype=np.float64)
        if final.any():
            part = part + step_loss(step.logits, outputs, specs, adjacency, weights=final)
        total = part if total is None else total + part
    return total
