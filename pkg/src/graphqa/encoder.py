"""Query-conditioned graph encoder with hand-written backpropagation.

Each retrieved subgraph is encoded by L rounds of gated message passing.
Per oriented edge (v_i -> v_j) at layer l the gate is

    alpha = w_alpha_l . concat(z_vi, q)      (source term)
    beta  = w_beta_l  . concat(z_vj, q)      (target term)
    gamma = w_gamma   . concat(z_e,  q)      (edge term, layer-shared)
    zeta  = tanh(alpha + gamma - beta)

and the gated message W_msg_l . concat(z_vi, z_vj, z_e, q) is averaged over
the target's incident orientations; nodes without neighbors keep their
state. Final states mean-pool to z_S, demonstration embeddings fuse with
the current one by softmax relevance weights, and a two-layer projector
maps the fused vector into the LLM embedding space.

Everything is float64 numpy with explicit forward caches and a manual
reverse pass over them; a frozen linear head over a small answer
vocabulary stands in for the LLM during desk-scale training, keeping the
gradient path of encoder plus projector intact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .store import Subgraph

ACTIVATIONS = ("tanh", "identity")


@dataclass(frozen=True)
class EncoderDims:
    d_in: int
    d_hidden: int
    d_llm: int
    layers: int
    projector_activation: str = "tanh"

    def __post_init__(self):
        if min(self.d_in, self.d_hidden, self.d_llm) < 1:
            raise ValueError("all dims must be positive")
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.projector_activation not in ACTIVATIONS:
            raise ValueError(f"projector_activation must be one of {ACTIVATIONS}")


@dataclass
class EncoderParams:
    dims: EncoderDims
    seed: int
    tensors: dict[str, np.ndarray]

    def copy(self) -> "EncoderParams":
        return EncoderParams(
            dims=self.dims,
            seed=self.seed,
            tensors={k: v.copy() for k, v in self.tensors.items()},
        )


def _tensor_specs(dims: EncoderDims) -> list[tuple[str, tuple[int, ...], int, int]]:
    """(name, shape, fan_in, fan_out) in fixed creation order."""
    di, dh, dl = dims.d_in, dims.d_hidden, dims.d_llm
    specs = [
        ("lift_w", (dh, di), di, dh),
        ("lift_b", (dh,), 0, 0),
    ]
    for l in range(dims.layers):
        specs += [
            (f"alpha_w_{l}", (dh + di,), dh + di, 1),
            (f"alpha_b_{l}", (1,), 0, 0),
            (f"beta_w_{l}", (dh + di,), dh + di, 1),
            (f"beta_b_{l}", (1,), 0, 0),
            (f"msg_w_{l}", (dh, 2 * dh + 2 * di), 2 * dh + 2 * di, dh),
            (f"msg_b_{l}", (dh,), 0, 0),
        ]
    specs += [
        ("gamma_w", (2 * di,), 2 * di, 1),
        ("gamma_b", (1,), 0, 0),
        ("fuse_w", (dh, di), di, dh),
        ("fuse_b", (dh,), 0, 0),
        ("proj1_w", (dh, dh), dh, dh),
        ("proj1_b", (dh,), 0, 0),
        ("proj2_w", (dl, dh), dh, dl),
        ("proj2_b", (dl,), 0, 0),
    ]
    return specs


def init_params(dims: EncoderDims, seed: int) -> EncoderParams:
    """Weights uniform in [-s, s] with s = sqrt(6/(fan_in+fan_out)), biases
    zero; tensor creation order is fixed so a seed pins every value."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape, fan_in, fan_out in _tensor_specs(dims):
        if name.endswith("_b") or "_b_" in name:
            tensors[name] = np.zeros(shape)
        else:
            s = np.sqrt(6.0 / (fan_in + fan_out))
            tensors[name] = rng.uniform(-s, s, size=shape)
    return EncoderParams(dims=dims, seed=seed, tensors=tensors)


@dataclass(frozen=True)
class SurrogateHead:
    """Frozen linear readout d_llm -> answer vocabulary for training."""

    vocab: tuple[str, ...]
    weight: np.ndarray
    bias: np.ndarray

    def index_of(self, label: str) -> int:
        try:
            return self.vocab.index(label)
        except ValueError:
            raise ValueError(f"label {label!r} outside the head vocabulary")

    def logits(self, p_graph: np.ndarray) -> np.ndarray:
        return self.weight @ p_graph + self.bias


def init_head(vocab, d_llm: int, seed: int) -> SurrogateHead:
    vocab = tuple(vocab)
    if not vocab:
        raise ValueError("head vocabulary must be non-empty")
    rng = np.random.default_rng(seed)
    s = np.sqrt(6.0 / (d_llm + len(vocab)))
    return SurrogateHead(
        vocab=vocab,
        weight=rng.uniform(-s, s, size=(len(vocab), d_llm)),
        bias=np.zeros(len(vocab)),
    )


@dataclass(frozen=True)
class SubgraphEmbedding:
    z_s: np.ndarray
    p_graph: np.ndarray
    node_states: dict[int, np.ndarray]


@dataclass(frozen=True)
class FusionResult:
    weights: np.ndarray
    z_final: np.ndarray


@dataclass(frozen=True)
class DemoInput:
    """A demonstration subgraph with embeddings aligned to its sorted
    nodes/edges."""

    subgraph: Subgraph
    node_vecs: tuple[np.ndarray, ...]
    edge_vecs: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class TrainExample:
    subgraph: Subgraph
    node_vecs: tuple[np.ndarray, ...]
    edge_vecs: tuple[np.ndarray, ...]
    query_vec: np.ndarray
    label: str
    demos: tuple[DemoInput, ...] = field(default_factory=tuple)


class _Wiring:
    """Index arrays for one subgraph: sorted nodes, oriented edges."""

    def __init__(self, subgraph: Subgraph, node_vecs, edge_vecs):
        nodes = subgraph.sorted_nodes()
        edges = subgraph.sorted_edges()
        if len(node_vecs) != len(nodes):
            raise ValueError("node_vecs must align with the subgraph's sorted nodes")
        if len(edge_vecs) != len(edges):
            raise ValueError("edge_vecs must align with the subgraph's sorted edges")
        if not nodes:
            raise ValueError("cannot encode an empty subgraph")
        self.ids = [n.id for n in nodes]
        index = {v: i for i, v in enumerate(self.ids)}
        self.n = len(nodes)
        self.node_feats = np.array([np.asarray(v, dtype=np.float64) for v in node_vecs])
        srcs, dsts, feats = [], [], []
        for k, edge in enumerate(edges):
            i, j = index[edge.src], index[edge.dst]
            vec = np.asarray(edge_vecs[k], dtype=np.float64)
            srcs += [i, j]
            dsts += [j, i]
            feats += [vec, vec]
        self.srcs = np.array(srcs, dtype=np.int64)
        self.dsts = np.array(dsts, dtype=np.int64)
        self.edge_feats = (
            np.array(feats) if feats else np.zeros((0, self.node_feats.shape[1]))
        )
        self.deg = np.bincount(self.dsts, minlength=self.n).astype(np.float64)


def edge_gate(z_vi, z_vj, z_e, q, params: EncoderParams, layer: int) -> float:
    """The scalar gate of one oriented edge at one layer."""
    t = params.tensors
    if not 0 <= layer < params.dims.layers:
        raise ValueError(f"layer {layer} outside 0..{params.dims.layers - 1}")
    alpha = float(t[f"alpha_w_{layer}"] @ np.concatenate([z_vi, q]) + t[f"alpha_b_{layer}"][0])
    beta = float(t[f"beta_w_{layer}"] @ np.concatenate([z_vj, q]) + t[f"beta_b_{layer}"][0])
    gamma = float(t["gamma_w"] @ np.concatenate([z_e, q]) + t["gamma_b"][0])
    return float(np.tanh(alpha + gamma - beta))


def _layer_pass(states: np.ndarray, wiring: _Wiring, q, params, layer, cache=None):
    """One message-passing layer over the wiring's oriented edges."""
    t = params.tensors
    m2 = wiring.srcs.shape[0]
    if m2 == 0:
        if cache is not None:
            cache.append(None)
        return states.copy()
    qrow = np.broadcast_to(q, (m2, q.shape[0]))
    s_src = states[wiring.srcs]
    s_dst = states[wiring.dsts]
    alpha = (
        np.concatenate([s_src, qrow], axis=1) @ t[f"alpha_w_{layer}"]
        + t[f"alpha_b_{layer}"][0]
    )
    beta = (
        np.concatenate([s_dst, qrow], axis=1) @ t[f"beta_w_{layer}"]
        + t[f"beta_b_{layer}"][0]
    )
    gamma = (
        np.concatenate([wiring.edge_feats, qrow], axis=1) @ t["gamma_w"]
        + t["gamma_b"][0]
    )
    zeta = np.tanh(alpha + gamma - beta)
    msg_in = np.concatenate([s_src, s_dst, wiring.edge_feats, qrow], axis=1)
    msg = msg_in @ t[f"msg_w_{layer}"].T + t[f"msg_b_{layer}"]
    acc = np.zeros_like(states)
    np.add.at(acc, wiring.dsts, zeta[:, None] * msg)
    has_neighbors = wiring.deg > 0
    new_states = np.where(
        has_neighbors[:, None], acc / np.maximum(wiring.deg, 1.0)[:, None], states
    )
    if cache is not None:
        cache.append({"zeta": zeta, "msg": msg, "msg_in": msg_in})
    return new_states


def layer_forward(
    states: dict[int, np.ndarray],
    subgraph: Subgraph,
    edge_vecs,
    q,
    params: EncoderParams,
    layer: int,
) -> dict[int, np.ndarray]:
    """Public single-layer pass over node-id-keyed states."""
    nodes = subgraph.sorted_nodes()
    missing = [n.id for n in nodes if n.id not in states]
    if missing:
        raise ValueError(f"missing node state for ids {missing}")
    if not 0 <= layer < params.dims.layers:
        raise ValueError(f"layer {layer} outside 0..{params.dims.layers - 1}")
    dummy_feats = [np.asarray(states[n.id], dtype=np.float64) for n in nodes]
    wiring = _Wiring(subgraph, [np.zeros(params.dims.d_in)] * len(nodes), edge_vecs)
    stacked = np.array(dummy_feats)
    new_states = _layer_pass(stacked, wiring, np.asarray(q, dtype=np.float64), params, layer)
    return {node.id: new_states[i].copy() for i, node in enumerate(nodes)}


def _encode_core(wiring: _Wiring, q, params: EncoderParams, want_cache: bool):
    t = params.tensors
    states = wiring.node_feats @ t["lift_w"].T + t["lift_b"]
    trail = [states]
    layer_caches = [] if want_cache else None
    for l in range(params.dims.layers):
        states = _layer_pass(states, wiring, q, params, l, cache=layer_caches)
        trail.append(states)
    z_s = states.mean(axis=0)
    return z_s, trail, layer_caches


def _project(z: np.ndarray, params: EncoderParams):
    t = params.tensors
    h = t["proj1_w"] @ z + t["proj1_b"]
    a = np.tanh(h) if params.dims.projector_activation == "tanh" else h
    p = t["proj2_w"] @ a + t["proj2_b"]
    return p, h, a


def project(z: np.ndarray, params: EncoderParams) -> np.ndarray:
    """Two-layer projector into the LLM embedding space."""
    return _project(np.asarray(z, dtype=np.float64), params)[0]


def encode_subgraph(
    subgraph: Subgraph, node_vecs, edge_vecs, q, params: EncoderParams
) -> SubgraphEmbedding:
    """L gated message-passing layers, mean-pool, project."""
    wiring = _Wiring(subgraph, node_vecs, edge_vecs)
    q = np.asarray(q, dtype=np.float64)
    z_s, trail, _ = _encode_core(wiring, q, params, want_cache=False)
    p_graph, _, _ = _project(z_s, params)
    final = trail[-1]
    node_states = {node_id: final[i].copy() for i, node_id in enumerate(wiring.ids)}
    return SubgraphEmbedding(z_s=z_s, p_graph=p_graph, node_states=node_states)


def _cos_forward(u: np.ndarray, v: np.ndarray) -> tuple[float, float, float]:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0, nu, nv
    return float(u @ v / (nu * nv)), nu, nv


def fuse_demonstrations(
    z_current: np.ndarray, demo_embeddings, q_vec, params: EncoderParams
) -> FusionResult:
    """Relevance-weighted combination of the current and demonstration
    subgraph embeddings.

    Scores are cosines between a learned projection of the query and each
    embedding (index 0 is the current subgraph); weights are their softmax.
    A zero-norm side scores 0 by convention.
    """
    z_current = np.asarray(z_current, dtype=np.float64)
    q_vec = np.asarray(q_vec, dtype=np.float64)
    stack = [z_current] + [np.asarray(z, dtype=np.float64) for z in demo_embeddings]
    dh = params.dims.d_hidden
    for z in stack:
        if z.shape != (dh,):
            raise ValueError(f"embedding shape {z.shape} does not match d_hidden {dh}")
    u = params.tensors["fuse_w"] @ q_vec + params.tensors["fuse_b"]
    scores = np.array([_cos_forward(u, z)[0] for z in stack])
    shifted = np.exp(scores - scores.max())
    weights = shifted / shifted.sum()
    if len(stack) == 1:
        # softmax over one score is exactly 1; keep z_current bitwise
        return FusionResult(weights=np.array([1.0]), z_final=z_current.copy())
    z_final = np.zeros_like(z_current)
    for w, z in zip(weights, stack):
        z_final = z_final + w * z
    return FusionResult(weights=weights, z_final=z_final)


def _forward_example(example: TrainExample, params: EncoderParams, head: SurrogateHead,
                     want_cache: bool):
    q = np.asarray(example.query_vec, dtype=np.float64)
    label_idx = head.index_of(example.label)

    encodings = []
    wiring = _Wiring(example.subgraph, example.node_vecs, example.edge_vecs)
    z_cur, trail, caches = _encode_core(wiring, q, params, want_cache)
    encodings.append({"wiring": wiring, "trail": trail, "caches": caches})
    demo_zs = []
    for demo in example.demos:
        dw = _Wiring(demo.subgraph, demo.node_vecs, demo.edge_vecs)
        z_d, d_trail, d_caches = _encode_core(dw, q, params, want_cache)
        encodings.append({"wiring": dw, "trail": d_trail, "caches": d_caches})
        demo_zs.append(z_d)

    stack = [z_cur] + demo_zs
    u = params.tensors["fuse_w"] @ q + params.tensors["fuse_b"]
    cos_parts = [_cos_forward(u, z) for z in stack]
    scores = np.array([c[0] for c in cos_parts])
    shifted = np.exp(scores - scores.max())
    weights = shifted / shifted.sum()
    if len(stack) == 1:
        z_final = stack[0]
    else:
        z_final = np.zeros_like(stack[0])
        for w, z in zip(weights, stack):
            z_final = z_final + w * z

    p_graph, h, a = _project(z_final, params)
    logits = head.logits(p_graph)
    logit_shift = logits - logits.max()
    log_norm = float(np.log(np.sum(np.exp(logit_shift))))
    loss = float(log_norm - logit_shift[label_idx])
    ctx = {
        "q": q,
        "label_idx": label_idx,
        "encodings": encodings,
        "stack": stack,
        "u": u,
        "cos_parts": cos_parts,
        "weights": weights,
        "z_final": z_final,
        "h": h,
        "a": a,
        "probs": np.exp(logit_shift) / np.sum(np.exp(logit_shift)),
    }
    return loss, ctx


def _zero_grads(params: EncoderParams) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.tensors.items()}


def _backward_encoding(enc, d_z, q, params, grads):
    """Reverse one encoder pass: d_z is the gradient at the pooled z_s."""
    wiring: _Wiring = enc["wiring"]
    trail = enc["trail"]
    caches = enc["caches"]
    t = params.tensors
    n = wiring.n
    d_states = np.broadcast_to(d_z / n, trail[-1].shape).copy()

    for l in range(params.dims.layers - 1, -1, -1):
        cache = caches[l]
        states = trail[l]
        d_prev = np.zeros_like(states)
        if cache is None:
            d_prev += d_states
            d_states = d_prev
            continue
        has_neighbors = wiring.deg > 0
        # identity skip for isolated nodes
        d_prev[~has_neighbors] += d_states[~has_neighbors]
        inv_deg = np.where(has_neighbors, 1.0 / np.maximum(wiring.deg, 1.0), 0.0)
        d_acc = d_states * inv_deg[:, None]
        d_gated = d_acc[wiring.dsts]
        zeta, msg, msg_in = cache["zeta"], cache["msg"], cache["msg_in"]
        d_zeta = np.einsum("md,md->m", d_gated, msg)
        d_msg = zeta[:, None] * d_gated
        grads[f"msg_w_{l}"] += d_msg.T @ msg_in
        grads[f"msg_b_{l}"] += d_msg.sum(axis=0)
        d_msg_in = d_msg @ t[f"msg_w_{l}"]
        dh = params.dims.d_hidden
        np.add.at(d_prev, wiring.srcs, d_msg_in[:, :dh])
        np.add.at(d_prev, wiring.dsts, d_msg_in[:, dh : 2 * dh])

        d_pre = d_zeta * (1.0 - zeta**2)
        m2 = wiring.srcs.shape[0]
        qrow = np.broadcast_to(q, (m2, q.shape[0]))
        alpha_in = np.concatenate([states[wiring.srcs], qrow], axis=1)
        beta_in = np.concatenate([states[wiring.dsts], qrow], axis=1)
        gamma_in = np.concatenate([wiring.edge_feats, qrow], axis=1)
        grads[f"alpha_w_{l}"] += alpha_in.T @ d_pre
        grads[f"alpha_b_{l}"] += np.array([d_pre.sum()])
        grads[f"beta_w_{l}"] += beta_in.T @ (-d_pre)
        grads[f"beta_b_{l}"] += np.array([-d_pre.sum()])
        grads["gamma_w"] += gamma_in.T @ d_pre
        grads["gamma_b"] += np.array([d_pre.sum()])
        np.add.at(d_prev, wiring.srcs, d_pre[:, None] * t[f"alpha_w_{l}"][None, :dh])
        np.add.at(d_prev, wiring.dsts, -d_pre[:, None] * t[f"beta_w_{l}"][None, :dh])
        d_states = d_prev

    grads["lift_w"] += d_states.T @ wiring.node_feats
    grads["lift_b"] += d_states.sum(axis=0)


def _backward_example(ctx, params: EncoderParams, head: SurrogateHead, grads):
    t = params.tensors
    q = ctx["q"]
    d_logits = ctx["probs"].copy()
    d_logits[ctx["label_idx"]] -= 1.0
    d_p = head.weight.T @ d_logits

    a, h, z_final = ctx["a"], ctx["h"], ctx["z_final"]
    grads["proj2_w"] += np.outer(d_p, a)
    grads["proj2_b"] += d_p
    d_a = t["proj2_w"].T @ d_p
    if params.dims.projector_activation == "tanh":
        d_h = d_a * (1.0 - a**2)
    else:
        d_h = d_a
    grads["proj1_w"] += np.outer(d_h, z_final)
    grads["proj1_b"] += d_h
    d_zfinal = t["proj1_w"].T @ d_h

    stack = ctx["stack"]
    weights = ctx["weights"]
    d_stack = [np.zeros_like(z) for z in stack]
    if len(stack) == 1:
        d_stack[0] += d_zfinal
    else:
        d_weights = np.array([float(d_zfinal @ z) for z in stack])
        for d in range(len(stack)):
            d_stack[d] += weights[d] * d_zfinal
        d_scores = weights * (d_weights - float(weights @ d_weights))
        u = ctx["u"]
        d_u = np.zeros_like(u)
        for d, (score, nu, nv) in enumerate(ctx["cos_parts"]):
            if nu == 0.0 or nv == 0.0:
                continue
            z = stack[d]
            d_s = d_scores[d]
            d_u += d_s * (z / (nu * nv) - score * u / (nu * nu))
            d_stack[d] += d_s * (u / (nu * nv) - score * z / (nv * nv))
        grads["fuse_w"] += np.outer(d_u, q)
        grads["fuse_b"] += d_u

    for enc, d_z in zip(ctx["encodings"], d_stack):
        _backward_encoding(enc, d_z, q, params, grads)


def forward_loss(batch, params: EncoderParams, head: SurrogateHead) -> float:
    """Mean cross-entropy of the frozen head over the batch."""
    if not batch:
        raise ValueError("batch must be non-empty")
    total = 0.0
    for example in batch:
        loss, _ = _forward_example(example, params, head, want_cache=False)
        total += loss
    return total / len(batch)


def backward(batch, params: EncoderParams, head: SurrogateHead) -> dict[str, np.ndarray]:
    """Gradients of forward_loss for every parameter tensor."""
    if not batch:
        raise ValueError("batch must be non-empty")
    grads = _zero_grads(params)
    for example in batch:
        _, ctx = _forward_example(example, params, head, want_cache=True)
        _backward_example(ctx, params, head, grads)
    for name in grads:
        grads[name] /= len(batch)
    return grads


def grad_check(
    batch,
    params: EncoderParams,
    head: SurrogateHead,
    eps: float = 1e-5,
    max_exact: int = 1024,
    seed: int = 0,
) -> float:
    """Max relative error of backward against central finite differences.

    Every coordinate is checked for tensors up to ``max_exact`` entries; a
    seeded 5% sample is used beyond that. The relative error denominator is
    max(|analytic|, |numeric|, 1e-8).
    """
    if not 0.0 < eps <= 1e-2:
        raise ValueError("eps must be in (0, 1e-2]")
    analytic = backward(batch, params, head)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in sorted(params.tensors):
        tensor = params.tensors[name]
        flat = tensor.reshape(-1)
        size = flat.shape[0]
        if size <= max_exact:
            coords = range(size)
        else:
            count = max(1, int(0.05 * size))
            coords = sorted(rng.choice(size, size=count, replace=False).tolist())
        for idx in coords:
            original = flat[idx]
            flat[idx] = original + eps
            up = forward_loss(batch, params, head)
            flat[idx] = original - eps
            down = forward_loss(batch, params, head)
            flat[idx] = original
            numeric = (up - down) / (2.0 * eps)
            a = float(analytic[name].reshape(-1)[idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst


def train_encoder(
    dataset,
    params: EncoderParams,
    head: SurrogateHead,
    lr: float,
    epochs: int,
    seed: int,
) -> tuple[EncoderParams, list[float]]:
    """Plain per-example gradient descent with a seeded example order.

    Returns a trained copy of the params and the per-epoch mean loss
    (measured at each step before its update). Aborts with a diagnostic if
    the loss diverges to NaN.
    """
    if lr < 0.0:
        raise ValueError("lr must be non-negative")
    if epochs < 0:
        raise ValueError("epochs must be non-negative")
    if not dataset:
        raise ValueError("dataset must be non-empty")
    params = params.copy()
    rng = np.random.default_rng(seed)
    curve: list[float] = []
    for epoch in range(epochs):
        order = rng.permutation(len(dataset))
        epoch_loss = 0.0
        for idx in order:
            example = dataset[int(idx)]
            step_loss, ctx = _forward_example(example, params, head, want_cache=True)
            if not np.isfinite(step_loss):
                raise RuntimeError(
                    f"training diverged: loss {step_loss} at epoch {epoch}"
                )
            grads = _zero_grads(params)
            _backward_example(ctx, params, head, grads)
            for name, grad in grads.items():
                params.tensors[name] -= lr * grad
            epoch_loss += step_loss
        curve.append(epoch_loss / len(dataset))
    return params, curve


def save_checkpoint(params: EncoderParams, path: str | Path) -> None:
    obj = {
        "dims": {
            "d_in": params.dims.d_in,
            "d_hidden": params.dims.d_hidden,
            "d_llm": params.dims.d_llm,
            "layers": params.dims.layers,
            "projector_activation": params.dims.projector_activation,
        },
        "seed": params.seed,
        "tensors": {
            name: {"shape": list(tensor.shape), "data": tensor.reshape(-1).tolist()}
            for name, tensor in sorted(params.tensors.items())
        },
        "format_version": 1,
    }
    Path(path).write_text(json.dumps(obj) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> EncoderParams:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}")
    try:
        if obj["format_version"] != 1:
            raise DataError(f"unsupported checkpoint version {obj['format_version']}")
        dims = EncoderDims(**obj["dims"])
        tensors = {
            name: np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
            for name, entry in obj["tensors"].items()
        }
        params = EncoderParams(dims=dims, seed=int(obj["seed"]), tensors=tensors)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed checkpoint {path}: {exc}")
    expected = {name: shape for name, shape, _, _ in _tensor_specs(dims)}
    for name, shape in expected.items():
        if name not in params.tensors or params.tensors[name].shape != shape:
            raise DataError(f"checkpoint {path} tensor {name} missing or misshaped")
    if set(params.tensors) != set(expected):
        raise DataError(f"checkpoint {path} has unexpected tensors")
    return params
