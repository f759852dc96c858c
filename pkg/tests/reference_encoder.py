"""Naive loop-based reference for the graph encoder.

Implements the same math as graphqa.encoder with plain Python loops and
per-element dot products, sharing no code with the package. Tests compare
the two implementations on random fixtures.
"""

from __future__ import annotations

import math

import numpy as np


def ref_gate(z_vi, z_vj, z_e, q, tensors, layer):
    alpha = float(np.dot(tensors[f"alpha_w_{layer}"], np.concatenate([z_vi, q])))
    alpha += float(tensors[f"alpha_b_{layer}"][0])
    beta = float(np.dot(tensors[f"beta_w_{layer}"], np.concatenate([z_vj, q])))
    beta += float(tensors[f"beta_b_{layer}"][0])
    gamma = float(np.dot(tensors["gamma_w"], np.concatenate([z_e, q])))
    gamma += float(tensors["gamma_b"][0])
    return math.tanh(alpha + gamma - beta)


def ref_encode(subgraph, node_vecs, edge_vecs, q, params):
    """Returns (z_s, node_states dict) for one subgraph."""
    tensors = params.tensors
    nodes = subgraph.sorted_nodes()
    edges = subgraph.sorted_edges()
    q = np.asarray(q, dtype=np.float64)
    states = {}
    for node, vec in zip(nodes, node_vecs):
        states[node.id] = tensors["lift_w"] @ np.asarray(vec, dtype=np.float64)
        states[node.id] = states[node.id] + tensors["lift_b"]

    oriented = []
    for edge, vec in zip(edges, edge_vecs):
        vec = np.asarray(vec, dtype=np.float64)
        oriented.append((edge.src, edge.dst, vec))
        oriented.append((edge.dst, edge.src, vec))
    degree = {node.id: 0 for node in nodes}
    for _, dst, _ in oriented:
        degree[dst] += 1

    for layer in range(params.dims.layers):
        acc = {node.id: np.zeros(params.dims.d_hidden) for node in nodes}
        for src, dst, vec in oriented:
            gate = ref_gate(states[src], states[dst], vec, q, tensors, layer)
            msg_in = np.concatenate([states[src], states[dst], vec, q])
            msg = tensors[f"msg_w_{layer}"] @ msg_in + tensors[f"msg_b_{layer}"]
            acc[dst] = acc[dst] + gate * msg
        new_states = {}
        for node in nodes:
            if degree[node.id] > 0:
                new_states[node.id] = acc[node.id] / degree[node.id]
            else:
                new_states[node.id] = states[node.id]
        states = new_states

    z_s = np.zeros(params.dims.d_hidden)
    for node in nodes:
        z_s = z_s + states[node.id]
    z_s = z_s / len(nodes)
    return z_s, states


def ref_cos(u, v):
    nu = math.sqrt(float(np.dot(u, u)))
    nv = math.sqrt(float(np.dot(v, v)))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v)) / (nu * nv)


def ref_fuse(z_current, demo_zs, q, params):
    """Returns (weights list, z_final)."""
    tensors = params.tensors
    u = tensors["fuse_w"] @ np.asarray(q, dtype=np.float64) + tensors["fuse_b"]
    stack = [np.asarray(z_current, dtype=np.float64)]
    stack += [np.asarray(z, dtype=np.float64) for z in demo_zs]
    scores = [ref_cos(u, z) for z in stack]
    peak = max(scores)
    exps = [math.exp(s - peak) for s in scores]
    total = sum(exps)
    weights = [e / total for e in exps]
    if len(stack) == 1:
        return [1.0], stack[0].copy()
    z_final = np.zeros_like(stack[0])
    for w, z in zip(weights, stack):
        z_final = z_final + w * z
    return weights, z_final


def ref_project(z, params):
    tensors = params.tensors
    h = tensors["proj1_w"] @ z + tensors["proj1_b"]
    if params.dims.projector_activation == "tanh":
        a = np.tanh(h)
    else:
        a = h
    return tensors["proj2_w"] @ a + tensors["proj2_b"]


def ref_example_loss(example, params, head):
    z_cur, _ = ref_encode(
        example.subgraph, example.node_vecs, example.edge_vecs,
        example.query_vec, params,
    )
    demo_zs = []
    for demo in example.demos:
        z_d, _ = ref_encode(
            demo.subgraph, demo.node_vecs, demo.edge_vecs,
            example.query_vec, params,
        )
        demo_zs.append(z_d)
    _, z_final = ref_fuse(z_cur, demo_zs, example.query_vec, params)
    p_graph = ref_project(z_final, params)
    logits = head.weight @ p_graph + head.bias
    peak = float(logits.max())
    log_norm = peak + math.log(sum(math.exp(float(x) - peak) for x in logits))
    return log_norm - float(logits[head.index_of(example.label)])


def ref_loss(batch, params, head):
    return sum(ref_example_loss(ex, params, head) for ex in batch) / len(batch)
