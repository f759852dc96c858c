"""Prize assignment and prize-collecting Steiner tree retrieval.

Similarity rankings become rank-linear prizes, edge prizes are folded away
by a virtual-node transformation, and a growth-and-prune solver extracts a
connected subgraph maximizing prize minus edge cost. A small exact solver
doubles as the test oracle.

The solver kernel is compiled when the extension built; set
``GRAPHQA_PURE_PCST=1`` to force the pure-Python twin.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .embed import top_k
from .errors import DataError
from .store import Subgraph, TextEdge, TextNode, TextualGraph

if os.environ.get("GRAPHQA_PURE_PCST") == "1":
    from . import _pcst_pure as _kernel
else:
    try:
        from . import _pcst_core as _kernel  # type: ignore[attr-defined]
    except ImportError:
        from . import _pcst_pure as _kernel

KERNEL_NAME = _kernel.__name__.rsplit(".", 1)[-1].lstrip("_")


@dataclass(frozen=True)
class PrizeAssignment:
    """Rank-derived prizes; only top-ranked elements score above zero."""

    node_prizes: dict[int, float]
    edge_prizes: dict[int, float]
    k_nodes: int
    k_edges: int


@dataclass(frozen=True)
class PcstInstance:
    """An undirected prize-collecting instance over a textual graph.

    ``edge_cost`` is the uniform cost c; ``edge_costs`` optionally overrides
    it per edge index (the virtual-node transformation needs non-uniform
    costs for its half-edges).
    """

    graph: TextualGraph
    prizes: PrizeAssignment
    edge_cost: float
    edge_costs: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.edge_cost <= 0.0:
            raise ValueError("edge_cost must be positive")
        if self.edge_costs is not None:
            if len(self.edge_costs) != self.graph.num_edges:
                raise ValueError("edge_costs must align with graph edges")
            if any(c <= 0.0 for c in self.edge_costs):
                raise ValueError("edge costs must be positive")
        if any(p < 0.0 for p in self.prizes.node_prizes.values()):
            raise ValueError("node prizes must be non-negative")
        if any(p < 0.0 for p in self.prizes.edge_prizes.values()):
            raise ValueError("edge prizes must be non-negative")

    def cost_of(self, edge_index: int) -> float:
        if self.edge_costs is not None:
            return self.edge_costs[edge_index]
        return self.edge_cost


@dataclass(frozen=True)
class PcstSolution:
    subgraph: Subgraph
    objective: float

    @property
    def is_empty(self) -> bool:
        return not self.subgraph.node_ids


def assign_prizes(
    node_ranking: list[tuple[int, float]],
    edge_ranking: list[tuple[int, float]],
    k_nodes: int,
    k_edges: int,
) -> PrizeAssignment:
    """Prize rank r (1-based) within the top k as k - r + 1, zero beyond.

    Rankings must already be sorted descending by score (as top_k returns
    them); nodes and edges are prized independently.
    """
    if k_nodes < 1 or k_edges < 1:
        raise ValueError("k_nodes and k_edges must be positive")
    node_prizes = {
        key: float(k_nodes - r + 1) if r <= k_nodes else 0.0
        for r, (key, _) in enumerate(node_ranking, start=1)
    }
    edge_prizes = {
        key: float(k_edges - r + 1) if r <= k_edges else 0.0
        for r, (key, _) in enumerate(edge_ranking, start=1)
    }
    return PrizeAssignment(node_prizes, edge_prizes, k_nodes, k_edges)


def objective(instance: PcstInstance, node_ids, edge_indices) -> float:
    """The retrieval objective recomputed from scratch on a selection."""
    total = 0.0
    for v in sorted(node_ids):
        total += instance.prizes.node_prizes.get(v, 0.0)
    for e in sorted(edge_indices):
        total += instance.prizes.edge_prizes.get(e, 0.0)
        total -= instance.cost_of(e)
    return total


def is_connected(node_ids, edge_pairs) -> bool:
    """Undirected connectivity of a node set under the given (u, v) pairs."""
    nodes = list(node_ids)
    if len(nodes) <= 1:
        return True
    parent = {v: v for v in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in edge_pairs:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[max(ru, rv)] = min(ru, rv)
    root = find(nodes[0])
    return all(find(v) == root for v in nodes)


@dataclass(frozen=True)
class VirtualForm:
    """Node-prize-only rewrite of an instance, plus the projection maps.

    Prized edges with prize >= cost become a virtual node (carrying the
    prize) joined to both endpoints by half-cost edges; cheaper prizes fold
    into a reduced edge cost. ``half_edges`` maps an original edge index to
    its two half-edge indices, ``passthrough`` maps virtual edge index back
    to the original edge it mirrors.
    """

    instance: PcstInstance
    virtual_node_of: dict[int, int]
    half_edges: dict[int, tuple[int, int]]
    passthrough: dict[int, int]

    def project_back(
        self, original: PcstInstance, node_ids, edge_indices
    ) -> tuple[set[int], set[int]]:
        """Map a virtual-graph selection onto the original graph.

        A virtual node picked with both half-edges becomes the original
        edge. A dangling half is completed to the full edge (prize >= cost
        makes completion free or better). A selection that is exactly one
        virtual node is likewise completed.
        """
        node_ids = set(node_ids)
        edge_indices = set(edge_indices)
        original_ids = original.graph.node_ids()
        nodes = {v for v in node_ids if v in original_ids}
        edges: set[int] = set()
        for ve in edge_indices:
            if ve in self.passthrough:
                edges.add(self.passthrough[ve])
        for k, (h1, h2) in sorted(self.half_edges.items()):
            w = self.virtual_node_of[k]
            picked = (1 if h1 in edge_indices else 0) + (1 if h2 in edge_indices else 0)
            complete = picked >= 1 or (picked == 0 and node_ids == {w})
            if complete:
                edge = original.graph.edges[k]
                edges.add(k)
                nodes.add(edge.src)
                nodes.add(edge.dst)
        return nodes, edges


def edges_to_virtual(instance: PcstInstance) -> VirtualForm:
    """Rewrite edge prizes as virtual node prizes.

    Edges with prize p >= cost c become a virtual node w with prize p and
    two half-edges of cost c/2; selecting both halves costs the original c.
    Edges with 0 < p < c keep their shape at reduced cost c - p. Zero-prize
    edges pass through unchanged, so a prize-free instance comes back as-is
    under the identity mapping.
    """
    edge_prizes = instance.prizes.edge_prizes
    if all(p == 0.0 for p in edge_prizes.values()):
        return VirtualForm(
            instance=instance,
            virtual_node_of={},
            half_edges={},
            passthrough={k: k for k in range(instance.graph.num_edges)},
        )

    graph = instance.graph
    next_id = max((n.id for n in graph.nodes), default=-1) + 1
    nodes = list(graph.nodes)
    node_prizes = dict(instance.prizes.node_prizes)
    edges: list[TextEdge] = []
    costs: list[float] = []
    virtual_node_of: dict[int, int] = {}
    half_edges: dict[int, tuple[int, int]] = {}
    passthrough: dict[int, int] = {}

    for k, edge in enumerate(graph.edges):
        p = edge_prizes.get(k, 0.0)
        c = instance.cost_of(k)
        if p >= c:
            w = next_id
            next_id += 1
            nodes.append(TextNode(id=w, text=edge.text))
            node_prizes[w] = p
            half_edges[k] = (len(edges), len(edges) + 1)
            virtual_node_of[k] = w
            edges.append(TextEdge(src=edge.src, dst=w, text=edge.text))
            costs.append(c / 2.0)
            edges.append(TextEdge(src=w, dst=edge.dst, text=edge.text))
            costs.append(c / 2.0)
        else:
            passthrough[len(edges)] = k
            edges.append(edge)
            costs.append(c - p)

    virtual_graph = TextualGraph(nodes=tuple(nodes), edges=tuple(edges))
    prizes = PrizeAssignment(
        node_prizes=node_prizes,
        edge_prizes={},
        k_nodes=sum(1 for p in node_prizes.values() if p > 0.0),
        k_edges=instance.prizes.k_edges,
    )
    virtual = PcstInstance(
        graph=virtual_graph,
        prizes=prizes,
        edge_cost=instance.edge_cost,
        edge_costs=tuple(costs),
    )
    return VirtualForm(virtual, virtual_node_of, half_edges, passthrough)


def _solution(instance: PcstInstance, nodes, edges) -> PcstSolution:
    sub = Subgraph(instance.graph, frozenset(nodes), frozenset(edges))
    return PcstSolution(subgraph=sub, objective=objective(instance, nodes, edges))


def _best_single(instance: PcstInstance) -> tuple[int, float]:
    """Highest-prize node, smallest id on ties; (-1, 0.0) for no nodes."""
    best_id, best_prize = -1, 0.0
    for node in sorted(instance.graph.nodes, key=lambda n: n.id):
        p = instance.prizes.node_prizes.get(node.id, 0.0)
        if p > best_prize:
            best_id, best_prize = node.id, p
    if best_id < 0 and instance.graph.nodes:
        best_id = min(n.id for n in instance.graph.nodes)
        best_prize = 0.0
    return best_id, best_prize


def solve_pcst_exact(instance: PcstInstance, limit: int = 16) -> PcstSolution:
    """Globally optimal solution by exhaustive enumeration.

    Every subset of edges induces its endpoint set; connected subsets
    compete with single nodes and the empty selection. Refuses instances
    with more than ``limit`` nodes plus edges.
    """
    graph = instance.graph
    n, m = graph.num_nodes, graph.num_edges
    if n + m > limit:
        raise ValueError(f"instance has {n + m} elements, limit is {limit}")

    index_of = {node.id: i for i, node in enumerate(graph.nodes)}
    node_prize = np.zeros(n)
    for i, node in enumerate(graph.nodes):
        node_prize[i] = instance.prizes.node_prizes.get(node.id, 0.0)
    edge_prize = np.array(
        [instance.prizes.edge_prizes.get(k, 0.0) for k in range(m)]
    )
    edge_cost = np.array([instance.cost_of(k) for k in range(m)])

    subsets = 1 << m
    edge_sum = np.zeros(subsets)
    node_bits = np.zeros(subsets, dtype=np.int64)
    for b in range(m):
        edge = graph.edges[b]
        bit_nodes = (1 << index_of[edge.src]) | (1 << index_of[edge.dst])
        step = 1 << b
        view = edge_sum.reshape(-1, 2, step)
        view[:, 1, :] = view[:, 0, :] + (edge_prize[b] - edge_cost[b])
        bits = node_bits.reshape(-1, 2, step)
        bits[:, 1, :] = bits[:, 0, :] | bit_nodes

    node_sum = np.zeros(1 << n)
    for b in range(n):
        step = 1 << b
        view = node_sum.reshape(-1, 2, step)
        view[:, 1, :] = view[:, 0, :] + node_prize[b]

    scores = node_sum[node_bits] + edge_sum
    # Scan candidates best-first; prefer larger subsets on ties so prized
    # virtual structures survive projection intact.
    popcount = np.array([bin(s).count("1") for s in range(subsets)])
    order = np.lexsort((np.arange(subsets), -popcount, -scores))

    best_subset_obj = 0.0
    best_nodes: set[int] = set()
    best_edges: set[int] = set()
    found = False
    for s in order:
        s = int(s)
        if s == 0:
            continue
        picked = [k for k in range(m) if s >> k & 1]
        pairs = [(graph.edges[k].src, graph.edges[k].dst) for k in picked]
        nodes = {u for pair in pairs for u in pair}
        if is_connected(nodes, pairs):
            best_subset_obj = float(scores[s])
            best_nodes, best_edges = nodes, set(picked)
            found = True
            break

    single_id, single_prize = _best_single(instance)
    if found and best_subset_obj >= single_prize and best_subset_obj > 0.0:
        return _solution(instance, best_nodes, best_edges)
    if single_prize > 0.0:
        return _solution(instance, {single_id}, set())
    return _solution(instance, set(), set())


def solve_pcst(instance: PcstInstance) -> PcstSolution:
    """Approximate solution via growth-and-prune on the virtual form.

    The objective is recomputed from scratch on the projected subgraph, and
    the result never falls below the best single node prize (or the empty
    selection at zero).
    """
    if instance.graph.num_nodes == 0:
        return _solution(instance, set(), set())

    form = edges_to_virtual(instance)
    vgraph = form.instance.graph
    index_of = {node.id: i for i, node in enumerate(vgraph.nodes)}
    id_of = [node.id for node in vgraph.nodes]
    prizes = np.array(
        [form.instance.prizes.node_prizes.get(node.id, 0.0) for node in vgraph.nodes]
    )
    src = np.array([index_of[e.src] for e in vgraph.edges], dtype=np.int64)
    dst = np.array([index_of[e.dst] for e in vgraph.edges], dtype=np.int64)
    cost = np.array([form.instance.cost_of(k) for k in range(vgraph.num_edges)])

    node_mask, edge_mask, value = _kernel.solve(len(id_of), prizes, src, dst, cost)

    single_id, single_prize = _best_single(instance)
    nodes: set[int] = set()
    edges: set[int] = set()
    if value > 0.0:
        picked_nodes = {id_of[i] for i in range(len(id_of)) if node_mask[i]}
        picked_edges = {k for k in range(vgraph.num_edges) if edge_mask[k]}
        nodes, edges = form.project_back(instance, picked_nodes, picked_edges)

    if nodes:
        obj = objective(instance, nodes, edges)
        if obj >= single_prize and obj > 0.0:
            return _solution(instance, nodes, edges)
    if single_prize > 0.0:
        return _solution(instance, {single_id}, set())
    return _solution(instance, set(), set())


def retrieve_subgraph(
    graph: TextualGraph,
    query_vec: np.ndarray,
    node_vecs,
    edge_vecs,
    k_nodes: int = 3,
    k_edges: int = 3,
    edge_cost: float = 0.5,
    trace: dict | None = None,
) -> Subgraph:
    """Retrieve the query-relevant connected subgraph.

    ``node_vecs`` and ``edge_vecs`` align with ``graph.nodes`` and
    ``graph.edges``. Composes ranking, prize assignment, and the solver;
    an empty solution falls back to the top-1 node so callers always get
    at least one node.
    """
    if graph.num_nodes == 0:
        raise DataError("cannot retrieve from an empty graph")
    if len(node_vecs) != graph.num_nodes or len(edge_vecs) != graph.num_edges:
        raise ValueError("embeddings must align with graph nodes and edges")

    node_ranking = top_k(
        query_vec, [(node.id, vec) for node, vec in zip(graph.nodes, node_vecs)], k_nodes
    )
    edge_ranking = []
    if graph.num_edges:
        edge_ranking = top_k(
            query_vec, list(enumerate(edge_vecs)), k_edges
        )
    prizes = assign_prizes(node_ranking, edge_ranking, k_nodes, k_edges)
    instance = PcstInstance(graph=graph, prizes=prizes, edge_cost=edge_cost)
    solution = solve_pcst(instance)

    fallback = solution.is_empty
    if fallback:
        top_node = node_ranking[0][0]
        solution = _solution(instance, {top_node}, set())

    if trace is not None:
        trace.update(
            {
                "node_ranking": [[int(k), float(s)] for k, s in node_ranking],
                "edge_ranking": [[int(k), float(s)] for k, s in edge_ranking],
                "node_prizes": {int(k): float(v) for k, v in prizes.node_prizes.items()},
                "edge_prizes": {int(k): float(v) for k, v in prizes.edge_prizes.items()},
                "nodes": sorted(int(v) for v in solution.subgraph.node_ids),
                "edges": sorted(int(k) for k in solution.subgraph.edge_indices),
                "objective": float(solution.objective),
                "fallback": fallback,
                "kernel": KERNEL_NAME,
            }
        )
    return solution.subgraph
