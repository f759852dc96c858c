"""Pure-Python prize-collecting Steiner tree kernel.

Twin of the compiled extension ``graphqa._pcst_core``; both implement the
same growth-and-prune scheme with identical arithmetic and tie-breaking, so
their outputs are bit-for-bit interchangeable. Keep the two in lockstep when
changing either.

The kernel solves the node-prize-only form: maximize sum of selected node
prizes minus sum of selected edge costs over connected subgraphs. Cluster
growth follows the Goemans-Williamson moat scheme; each cluster starts with
surplus equal to its prize and drains while active, edges go tight when the
moats around their endpoints have jointly paid the cost, and merges keep the
smaller root. Afterwards every forest component is strong-pruned from its
best root and the single best component is returned.
"""

from __future__ import annotations

import numpy as np

INF = float("inf")


def solve(n, prizes, src, dst, cost):
    """Best pruned component of the growth forest.

    Arguments are parallel arrays: ``prizes`` per node (non-negative),
    ``src``/``dst``/``cost`` per undirected edge (cost positive). Returns
    (node_mask, edge_mask, value) where the masks are uint8 arrays over the
    input node/edge indexing and value = prize sum - cost sum of the
    selection. The value may be 0 (best is a worthless node); callers decide
    what to do with non-positive selections.
    """
    n = int(n)
    m = len(src)
    prizes = [float(p) for p in prizes]
    src = [int(v) for v in src]
    dst = [int(v) for v in dst]
    cost = [float(c) for c in cost]
    remaining = list(cost)

    node_mask = np.zeros(n, dtype=np.uint8)
    edge_mask = np.zeros(m, dtype=np.uint8)
    if n == 0:
        return node_mask, edge_mask, 0.0

    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    surplus = list(prizes)
    active = [p > 0.0 for p in prizes]
    n_active = sum(1 for a in active if a)
    edge_alive = [True] * m
    forest = []

    # Growth: repeatedly fire the earliest event (edge goes tight, or an
    # active cluster runs out of surplus) until at most one cluster is
    # active. Edge events win ties, then the smaller index.
    while n_active > 1:
        best_dt = INF
        best_edge = -1
        best_root = -1
        for e in range(m):
            if not edge_alive[e]:
                continue
            ru = find(src[e])
            rv = find(dst[e])
            if ru == rv:
                edge_alive[e] = False
                continue
            rate = (1 if active[ru] else 0) + (1 if active[rv] else 0)
            if rate == 0:
                continue
            dt = remaining[e] / rate
            if dt < best_dt:
                best_dt = dt
                best_edge = e
        for v in range(n):
            if parent[v] == v and active[v] and surplus[v] < best_dt:
                best_dt = surplus[v]
                best_edge = -1
                best_root = v
        if best_edge < 0 and best_root < 0:
            break

        for e in range(m):
            if not edge_alive[e]:
                continue
            ru = find(src[e])
            rv = find(dst[e])
            if ru == rv:
                continue
            rate = (1 if active[ru] else 0) + (1 if active[rv] else 0)
            if rate != 0:
                remaining[e] -= best_dt * rate
        for v in range(n):
            if parent[v] == v and active[v]:
                surplus[v] -= best_dt

        if best_edge >= 0:
            ru = find(src[best_edge])
            rv = find(dst[best_edge])
            root = ru if ru < rv else rv
            other = rv if ru < rv else ru
            merged = surplus[ru] + surplus[rv]
            was = (1 if active[ru] else 0) + (1 if active[rv] else 0)
            parent[other] = root
            surplus[root] = merged
            active[root] = merged > 0.0
            active[other] = False
            n_active += (1 if active[root] else 0) - was
            edge_alive[best_edge] = False
            forest.append(best_edge)
        else:
            active[best_root] = False
            surplus[best_root] = 0.0
            n_active -= 1

    # Adjacency over forest edges only.
    adj_head = [-1] * n
    adj_next = [0] * (2 * len(forest))
    adj_to = [0] * (2 * len(forest))
    adj_edge = [0] * (2 * len(forest))
    slot = 0
    for e in forest:
        for a, b in ((src[e], dst[e]), (dst[e], src[e])):
            adj_to[slot] = b
            adj_edge[slot] = e
            adj_next[slot] = adj_head[a]
            adj_head[a] = slot
            slot += 1

    visited = [False] * n
    parent_node = [-1] * n
    parent_edge = [-1] * n
    down = [0.0] * n
    contrib = [0.0] * n
    extra = [0.0] * n
    order = [0] * n

    best_value = -INF
    best_nodes: list[int] = []
    best_edges: list[int] = []

    # Strong-prune every component from its best root; keep the best one.
    for start in range(n):
        if visited[start]:
            continue
        size = 0
        order[size] = start
        size += 1
        visited[start] = True
        parent_node[start] = -1
        parent_edge[start] = -1
        head = 0
        while head < size:
            v = order[head]
            head += 1
            s = adj_head[v]
            while s >= 0:
                u = adj_to[s]
                if not visited[u]:
                    visited[u] = True
                    parent_node[u] = v
                    parent_edge[u] = adj_edge[s]
                    order[size] = u
                    size += 1
                s = adj_next[s]

        for i in range(size):
            down[order[i]] = prizes[order[i]]
        for i in range(size - 1, 0, -1):
            v = order[i]
            margin = down[v] - cost[parent_edge[v]]
            c = margin if margin > 0.0 else 0.0
            contrib[v] = c
            down[parent_node[v]] += c
        extra[start] = 0.0
        for i in range(1, size):
            v = order[i]
            p = parent_node[v]
            side = down[p] + extra[p] - contrib[v] - cost[parent_edge[v]]
            extra[v] = side if side > 0.0 else 0.0

        root = order[0]
        value = down[root] + extra[root]
        for i in range(1, size):
            v = order[i]
            total = down[v] + extra[v]
            if total > value:
                value = total
                root = v

        if value > best_value:
            best_value = value
            best_nodes = [root]
            best_edges = []
            stack = [(root, -1)]
            while stack:
                v, from_edge = stack.pop()
                s = adj_head[v]
                while s >= 0:
                    u = adj_to[s]
                    e = adj_edge[s]
                    if e != from_edge:
                        if parent_node[u] == v:
                            side = down[u]
                        else:
                            side = down[u] + extra[u] - contrib[v]
                        if side - cost[e] > 0.0:
                            best_nodes.append(u)
                            best_edges.append(e)
                            stack.append((u, e))
                    s = adj_next[s]

    for v in best_nodes:
        node_mask[v] = 1
    for e in best_edges:
        edge_mask[e] = 1
    return node_mask, edge_mask, float(best_value)
