# cython: language_level=3
"""Compiled prize-collecting Steiner tree kernel.

Twin of ``graphqa._pcst_pure``; both implement the same growth-and-prune
scheme with identical arithmetic and tie-breaking, so their outputs are
bit-for-bit interchangeable. Keep the two in lockstep when changing either.
"""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()

cdef double INF = float("inf")


@cython.boundscheck(False)
@cython.wraparound(False)
cdef Py_ssize_t _find(cnp.int64_t[::1] parent, Py_ssize_t x) nogil:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def solve(n, prizes, src, dst, cost):
    """Best pruned component of the growth forest.

    Arguments are parallel arrays: ``prizes`` per node (non-negative),
    ``src``/``dst``/``cost`` per undirected edge (cost positive). Returns
    (node_mask, edge_mask, value) where the masks are uint8 arrays over the
    input node/edge indexing and value = prize sum - cost sum of the
    selection. The value may be 0 (best is a worthless node); callers decide
    what to do with non-positive selections.
    """
    cdef Py_ssize_t nn = int(n)
    cdef cnp.float64_t[::1] prz = np.ascontiguousarray(prizes, dtype=np.float64)
    cdef cnp.int64_t[::1] esrc = np.ascontiguousarray(src, dtype=np.int64)
    cdef cnp.int64_t[::1] edst = np.ascontiguousarray(dst, dtype=np.int64)
    cdef cnp.float64_t[::1] ecost = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t m = esrc.shape[0]

    node_mask = np.zeros(nn, dtype=np.uint8)
    edge_mask = np.zeros(m, dtype=np.uint8)
    cdef cnp.uint8_t[::1] nmask = node_mask
    cdef cnp.uint8_t[::1] emask = edge_mask
    if nn == 0:
        return node_mask, edge_mask, 0.0

    cdef cnp.int64_t[::1] parent = np.arange(nn, dtype=np.int64)
    cdef cnp.float64_t[::1] surplus = np.empty(nn, dtype=np.float64)
    cdef cnp.uint8_t[::1] active = np.empty(nn, dtype=np.uint8)
    cdef cnp.float64_t[::1] remaining = np.empty(m, dtype=np.float64)
    cdef cnp.uint8_t[::1] edge_alive = np.ones(m, dtype=np.uint8)
    cdef cnp.int64_t[::1] forest = np.empty(m if m > 0 else 1, dtype=np.int64)
    cdef Py_ssize_t forest_len = 0

    cdef Py_ssize_t v, e, ru, rv, root, other, i, u, s, p, head, size, start
    cdef int rate, was, n_active
    cdef double dt, best_dt, merged, margin, c, side, value, total, best_value

    n_active = 0
    for v in range(nn):
        surplus[v] = prz[v]
        active[v] = 1 if prz[v] > 0.0 else 0
        if active[v]:
            n_active += 1
    for e in range(m):
        remaining[e] = ecost[e]

    cdef Py_ssize_t best_edge, best_root

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
            ru = _find(parent, esrc[e])
            rv = _find(parent, edst[e])
            if ru == rv:
                edge_alive[e] = 0
                continue
            rate = (1 if active[ru] else 0) + (1 if active[rv] else 0)
            if rate == 0:
                continue
            dt = remaining[e] / rate
            if dt < best_dt:
                best_dt = dt
                best_edge = e
        for v in range(nn):
            if parent[v] == v and active[v] and surplus[v] < best_dt:
                best_dt = surplus[v]
                best_edge = -1
                best_root = v
        if best_edge < 0 and best_root < 0:
            break

        for e in range(m):
            if not edge_alive[e]:
                continue
            ru = _find(parent, esrc[e])
            rv = _find(parent, edst[e])
            if ru == rv:
                continue
            rate = (1 if active[ru] else 0) + (1 if active[rv] else 0)
            if rate != 0:
                remaining[e] -= best_dt * rate
        for v in range(nn):
            if parent[v] == v and active[v]:
                surplus[v] -= best_dt

        if best_edge >= 0:
            ru = _find(parent, esrc[best_edge])
            rv = _find(parent, edst[best_edge])
            root = ru if ru < rv else rv
            other = rv if ru < rv else ru
            merged = surplus[ru] + surplus[rv]
            was = (1 if active[ru] else 0) + (1 if active[rv] else 0)
            parent[other] = root
            surplus[root] = merged
            active[root] = 1 if merged > 0.0 else 0
            active[other] = 0
            n_active += (1 if active[root] else 0) - was
            edge_alive[best_edge] = 0
            forest[forest_len] = best_edge
            forest_len += 1
        else:
            active[best_root] = 0
            surplus[best_root] = 0.0
            n_active -= 1

    # Adjacency over forest edges only.
    cdef cnp.int64_t[::1] adj_head = np.full(nn, -1, dtype=np.int64)
    cdef Py_ssize_t slots = 2 * forest_len if forest_len > 0 else 1
    cdef cnp.int64_t[::1] adj_next = np.empty(slots, dtype=np.int64)
    cdef cnp.int64_t[::1] adj_to = np.empty(slots, dtype=np.int64)
    cdef cnp.int64_t[::1] adj_edge = np.empty(slots, dtype=np.int64)
    cdef Py_ssize_t slot = 0
    cdef Py_ssize_t a, b, half
    for i in range(forest_len):
        e = forest[i]
        for half in range(2):
            if half == 0:
                a = esrc[e]
                b = edst[e]
            else:
                a = edst[e]
                b = esrc[e]
            adj_to[slot] = b
            adj_edge[slot] = e
            adj_next[slot] = adj_head[a]
            adj_head[a] = slot
            slot += 1

    cdef cnp.uint8_t[::1] visited = np.zeros(nn, dtype=np.uint8)
    cdef cnp.int64_t[::1] parent_node = np.full(nn, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] parent_edge = np.full(nn, -1, dtype=np.int64)
    cdef cnp.float64_t[::1] down = np.zeros(nn, dtype=np.float64)
    cdef cnp.float64_t[::1] contrib = np.zeros(nn, dtype=np.float64)
    cdef cnp.float64_t[::1] extra = np.zeros(nn, dtype=np.float64)
    cdef cnp.int64_t[::1] order = np.zeros(nn, dtype=np.int64)

    cdef cnp.int64_t[::1] keep_nodes = np.empty(nn, dtype=np.int64)
    cdef cnp.int64_t[::1] keep_edges = np.empty(m if m > 0 else 1, dtype=np.int64)
    cdef cnp.int64_t[::1] best_nodes = np.empty(nn, dtype=np.int64)
    cdef cnp.int64_t[::1] best_edges = np.empty(m if m > 0 else 1, dtype=np.int64)
    cdef Py_ssize_t keep_nodes_len, keep_edges_len
    cdef Py_ssize_t best_nodes_len = 0, best_edges_len = 0
    cdef cnp.int64_t[::1] stack_node = np.empty(nn, dtype=np.int64)
    cdef cnp.int64_t[::1] stack_edge = np.empty(nn, dtype=np.int64)
    cdef Py_ssize_t stack_len, from_edge

    best_value = -INF

    # Strong-prune every component from its best root; keep the best one.
    for start in range(nn):
        if visited[start]:
            continue
        size = 0
        order[size] = start
        size += 1
        visited[start] = 1
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
                    visited[u] = 1
                    parent_node[u] = v
                    parent_edge[u] = adj_edge[s]
                    order[size] = u
                    size += 1
                s = adj_next[s]

        for i in range(size):
            down[order[i]] = prz[order[i]]
        for i in range(size - 1, 0, -1):
            v = order[i]
            margin = down[v] - ecost[parent_edge[v]]
            c = margin if margin > 0.0 else 0.0
            contrib[v] = c
            down[parent_node[v]] += c
        extra[start] = 0.0
        for i in range(1, size):
            v = order[i]
            p = parent_node[v]
            side = down[p] + extra[p] - contrib[v] - ecost[parent_edge[v]]
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
            keep_nodes_len = 0
            keep_edges_len = 0
            keep_nodes[keep_nodes_len] = root
            keep_nodes_len += 1
            stack_len = 0
            stack_node[stack_len] = root
            stack_edge[stack_len] = -1
            stack_len += 1
            while stack_len > 0:
                stack_len -= 1
                v = stack_node[stack_len]
                from_edge = stack_edge[stack_len]
                s = adj_head[v]
                while s >= 0:
                    u = adj_to[s]
                    e = adj_edge[s]
                    if e != from_edge:
                        if parent_node[u] == v:
                            side = down[u]
                        else:
                            side = down[u] + extra[u] - contrib[v]
                        if side - ecost[e] > 0.0:
                            keep_nodes[keep_nodes_len] = u
                            keep_nodes_len += 1
                            keep_edges[keep_edges_len] = e
                            keep_edges_len += 1
                            stack_node[stack_len] = u
                            stack_edge[stack_len] = e
                            stack_len += 1
                    s = adj_next[s]
            best_nodes_len = keep_nodes_len
            best_edges_len = keep_edges_len
            for i in range(keep_nodes_len):
                best_nodes[i] = keep_nodes[i]
            for i in range(keep_edges_len):
                best_edges[i] = keep_edges[i]

    for i in range(best_nodes_len):
        nmask[best_nodes[i]] = 1
    for i in range(best_edges_len):
        emask[best_edges[i]] = 1
    return node_mask, edge_mask, float(best_value)
