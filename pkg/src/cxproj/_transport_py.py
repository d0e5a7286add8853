"""Pure-Python transportation simplex (fallback for the compiled core).

Primal network simplex specialized to the transportation polytope
{X >= 0 : X 1 = p, X' 1 = q}: northwest-corner starting basis, spanning
tree of I+J-1 basic arcs, duals by one tree traversal per pivot, Dantzig
pricing over the dense reduced-cost matrix with a Bland fallback once
pivots stall on degenerate ties. Mirrors `_transport_core.pyx` operation
for operation so the two backends are interchangeable.
"""

from __future__ import annotations

import numpy as np

# Outcome codes shared with the compiled core.
OPTIMAL = 0
PIVOT_LIMIT = 1

_DEGENERATE_BEFORE_BLAND = 50


def nw_corner(p, q):
    """Northwest-corner basic feasible solution.

    Returns (X, arc_rows, arc_cols) with exactly I+J-1 basic arcs,
    including degenerate zero-flow arcs when a row and a column are
    exhausted simultaneously.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    I, J = p.shape[0], q.shape[0]
    X = np.zeros((I, J))
    arc_rows = np.empty(I + J - 1, dtype=np.intp)
    arc_cols = np.empty(I + J - 1, dtype=np.intp)
    i = j = k = 0
    a, b = p[0], q[0]
    while True:
        t = min(a, b)
        X[i, j] = t
        arc_rows[k] = i
        arc_cols[k] = j
        k += 1
        a -= t
        b -= t
        if i == I - 1 and j == J - 1:
            break
        if (a <= b and i < I - 1) or j == J - 1:
            i += 1
            a = p[i]
        else:
            j += 1
            b = q[j]
    return X, arc_rows, arc_cols


def _tree_scan(I, J, arc_rows, arc_cols, C):
    """One DFS over the basic spanning tree rooted at row node 0.

    Returns (pot, parent_node, parent_arc) where pot solves
    u_i + v_j = c_ij on every basic arc (pot holds u for nodes < I and v
    for nodes >= I) and the parent arrays trace tree paths for cycles.
    """
    n_nodes = I + J
    n_arcs = arc_rows.shape[0]
    deg = np.zeros(n_nodes, dtype=np.intp)
    for k in range(n_arcs):
        deg[arc_rows[k]] += 1
        deg[I + arc_cols[k]] += 1
    start = np.zeros(n_nodes + 1, dtype=np.intp)
    np.cumsum(deg, out=start[1:])
    fill = start[:-1].copy()
    adj_arc = np.empty(2 * n_arcs, dtype=np.intp)
    adj_node = np.empty(2 * n_arcs, dtype=np.intp)
    for k in range(n_arcs):
        a, bnode = arc_rows[k], I + arc_cols[k]
        adj_arc[fill[a]] = k
        adj_node[fill[a]] = bnode
        fill[a] += 1
        adj_arc[fill[bnode]] = k
        adj_node[fill[bnode]] = a
        fill[bnode] += 1

    pot = np.zeros(n_nodes)
    parent_node = np.full(n_nodes, -1, dtype=np.intp)
    parent_arc = np.full(n_nodes, -1, dtype=np.intp)
    visited = np.zeros(n_nodes, dtype=bool)
    visited[0] = True
    stack = [0]
    while stack:
        cur = stack.pop()
        for idx in range(start[cur], start[cur + 1]):
            nb = adj_node[idx]
            if not visited[nb]:
                visited[nb] = True
                k = adj_arc[idx]
                cost = C[arc_rows[k], arc_cols[k]]
                pot[nb] = cost - pot[cur]
                parent_node[nb] = cur
                parent_arc[nb] = k
                stack.append(nb)
    return pot, parent_node, parent_arc


def _path_to_root(node, parent_node, parent_arc):
    arcs, nodes = [], []
    while parent_node[node] >= 0:
        arcs.append(parent_arc[node])
        nodes.append(node)
        node = parent_node[node]
    nodes.append(node)
    return arcs, nodes


def solve_transport_py(p, q, C, max_pivots):
    """Returns (X, status); status is OPTIMAL or PIVOT_LIMIT."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    C = np.asarray(C, dtype=float)
    I, J = C.shape
    X, arc_rows, arc_cols = nw_corner(p, q)
    if I == 1 or J == 1:
        return X, OPTIMAL
    tol = 1e-11 * max(1.0, float(np.max(np.abs(C))))
    bland = False
    streak = 0

    for _ in range(max_pivots):
        pot, parent_node, parent_arc = _tree_scan(I, J, arc_rows, arc_cols, C)
        red = C - pot[:I, None] - pot[I:][None, :]
        if bland:
            flat = np.flatnonzero(red.ravel() < -tol)
            if flat.size == 0:
                return X, OPTIMAL
            ei, ej = divmod(int(flat[0]), J)
        else:
            flat = int(np.argmin(red))
            ei, ej = divmod(flat, J)
            if red[ei, ej] >= -tol:
                return X, OPTIMAL

        # Unique tree cycle closed by the entering arc: walk both endpoints
        # to the root and splice at the common prefix.
        arcs_a, nodes_a = _path_to_root(ei, parent_node, parent_arc)
        arcs_b, nodes_b = _path_to_root(I + ej, parent_node, parent_arc)
        set_a = {n: d for d, n in enumerate(nodes_a)}
        for d_b, n in enumerate(nodes_b):
            if n in set_a:
                d_a = set_a[n]
                break
        walk = arcs_b[:d_b] + list(reversed(arcs_a[:d_a]))

        # Signs alternate along the cycle starting with + on the entering
        # arc, so even walk positions carry the minus sign. Degenerate
        # flows are exact zeros (leaving arcs are zeroed below), hence
        # ties can be compared exactly.
        theta_raw = np.inf
        for pos in range(0, len(walk), 2):
            k = walk[pos]
            f = X[arc_rows[k], arc_cols[k]]
            if f < theta_raw:
                theta_raw = f
        leave_pos = -1
        leave_key = -1
        for pos in range(0, len(walk), 2):
            k = walk[pos]
            if X[arc_rows[k], arc_cols[k]] == theta_raw:
                key = arc_rows[k] * J + arc_cols[k]
                if leave_pos < 0 or (bland and key < leave_key):
                    leave_pos, leave_key = pos, key
        theta = theta_raw if theta_raw > 0.0 else 0.0

        X[ei, ej] += theta
        for pos, k in enumerate(walk):
            r, ccol = arc_rows[k], arc_cols[k]
            if pos % 2 == 0:
                X[r, ccol] -= theta
            else:
                X[r, ccol] += theta
        leaving = walk[leave_pos]
        X[arc_rows[leaving], arc_cols[leaving]] = 0.0
        arc_rows[leaving] = ei
        arc_cols[leaving] = ej

        if theta <= 1e-15:
            streak += 1
            if streak > _DEGENERATE_BEFORE_BLAND:
                bland = True
        else:
            # Strict decrease: the stalled vertex cannot recur, so the
            # fast pricing rule is safe again.
            streak = 0
            bland = False
    return X, PIVOT_LIMIT
