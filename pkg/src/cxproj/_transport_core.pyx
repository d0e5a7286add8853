# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled transportation-simplex core.

Same pivoting scheme as `_transport_py` (northwest-corner start, tree
duals, Dantzig pricing with a Bland fallback after a degenerate streak),
with the per-pivot work — adjacency rebuild, dual DFS, dense pricing,
cycle walk — done in C loops. `transport.solve_transport` picks this
module up at import time when the extension built.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

OPTIMAL = 0
PIVOT_LIMIT = 1

DEF DEGENERATE_BEFORE_BLAND = 50


def solve_transport_core(cnp.ndarray[double, ndim=1] p,
                         cnp.ndarray[double, ndim=1] q,
                         cnp.ndarray[double, ndim=2] C,
                         long max_pivots):
    cdef long I = p.shape[0]
    cdef long J = q.shape[0]
    cdef long n_nodes = I + J
    cdef long n_arcs = I + J - 1

    cdef cnp.ndarray[double, ndim=2] X = np.zeros((I, J))
    cdef cnp.ndarray[long, ndim=1] arc_row = np.empty(n_arcs, dtype=np.int64)
    cdef cnp.ndarray[long, ndim=1] arc_col = np.empty(n_arcs, dtype=np.int64)

    # --- northwest corner ---
    cdef long i = 0, j = 0, k = 0
    cdef double a = p[0], b = q[0], t
    while True:
        t = a if a < b else b
        X[i, j] = t
        arc_row[k] = i
        arc_col[k] = j
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
    if I == 1 or J == 1:
        return X, OPTIMAL

    # --- workspace ---
    cdef cnp.ndarray[long, ndim=1] deg = np.zeros(n_nodes, dtype=np.int64)
    cdef cnp.ndarray[long, ndim=1] start = np.zeros(n_nodes + 1, dtype=np.int64)
    cdef cnp.ndarray[long, ndim=1] fill = np.zeros(n_nodes, dtype=np.int64)
    cdef cnp.ndarray[long, ndim=1] adj_arc = np.empty(2 * n_arcs, dtype=np.int64)
    cdef cnp.ndarray[long, ndim=1] adj_node = np.empty(2 * n_arcs, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] pot = np.zeros(n_nodes)
    cdef cnp.ndarray[long, ndim=1] parent_node = np.empty(n_nodes, dtype=np.int64)
    cdef cnp.ndarray[long, ndim=1] parent_arc = np.empty(n_nodes, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] visited = np.zeros(n_nodes, dtype=np.uint8)
    cdef cnp.ndarray[long, ndim=1] stack = np.empty(n_nodes, dtype=np.int64)
    cdef cnp.ndarray[long, ndim=1] walk = np.empty(n_nodes + 1, dtype=np.int64)
    cdef cnp.ndarray[long, ndim=1] path_a = np.empty(n_nodes, dtype=np.int64)

    cdef double tol = 0.0, red, best, f, theta_raw, theta, ui
    cdef long pivot, idx, nb, cur, top, node, ei, ej
    cdef long na, nbn, d, walk_len, pos, key, leave_pos, leave_key, leaving
    cdef long r, ccol, streak = 0
    cdef bint bland = False, found

    for i in range(I):
        for j in range(J):
            f = C[i, j] if C[i, j] >= 0.0 else -C[i, j]
            if f > tol:
                tol = f
    tol = 1e-11 * (tol if tol > 1.0 else 1.0)

    for pivot in range(max_pivots):
        # adjacency of the basic spanning tree (CSR over both endpoints)
        for node in range(n_nodes):
            deg[node] = 0
        for k in range(n_arcs):
            deg[arc_row[k]] += 1
            deg[I + arc_col[k]] += 1
        start[0] = 0
        for node in range(n_nodes):
            start[node + 1] = start[node] + deg[node]
            fill[node] = start[node]
        for k in range(n_arcs):
            na = arc_row[k]
            nbn = I + arc_col[k]
            adj_arc[fill[na]] = k
            adj_node[fill[na]] = nbn
            fill[na] += 1
            adj_arc[fill[nbn]] = k
            adj_node[fill[nbn]] = na
            fill[nbn] += 1

        # duals + parent pointers by DFS from row node 0
        for node in range(n_nodes):
            visited[node] = 0
        pot[0] = 0.0
        parent_node[0] = -1
        parent_arc[0] = -1
        visited[0] = 1
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            cur = stack[top]
            for idx in range(start[cur], start[cur + 1]):
                nb = adj_node[idx]
                if visited[nb] == 0:
                    visited[nb] = 1
                    k = adj_arc[idx]
                    pot[nb] = C[arc_row[k], arc_col[k]] - pot[cur]
                    parent_node[nb] = cur
                    parent_arc[nb] = k
                    stack[top] = nb
                    top += 1

        # pricing
        ei = -1
        ej = -1
        found = False
        if bland:
            for i in range(I):
                ui = pot[i]
                for j in range(J):
                    if C[i, j] - ui - pot[I + j] < -tol:
                        ei = i
                        ej = j
                        found = True
                        break
                if found:
                    break
            if not found:
                return X, OPTIMAL
        else:
            best = -tol
            for i in range(I):
                ui = pot[i]
                for j in range(J):
                    red = C[i, j] - ui - pot[I + j]
                    if red < best:
                        best = red
                        ei = i
                        ej = j
            if ei < 0:
                return X, OPTIMAL

        # cycle: climb both endpoints to the root, splice at the first
        # common ancestor (marker pass on the row-endpoint path)
        for node in range(n_nodes):
            visited[node] = 0
        node = ei
        na = 0
        while node >= 0:
            visited[node] = 1
            node = parent_node[node]
        node = I + ej
        walk_len = 0
        while visited[node] == 0:
            walk[walk_len] = parent_arc[node]
            walk_len += 1
            node = parent_node[node]
        # node is now the meet point; collect the row-side path up to it
        cur = ei
        d = 0
        while cur != node:
            path_a[d] = parent_arc[cur]
            d += 1
            cur = parent_node[cur]
        for idx in range(d - 1, -1, -1):
            walk[walk_len] = path_a[idx]
            walk_len += 1

        # even walk positions are minus arcs; exact tie comparison is
        # sound because leaving arcs are zeroed exactly below
        theta_raw = X[arc_row[walk[0]], arc_col[walk[0]]]
        for pos in range(2, walk_len, 2):
            k = walk[pos]
            f = X[arc_row[k], arc_col[k]]
            if f < theta_raw:
                theta_raw = f
        leave_pos = -1
        leave_key = -1
        for pos in range(0, walk_len, 2):
            k = walk[pos]
            if X[arc_row[k], arc_col[k]] == theta_raw:
                key = arc_row[k] * J + arc_col[k]
                if leave_pos < 0 or (bland and key < leave_key):
                    leave_pos = pos
                    leave_key = key
        theta = theta_raw if theta_raw > 0.0 else 0.0

        X[ei, ej] += theta
        for pos in range(walk_len):
            k = walk[pos]
            r = arc_row[k]
            ccol = arc_col[k]
            if pos % 2 == 0:
                X[r, ccol] -= theta
            else:
                X[r, ccol] += theta
        leaving = walk[leave_pos]
        X[arc_row[leaving], arc_col[leaving]] = 0.0
        arc_row[leaving] = ei
        arc_col[leaving] = ej

        if theta <= 1e-15:
            streak += 1
            if streak > DEGENERATE_BEFORE_BLAND:
                bland = True
        else:
            # Strict decrease: the stalled vertex cannot recur, so the
            # fast pricing rule is safe again.
            streak = 0
            bland = False

    return X, PIVOT_LIMIT
