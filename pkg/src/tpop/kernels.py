"""Numba-compiled inner loop for running T-PoP over every agent in a world.

The kernel consumes pre-generated uniforms (one row per witness-naming
event) so results are bit-identical to the pure-Python reference path in
``world._run_epoch_reference`` and independent of scheduling.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def epoch_counts(
    indptr,  # int64[n+1] CSR row offsets of the neighbour lists
    indices,  # int64[:] neighbour ids, ascending within each row
    adj,  # bool[n, n]; adj[i, j] true when j is in i's neighbour set
    honest,  # bool[n]
    witnesses,  # int64[d] per-level naming quotas
    nominal_sizes,  # int64[d] nominal level sizes
    t_num,  # threshold numerator
    t_den,  # threshold denominator
    uniforms,  # float64[n * events_per_prover, max_deg - 1 or 1]
    events_per_prover,  # naming events per prover in the full tree
):
    """Run tree construction + verification with every agent as prover.

    Returns int64[4]: honest accepted/rejected, dishonest accepted/rejected.
    """
    n = honest.size
    d = witnesses.size
    tree_cap = 1
    for l in range(d):
        tree_cap += nominal_sizes[l]

    max_deg = 0
    for i in range(n):
        deg = indptr[i + 1] - indptr[i]
        if deg > max_deg:
            max_deg = deg

    node_agent = np.empty(tree_cap, np.int64)
    node_parent = np.empty(tree_cap, np.int64)
    level_start = np.empty(d + 2, np.int64)
    used = np.zeros(n, np.bool_)
    buf = np.empty(max(max_deg, 1), np.int64)
    eliminated = np.empty(tree_cap, np.bool_)
    counts = np.zeros(4, np.int64)

    for g in range(n):
        # --- tree construction, breadth first ---
        node_agent[0] = g
        node_parent[0] = -1
        used[g] = True
        size = 1
        level_start[0] = 0
        level_start[1] = 1
        event = 0
        for l in range(1, d + 1):
            quota = witnesses[l - 1]
            for p_node in range(level_start[l - 1], level_start[l]):
                agent = node_agent[p_node]
                deg = indptr[agent + 1] - indptr[agent]
                for k in range(deg):
                    buf[k] = indices[indptr[agent] + k]
                row = g * events_per_prover + event
                event += 1
                # Fisher-Yates driven by the pre-drawn uniform row
                for k in range(deg - 1, 0, -1):
                    j = int(uniforms[row, deg - 1 - k] * (k + 1))
                    tmp = buf[k]
                    buf[k] = buf[j]
                    buf[j] = tmp
                named = 0
                for k in range(deg):
                    if named == quota:
                        break
                    cand = buf[k]
                    if used[cand]:
                        continue
                    used[cand] = True
                    node_agent[size] = cand
                    node_parent[size] = p_node
                    size += 1
                    named += 1
            level_start[l + 1] = size

        # --- verification, deepest level first ---
        for k in range(size):
            eliminated[k] = False
        verdict = True
        failed = False
        for l in range(d, 0, -1):
            quota = witnesses[l - 1]
            m_total = 0
            for p_node in range(level_start[l - 1], level_start[l]):
                if eliminated[p_node]:
                    continue
                k_confirm = 0
                for c_node in range(level_start[l], level_start[l + 1]):
                    if node_parent[c_node] != p_node:
                        continue
                    if eliminated[c_node]:
                        continue
                    if adj[node_agent[c_node], node_agent[p_node]]:
                        k_confirm += 1
                m_total += k_confirm
                if k_confirm * t_den < t_num * quota:
                    eliminated[p_node] = True
            if m_total * t_den < t_num * nominal_sizes[l - 1]:
                verdict = False
                failed = True
                break
        if not failed and eliminated[0]:
            verdict = False

        for k in range(size):
            used[node_agent[k]] = False

        if honest[g]:
            if verdict:
                counts[0] += 1
            else:
                counts[1] += 1
        else:
            if verdict:
                counts[2] += 1
            else:
                counts[3] += 1
    return counts
