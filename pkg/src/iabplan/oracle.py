"""Brute-force lower-bound oracle for tiny rate problems.

Independent of the interior-point solver: enumerate time allocations on a
lattice, set every access flow to its capacity bound, propagate flows along
the unique backhaul route of each UE by exact conservation, discard lattice
points that violate a backhaul capacity, fiber or resource row, and keep the
best geometric mean found.

Instances must have at most 6 time variables and a forest-shaped backhaul,
so each UE has a single simple route per direction.  Reverse-direction
backhaul variables (present because availability is symmetric on tree edges)
can only carry circulating flow, which never increases any rate; the oracle
pins them to zero and searches the remaining dimensions.

The search is exhaustive per lattice, with multiresolution refinement above
two effective dimensions: the map from a time allocation to the best
achievable rates is concave, so re-gridding a shrinking window around the
incumbent converges to the global optimum at the requested final spacing.
The returned bracket is [best found, best * (1 + slack)] with a slack
estimated from the final grid spacing.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import OracleError
from .problem import RateProblem

MAX_TIME_VARS = 6
_MAX_POINTS = 600_000


@dataclass
class OracleBracket:
    gm_lo_bps: float
    gm_hi_bps: float
    best_t: np.ndarray        # full-length time vector (pinned vars zero)
    final_spacing: float
    n_evaluated: int

    def contains(self, gm_bps: float, rel_slack: float = 1e-9) -> bool:
        return (self.gm_lo_bps * (1 - rel_slack) <= gm_bps
                <= self.gm_hi_bps * (1 + rel_slack))


def _forest_or_fail(pairs) -> None:
    parent = {}

    def find(a):
        while parent.setdefault(a, a) != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in pairs:
        ri, rj = find(i), find(j)
        if ri == rj:
            raise OracleError("oracle needs a forest-shaped backhaul")
        parent[ri] = rj


def _route_tree(n_bs, anchors, edges, toward_anchor: bool):
    """BFS hop pointers over a backhaul edge list.

    toward_anchor=True: per node, the (edge, next node) moving one hop
    closer to an anchor (uplink direction).  Otherwise the (edge, previous
    node) on the path from an anchor down to the node (downlink direction).
    Deterministic: BFS visits nodes in discovery order, edges in index order.
    """
    adj = [[] for _ in range(n_bs)]
    for e, (i, j) in enumerate(edges):
        if toward_anchor:
            adj[j].append((e, int(i)))   # explore backwards from anchors
        else:
            adj[i].append((e, int(j)))
    hop = [None] * n_bs
    seen = [False] * n_bs
    queue = deque(sorted(anchors))
    for a in anchors:
        seen[a] = True
    while queue:
        v = queue.popleft()
        for e, w in adj[v]:
            if not seen[w]:
                seen[w] = True
                hop[w] = (e, v)
                queue.append(w)
    return hop


def _routes(problem: RateProblem):
    """Per-UE access var ids, backhaul path matrices and fiber roots."""
    n_inc = problem.n_included
    na, nd = problem.ul_access.shape[0], problem.dl_access.shape[0]
    if na != n_inc or nd != n_inc:
        raise OracleError("oracle needs exactly one UL and one DL access link per UE")

    undirected = {(min(int(i), int(j)), max(int(i), int(j)))
                  for i, j in np.vstack([problem.ul_backhaul.reshape(-1, 2),
                                         problem.dl_backhaul.reshape(-1, 2)])}
    _forest_or_fail(sorted(undirected))

    anchors = [int(a) for a in np.flatnonzero(problem.anchors_y)]
    up = _route_tree(problem.n_bs, anchors, problem.ul_backhaul, toward_anchor=True)
    down = _route_tree(problem.n_bs, anchors, problem.dl_backhaul, toward_anchor=False)
    anchor_set = set(anchors)

    def path(bs, hops):
        edges = []
        node = int(bs)
        for _ in range(problem.n_bs + 1):
            if node in anchor_set:
                return edges, node
            if hops[node] is None:
                raise OracleError(f"site {node} has no route to an anchor")
            e, node = hops[node]
            edges.append(e)
        raise OracleError("backhaul routing contains a cycle")

    pos = {int(u): k for k, u in enumerate(problem.ue_ids)}
    ul_var = np.zeros(n_inc, dtype=int)
    dl_var = np.zeros(n_inc, dtype=int)
    nbu, nbd = problem.ul_backhaul.shape[0], problem.dl_backhaul.shape[0]
    p_ul = np.zeros((nbu, n_inc))
    p_dl = np.zeros((nbd, n_inc))
    root_ul = np.zeros(n_inc, dtype=int)
    root_dl = np.zeros(n_inc, dtype=int)
    for k, (u, b) in enumerate(problem.ul_access):
        ue = pos[int(u)]
        ul_var[ue] = k
        edges, root = path(b, up)
        p_ul[edges, ue] = 1.0
        root_ul[ue] = root
    for k, (b, u) in enumerate(problem.dl_access):
        ue = pos[int(u)]
        dl_var[ue] = na + k
        edges, root = path(b, down)
        p_dl[edges, ue] = 1.0
        root_dl[ue] = root
    return ul_var, dl_var, p_ul, p_dl, root_ul, root_dl


def brute_force_oracle(problem: RateProblem, grid_resolution: int = 1000) -> OracleBracket:
    """Grid-search bracket on the optimal geometric mean (bps)."""
    nt = problem.n_flow
    if nt > MAX_TIME_VARS:
        raise OracleError(f"oracle limited to {MAX_TIME_VARS} time variables, got {nt}")
    if grid_resolution < 1:
        raise OracleError("grid_resolution must be at least 1")

    ul_var, dl_var, p_ul, p_dl, root_ul, root_dl = _routes(problem)
    n_inc = problem.n_included
    cls = problem.flow_class_slices()
    cap = problem.cap

    ul_bh0 = cls["ul_backhaul"].start
    dl_bh0 = cls["dl_backhaul"].start
    used_bh_ul = np.flatnonzero(p_ul.any(axis=1))
    used_bh_dl = np.flatnonzero(p_dl.any(axis=1))
    used = np.concatenate([ul_var, dl_var, ul_bh0 + used_bh_ul,
                           dl_bh0 + used_bh_dl]).astype(int)
    used = np.unique(used)
    dims = used.size

    res_rows = problem.G[problem.row_slices["resource"], :]
    r_time = (res_rows[:, problem.sl_time].toarray()[:, used]
              if res_rows.shape[0] else np.zeros((0, dims)))

    roots = sorted(set(root_ul.tolist()) | set(root_dl.tolist()))
    root_idx = {a: i for i, a in enumerate(roots)}
    agg_ul = np.zeros((len(roots), n_inc))
    agg_dl = np.zeros((len(roots), n_inc))
    for k in range(n_inc):
        agg_ul[root_idx[root_ul[k]], k] = 1.0
        agg_dl[root_idx[root_dl[k]], k] = 1.0

    col_of = {int(v): c for c, v in enumerate(used)}
    ul_cols = np.array([col_of[int(v)] for v in ul_var])
    dl_cols = np.array([col_of[int(v)] for v in dl_var])
    bhu_cols = np.array([col_of[int(ul_bh0 + e)] for e in used_bh_ul], dtype=int)
    bhd_cols = np.array([col_of[int(dl_bh0 + e)] for e in used_bh_dl], dtype=int)
    c_ul = cap[ul_var]
    c_dl = cap[dl_var]
    c_bhu = cap[ul_bh0 + used_bh_ul]
    c_bhd = cap[dl_bh0 + used_bh_dl]
    p_ul_used = p_ul[used_bh_ul]
    p_dl_used = p_dl[used_bh_dl]

    def evaluate(t_batch: np.ndarray):
        """Best log-objective per lattice point; -inf where infeasible."""
        f_ul = t_batch[:, ul_cols] * c_ul
        f_dl = t_batch[:, dl_cols] * c_dl
        feas = np.all(r_time @ t_batch.T <= 1.0 + 1e-12, axis=0)
        if bhu_cols.size:
            flow = f_ul @ p_ul_used.T
            feas &= np.all(flow <= t_batch[:, bhu_cols] * c_bhu + 1e-15, axis=1)
        if bhd_cols.size:
            flow = f_dl @ p_dl_used.T
            feas &= np.all(flow <= t_batch[:, bhd_cols] * c_bhd + 1e-15, axis=1)
        m_tot = f_ul @ agg_ul.T + f_dl @ agg_dl.T
        feas &= np.all(m_tot <= problem.fiber_norm + 1e-12, axis=1)
        with np.errstate(divide="ignore"):
            obj = np.log(f_ul).sum(axis=1) + np.log(f_dl).sum(axis=1)
        return np.where(feas, obj, -np.inf)

    target = 1.0 / grid_resolution
    per_dim = {1: grid_resolution, 2: grid_resolution, 3: 40, 4: 16, 5: 10, 6: 8}
    q0 = per_dim[dims]
    while (q0 + 1) ** dims > _MAX_POINTS and q0 > 2:
        q0 -= 1
    spacing = 1.0 / q0

    axes = [np.linspace(0.0, 1.0, q0 + 1)] * dims
    n_eval = 0
    best_obj = -np.inf
    best_t = None
    while True:
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dims)
        n_eval += pts.shape[0]
        obj = evaluate(pts)
        k = int(np.argmax(obj))
        if obj[k] > best_obj or best_t is None:
            best_obj = max(obj[k], best_obj)
            best_t = pts[k]
        if spacing <= target + 1e-15:
            break
        spacing /= 2.0
        axes = [np.unique(np.clip(best_t[d] + spacing * np.arange(-4, 5), 0.0, 1.0))
                for d in range(dims)]

    if not np.isfinite(best_obj):
        # degenerate lattice (e.g. resolution 1): every feasible point has a
        # zero rate, which is still a valid lower bound of 0
        t_full = np.zeros(nt)
        return OracleBracket(gm_lo_bps=0.0, gm_hi_bps=np.inf, best_t=t_full,
                             final_spacing=spacing, n_evaluated=n_eval)

    gm = float(np.exp(best_obj / (2 * n_inc)) * problem.scale_bps)
    t_pos = best_t[best_t > 0]
    t_min = float(t_pos.min()) if t_pos.size else spacing
    slack = dims * spacing / max(t_min, spacing)
    t_full = np.zeros(nt)
    t_full[used] = best_t
    return OracleBracket(gm_lo_bps=gm, gm_hi_bps=gm * (1.0 + slack),
                         best_t=t_full, final_spacing=spacing, n_evaluated=n_eval)
