"""Certified log-barrier interior-point solver for the rate program.

The geometric-mean objective is maximized through its monotone transform
F(x) = -sum_i [log r_i^UL + log r_i^DL], a smooth convex function on the
interior of the linear feasible region.  We follow the central path of

    minimize  tau * F(x) - sum_k log(h_k - g_k' x)    subject to  A x = 0

with damped Newton steps.  Each step solves the saddle-point system

    [ H   A' ] [dx]   [-grad]          H  = tau * H_F + G' diag(1/s^2) G
    [ A   0  ] [ w] = [  0  ]          s  = h - G x  (slacks, kept > 0)

so every iterate satisfies the conservation equalities exactly.  On the
central path the multipliers lambda_k = 1/(tau * s_k) are dual feasible and
give the duality gap bound m/tau (m = number of inequality rows), which we
drive below `duality_gap_tol` per log-rate term; that bounds the relative
suboptimality of the reported geometric mean.  See docs/solver_notes.md for
the full derivation.

All computations run in capacity-normalized units (see problem.py); rates
are converted to bps only at the reporting boundary.  The solve is
deterministic: no randomized steps, single-threaded sparse factorizations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, InfeasibleProblemError
from .problem import RateProblem, validate

_TAU0 = 1.0
_ARMIJO = 0.25
_STEP_SHRINK = 0.5
_BOUNDARY_BACKOFF = 0.99


@dataclass(frozen=True)
class SolverConfig:
    feasibility_tol: float = 1e-9      # relative primal residual accepted
    duality_gap_tol: float = 1e-6      # relative GM suboptimality bound
    barrier_increase_factor: float = 10.0
    newton_tol: float = 1e-10          # half squared Newton decrement
    max_outer_iters: int = 60
    max_inner_iters: int = 100

    def __post_init__(self):
        if min(self.feasibility_tol, self.duality_gap_tol, self.newton_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.barrier_increase_factor <= 1:
            raise ValueError("barrier increase factor must exceed 1")


@dataclass
class Certificate:
    """Optimality evidence attached to a solve."""

    converged: bool
    gap_rel: float                 # duality gap bound per log-rate term
    max_primal_residual: float
    objective_trace: list          # sum of log rates after each outer iteration
    outer_iters: int
    inner_iters: int
    tau_final: float
    n_inequalities: int

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "gap_rel": self.gap_rel,
            "max_primal_residual": self.max_primal_residual,
            "objective_trace": list(self.objective_trace),
            "outer_iters": self.outer_iters,
            "inner_iters": self.inner_iters,
            "tau_final": self.tau_final,
            "n_inequalities": self.n_inequalities,
        }


@dataclass
class Solution:
    """Optimal point with rates, duals and the geometric mean."""

    x: np.ndarray                 # normalized variable vector
    ue_ids: np.ndarray
    r_ul_bps: np.ndarray
    r_dl_bps: np.ndarray
    gm_bps: float
    objective_log: float          # sum of log rates, normalized units
    scale_bps: float
    lam: np.ndarray               # inequality multipliers
    nu: np.ndarray                # equality multipliers
    tau_final: float

    def to_dict(self) -> dict:
        return {
            "gm_bps": self.gm_bps,
            "gm_mbps": self.gm_bps / 1e6,
            "objective_log": self.objective_log,
            "n_ues_served": int(self.ue_ids.size),
            "scale_bps": self.scale_bps,
            "tau_final": self.tau_final,
        }


def _incident_time_counts(problem: RateProblem) -> np.ndarray:
    """Per time variable: the largest incident-variable count over its BSs."""
    counts = np.zeros(problem.n_bs, dtype=int)
    ends = [[] for _ in range(problem.n_flow)]
    na, nd = problem.ul_access.shape[0], problem.dl_access.shape[0]
    nbu = problem.ul_backhaul.shape[0]
    for k, (_u, b) in enumerate(problem.ul_access):
        ends[k].append(b)
    for k, (b, _u) in enumerate(problem.dl_access):
        ends[na + k].append(b)
    for k, (i, j) in enumerate(problem.ul_backhaul):
        ends[na + nd + k] += [i, j]
    for k, (i, j) in enumerate(problem.dl_backhaul):
        ends[na + nd + nbu + k] += [i, j]
    for bs_list in ends:
        for b in bs_list:
            counts[b] += 1
    return np.array([max(counts[b] for b in bs_list) for bs_list in ends])


def _bfs_tree(n_nodes, seeds, edges, forward=True):
    """BFS over an edge list; returns per-node (pred_edge, pred_node) or None.

    forward=True explores tail->head, otherwise head->tail.  Deterministic:
    nodes dequeue in id order of first discovery, edges scan in index order.
    """
    from collections import deque

    adj = [[] for _ in range(n_nodes)]
    for e, (i, j) in enumerate(edges):
        if forward:
            adj[i].append((e, j))
        else:
            adj[j].append((e, i))
    pred = [None] * n_nodes
    seen = np.zeros(n_nodes, dtype=bool)
    seen[seeds] = True
    queue = deque(sorted(seeds))
    while queue:
        v = queue.popleft()
        for e, w in adj[v]:
            if not seen[w]:
                seen[w] = True
                pred[w] = (e, v)
                queue.append(w)
    return pred, seen


def strictly_feasible_point(problem: RateProblem) -> np.ndarray:
    """Interior starting point: 0.9-scaled uniform time split, routed flows.

    Times take a uniform share of the busiest incident BS budget, scaled by
    0.9.  Flows are built by routing one unit along a canonical anchor<->UE
    walk for every flow and fiber variable (so each is strictly positive),
    then scaling all of them to half the tightest capacity bound.
    """
    nf, nm = problem.n_flow, len(problem.m_vars)
    na, nd = problem.ul_access.shape[0], problem.dl_access.shape[0]
    nbu = problem.ul_backhaul.shape[0]
    B = problem.n_bs
    anchors = np.flatnonzero(problem.anchors_y)

    t = 0.9 / np.maximum(_incident_time_counts(problem), 1)

    ul_edges = [tuple(e) for e in problem.ul_backhaul]
    dl_edges = [tuple(e) for e in problem.dl_backhaul]
    # canonical path pointers
    down_pred, _ = _bfs_tree(B, anchors, dl_edges, forward=True)    # anchor -> bs
    up_next, _ = _bfs_tree(B, anchors, ul_edges, forward=False)     # bs -> anchor
    t_d = sorted({int(b) for b, _u in problem.dl_access})
    s_u = sorted({int(b) for _u, b in problem.ul_access})
    sink_next, _ = _bfs_tree(B, t_d, dl_edges, forward=False) if t_d else ([None] * B, None)
    src_pred, _ = _bfs_tree(B, s_u, ul_edges, forward=True) if s_u else ([None] * B, None)

    first_dl_at = {}
    for k, (b, _u) in enumerate(problem.dl_access):
        first_dl_at.setdefault(int(b), na + k)
    first_ul_at = {}
    for k, (_u, b) in enumerate(problem.ul_access):
        first_ul_at.setdefault(int(b), k)

    flow = np.zeros(nf)
    m_cnt = np.zeros(nm)
    m_pos = {key: idx for idx, key in enumerate(problem.m_vars)}
    anchor_set = set(int(a) for a in anchors)

    def fail(msg):
        raise InfeasibleProblemError(f"cannot construct interior point: {msg}")

    def walk_up_to_anchor(b):
        """Add flow on UL backhaul edges from b to its anchor; returns anchor."""
        node = int(b)
        while node not in anchor_set:
            hop = up_next[node]
            if hop is None:
                fail(f"BS {node} has no uplink route to an anchor")
            e, node = hop
            flow[na + nd + e] += 1.0
        return node

    def walk_down_from_anchor(b):
        """Add flow on DL backhaul edges from some anchor down to b."""
        node = int(b)
        path = []
        while node not in anchor_set:
            hop = down_pred[node]
            if hop is None:
                fail(f"BS {node} has no downlink route from an anchor")
            e, node = hop
            path.append(e)
        for e in path:
            flow[na + nd + nbu + e] += 1.0
        return node

    def walk_to_dl_sink(b):
        """Follow DL edges from b to a UE-serving BS, add its access flow."""
        node = int(b)
        while node not in first_dl_at:
            hop = sink_next[node]
            if hop is None:
                fail(f"BS {node} cannot dispose of downlink flow")
            e, node = hop
            flow[na + nd + nbu + e] += 1.0
        flow[first_dl_at[node]] += 1.0

    def walk_from_ul_source(b):
        """Follow UL edges backwards from b to a UE-serving BS, add access flow."""
        node = int(b)
        path = []
        while node not in first_ul_at:
            hop = src_pred[node]
            if hop is None:
                fail(f"BS {node} receives no uplink flow")
            e, node = hop
            path.append(e)
        for e in path:
            flow[na + nd + e] += 1.0
        flow[first_ul_at[node]] += 1.0

    for k, (_u, b) in enumerate(problem.ul_access):
        flow[k] += 1.0
        a = walk_up_to_anchor(b)
        m_cnt[m_pos[(a, "U")]] += 1.0
    for k, (b, _u) in enumerate(problem.dl_access):
        flow[na + k] += 1.0
        a = walk_down_from_anchor(b)
        m_cnt[m_pos[(a, "D")]] += 1.0
    for k, (i, j) in enumerate(problem.ul_backhaul):
        walk_from_ul_source(i)
        flow[na + nd + k] += 1.0
        a = walk_up_to_anchor(j)
        m_cnt[m_pos[(a, "U")]] += 1.0
    for k, (i, j) in enumerate(problem.dl_backhaul):
        a = walk_down_from_anchor(i)
        m_cnt[m_pos[(a, "D")]] += 1.0
        flow[na + nd + nbu + k] += 1.0
        walk_to_dl_sink(j)
    for idx, (a, d) in enumerate(problem.m_vars):
        m_cnt[idx] += 1.0
        if d == "D":
            walk_to_dl_sink(a)
        else:
            walk_from_ul_source(a)

    if np.any(flow <= 0):
        fail("a flow variable received no routed walk")

    sigma = 0.5 * np.min(t * problem.cap / flow)
    m_tot = np.zeros(B)
    for idx, (a, _d) in enumerate(problem.m_vars):
        m_tot[a] += m_cnt[idx]
    busiest = m_tot.max() if nm else 0.0
    if busiest > 0:
        sigma = min(sigma, 0.45 * problem.fiber_norm / busiest)
    if sigma <= 0:
        fail("zero-capacity link in the active set")

    return np.concatenate([sigma * flow, t, sigma * m_cnt])


def _kkt_solve(H: sp.spmatrix, A: sp.spmatrix, grad: np.ndarray):
    n = H.shape[0]
    p = A.shape[0]
    if p:
        kkt = sp.bmat([[H, A.T], [A, None]], format="csc")
        rhs = np.concatenate([-grad, np.zeros(p)])
    else:
        kkt = sp.csc_matrix(H)
        rhs = -grad
    lu = spla.splu(kkt)
    sol = lu.solve(rhs)
    # one refinement pass keeps A dx = 0 near machine level despite the
    # wildly mixed barrier scales in H
    sol = sol + lu.solve(rhs - kkt @ sol)
    return sol[:n], sol[n:]


class _EqualityProjector:
    """Removes equality drift: x <- x - A'(AA')^-1 A x.

    Newton steps satisfy A dx = 0 only up to the factorization's rounding;
    re-projecting after every accepted step keeps the conservation residual
    at machine level instead of letting it accumulate over iterations.
    """

    def __init__(self, A: sp.spmatrix):
        import scipy.linalg
        self.A = A
        if A.shape[0]:
            gram = (A @ A.T).toarray()
            self._chol = scipy.linalg.cho_factor(gram)
        else:
            self._chol = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self._chol is None:
            return x
        import scipy.linalg
        resid = self.A @ x
        return x - self.A.T @ scipy.linalg.cho_solve(self._chol, resid)


def _center(problem: RateProblem, x: np.ndarray, tau: float, cfg: SolverConfig,
            project: _EqualityProjector, stat_target: float):
    """Newton iterations for one barrier subproblem; returns (x, w, iters).

    Minimizes psi = F + phi/tau (the 1/tau scaling keeps values and
    gradients at the scale of F for any tau, so line-search comparisons
    stay above floating-point noise).  Stops once the Newton decrement is
    below `newton_tol` AND the KKT stationarity residual for the restored
    duals (lambda = 1/(tau s), nu = w) is below `stat_target`; a few extra
    polish steps are allowed for the latter, since the decrement bounds the
    residual only loosely through the Hessian conditioning.
    """
    G, h, A, U = problem.G, problem.h, problem.A, problem.U_mat

    def barrier_value(s, r):
        return -np.log(r).sum() - np.log(s).sum() / tau

    s = h - G @ x
    r = U @ x
    if np.any(s <= 0) or np.any(r <= 0):
        raise InfeasibleProblemError("starting point is not strictly feasible")

    w = np.zeros(A.shape[0])
    polish = 0
    for it in range(cfg.max_inner_iters):
        inv_s = 1.0 / s
        inv_r = 1.0 / r
        grad_f = -(U.T @ inv_r)
        grad = grad_f + G.T @ (inv_s / tau)
        H = (U.T @ sp.diags(inv_r ** 2) @ U
             + G.T @ sp.diags(inv_s ** 2 / tau) @ G)
        dx, w = _kkt_solve(H.tocsr(), A, grad)
        decrement = float(dx @ (H @ dx))
        if decrement / 2.0 <= cfg.newton_tol:
            grad_scale = max(1.0, float(np.abs(grad_f).max()))
            stat = float(np.abs(grad + A.T @ w).max()) / grad_scale
            if stat <= stat_target or polish >= 8:
                return x, w, it
            polish += 1
        # ratio test keeps the step strictly inside the domain
        g_dx = G @ dx
        u_dx = U @ dx
        alpha = 1.0
        pos = g_dx > 0
        if pos.any():
            alpha = min(alpha, _BOUNDARY_BACKOFF * np.min(s[pos] / g_dx[pos]))
        neg = u_dx < 0
        if neg.any():
            alpha = min(alpha, _BOUNDARY_BACKOFF * np.min(r[neg] / -u_dx[neg]))
        psi = barrier_value(s, r)
        slope = float(grad @ dx)
        accepted = False
        while alpha > 1e-14:
            s_new = s - alpha * g_dx
            r_new = r + alpha * u_dx
            if s_new.min() > 0 and r_new.min() > 0:
                if barrier_value(s_new, r_new) <= psi + _ARMIJO * alpha * slope:
                    accepted = True
                    break
            alpha *= _STEP_SHRINK
        if not accepted:
            if decrement / 2.0 <= cfg.newton_tol:
                return x, w, it   # polish stalled at machine precision
            raise ConvergenceError("line search failed", best_x=x,
                                   gap=G.shape[0] / tau)
        x = x + alpha * dx
        x_proj = project(x)
        s_proj = h - G @ x_proj
        r_proj = U @ x_proj
        if s_proj.min() > 0 and r_proj.min() > 0:
            x, s, r = x_proj, s_proj, r_proj
        else:   # drift correction would leave the interior; keep raw step
            s = h - G @ x
            r = U @ x
    raise ConvergenceError("inner Newton iteration cap hit", best_x=x,
                           gap=G.shape[0] / tau)


def solve(problem: RateProblem, cfg: SolverConfig | None = None):
    """Maximize the sum of log rates; returns (Solution, Certificate).

    Raises InfeasibleProblemError when no strictly feasible point exists and
    ConvergenceError (carrying the best iterate and its gap) on iteration
    caps.  Deterministic for fixed inputs.
    """
    cfg = cfg or SolverConfig()
    n_terms = 2 * problem.n_included
    m_ineq = problem.G.shape[0]
    gap_target_abs = cfg.duality_gap_tol * n_terms

    project = _EqualityProjector(problem.A)
    x = project(strictly_feasible_point(problem))
    stat_target = 0.25 * cfg.duality_gap_tol
    # 5% overshoot keeps the final reported gap strictly below the tolerance
    tau_needed = 1.05 * m_ineq / gap_target_abs
    tau = _TAU0
    trace = []
    inner_total = 0
    converged = False
    w = np.zeros(problem.A.shape[0])
    for _outer in range(cfg.max_outer_iters):
        x, w, inner = _center(problem, x, tau, cfg, project, stat_target)
        inner_total += inner
        trace.append(problem.objective_log(x))
        if m_ineq / tau <= gap_target_abs:
            converged = True
            break
        tau = min(tau * cfg.barrier_increase_factor, tau_needed)

    gap_rel = m_ineq / tau / n_terms
    if not converged:
        raise ConvergenceError("outer iteration cap hit", best_x=x, gap=gap_rel)

    s = problem.h - problem.G @ x
    lam = 1.0 / (tau * s)
    nu = w
    report = validate(problem, x, tol=cfg.feasibility_tol)

    r_ul, r_dl = problem.rates_bps(x)
    solution = Solution(
        x=x, ue_ids=problem.ue_ids.copy(), r_ul_bps=r_ul, r_dl_bps=r_dl,
        gm_bps=problem.gm_bps(x), objective_log=problem.objective_log(x),
        scale_bps=problem.scale_bps, lam=lam, nu=nu, tau_final=tau,
    )
    certificate = Certificate(
        converged=True, gap_rel=gap_rel,
        max_primal_residual=report.max_violation,
        objective_trace=trace, outer_iters=len(trace),
        inner_iters=inner_total, tau_final=tau, n_inequalities=m_ineq,
    )
    return solution, certificate


@dataclass
class KktReport:
    """Residuals of the KKT system at a candidate primal/dual pair."""

    ok: bool
    stationarity: float      # relative to the objective gradient scale
    primal_ineq: float
    primal_eq: float
    dual_feas_min: float     # most negative multiplier (>= 0 when clean)
    comp_gap_rel: float      # lambda' s per log-rate term


def check_kkt(problem: RateProblem, solution: Solution,
              tol: float = 1e-6, feas_tol: float = 1e-9) -> KktReport:
    """Verify stationarity, feasibility, dual feasibility, complementarity."""
    x, lam, nu = solution.x, solution.lam, solution.nu
    report = validate(problem, x, tol=feas_tol)
    primal_ineq = max(report.violations[k] for k in
                      ("flow_capacity", "resource", "fiber", "nonneg"))
    primal_eq = max(report.violations["conservation_dl"],
                    report.violations["conservation_ul"])

    r = problem.U_mat @ x
    grad0 = -(problem.U_mat.T @ (1.0 / r))
    resid = grad0 + problem.G.T @ lam + problem.A.T @ nu
    scale = max(1.0, float(np.abs(grad0).max()))
    stationarity = float(np.abs(resid).max()) / scale

    s = problem.h - problem.G @ x
    comp_gap_rel = float(lam @ s) / (2 * problem.n_included)
    dual_min = float(lam.min()) if lam.size else 0.0

    ok = (stationarity <= tol and primal_ineq <= feas_tol
          and primal_eq <= feas_tol and dual_min >= -tol
          and comp_gap_rel <= tol)
    return KktReport(ok=ok, stationarity=stationarity, primal_ineq=primal_ineq,
                     primal_eq=primal_eq, dual_feas_min=dual_min,
                     comp_gap_rel=comp_gap_rel)
