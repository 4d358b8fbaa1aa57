"""Assembly of the geometric-mean rate maximization program.

Variables are per-direction flows and time fractions on every active link,
plus the downlink/uplink split of each anchor's fiber pipe.  Constraints:

  * flow capacity        f_e <= c_e * t_e             (per active link)
  * flow conservation    (per BS, per direction)      (equalities)
  * fiber pipe           M_i^D + M_i^U <= M           (per anchor)
  * TDM resource         sum of incident t_e <= 1     (per BS)
  * nonnegativity        on every variable

and the objective is sum over served UEs of log(UL rate) + log(DL rate),
whose maximizer also maximizes the geometric mean of the rates.

A link variable is created only when the link is available in the pattern,
exists in the link table, AND can actually carry flow between an anchor and
a served UE; flow variables that conservation would force to zero are
eliminated rather than kept at the boundary, so the feasible region has a
nonempty interior whenever any UE is servable.  UEs that end up with no
usable uplink or downlink are excluded from the objective and reported
(`excluded`), with reason "no_link" or "starved".
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .connectivity import ConnectivityPattern
from .errors import InfeasibleProblemError
from .geometry import AnchorSet
from .linkbudget import BudgetConfig, LinkTable


def _bfs(n: int, seeds: np.ndarray, adj: list[list[int]]) -> np.ndarray:
    reach = seeds.copy()
    queue = deque(np.flatnonzero(seeds))
    while queue:
        i = queue.popleft()
        for j in adj[i]:
            if not reach[j]:
                reach[j] = True
                queue.append(j)
    return reach


@dataclass
class RateProblem:
    """Immutable assembled program in capacity-normalized units."""

    n_bs: int
    n_ue: int
    anchors_y: np.ndarray
    # active directed links, one row per variable pair (f, t)
    ul_access: np.ndarray    # (nA, 2) rows of (ue, bs)
    dl_access: np.ndarray    # (nD, 2) rows of (bs, ue)
    ul_backhaul: np.ndarray  # (nBU, 2) rows of (i, j)
    dl_backhaul: np.ndarray  # (nBD, 2) rows of (i, j)
    m_vars: list             # [(bs, "D"|"U"), ...]
    cap: np.ndarray          # (nf,) normalized link capacities
    scale_bps: float         # bps per normalized flow unit
    fiber_norm: float        # normalized fiber pipe capacity
    G: sp.csr_matrix         # inequality lhs, G x <= h
    h: np.ndarray
    A: sp.csr_matrix         # equality lhs (full row rank), A x = 0
    eq_labels: list          # (bs, "D"|"U") per kept equality row
    U_mat: sp.csr_matrix     # (2 N', n) rate aggregation; rows: UL block, DL block
    ue_ids: np.ndarray       # (N',) included UE ids
    excluded: dict           # ue id -> "no_link" | "starved"
    row_slices: dict = field(default_factory=dict)  # G row family -> slice

    @property
    def n_flow(self) -> int:
        return self.cap.size

    @property
    def n_var(self) -> int:
        return 2 * self.n_flow + len(self.m_vars)

    @property
    def n_included(self) -> int:
        return self.ue_ids.size

    @property
    def sl_flow(self) -> slice:
        return slice(0, self.n_flow)

    @property
    def sl_time(self) -> slice:
        return slice(self.n_flow, 2 * self.n_flow)

    @property
    def sl_m(self) -> slice:
        return slice(2 * self.n_flow, self.n_var)

    def flow_class_slices(self) -> dict:
        """Slices of the flow block per link class."""
        na, nd = self.ul_access.shape[0], self.dl_access.shape[0]
        nbu, nbd = self.ul_backhaul.shape[0], self.dl_backhaul.shape[0]
        o = np.cumsum([0, na, nd, nbu, nbd])
        return {
            "ul_access": slice(o[0], o[1]),
            "dl_access": slice(o[1], o[2]),
            "ul_backhaul": slice(o[2], o[3]),
            "dl_backhaul": slice(o[3], o[4]),
        }

    def rates_norm(self, x: np.ndarray):
        r = self.U_mat @ x
        n = self.n_included
        return r[:n], r[n:]

    def rates_bps(self, x: np.ndarray):
        r_ul, r_dl = self.rates_norm(x)
        return r_ul * self.scale_bps, r_dl * self.scale_bps

    def objective_log(self, x: np.ndarray) -> float:
        """Sum of log rates in normalized units (-inf if any rate is 0)."""
        r = self.U_mat @ x
        if np.any(r <= 0):
            return -np.inf
        return float(np.log(r).sum())

    def gm_bps(self, x: np.ndarray) -> float:
        obj = self.objective_log(x)
        if not np.isfinite(obj):
            return 0.0
        return float(np.exp(obj / (2 * self.n_included)) * self.scale_bps)

    def dump(self, path) -> None:
        """Sparse text dump (variables, constraint triplets, objective groups)."""
        cls = self.flow_class_slices()
        with open(path, "w") as fh:
            fh.write(f"# rate problem: {self.n_var} variables, "
                     f"{self.G.shape[0]} inequalities, {self.A.shape[0]} equalities\n")
            fh.write(f"# flow scale: {self.scale_bps:.9e} bps per unit\n")
            fh.write("[variables]\n")
            for name, slc in cls.items():
                links = getattr(self, name)
                for k in range(slc.start, slc.stop):
                    i, j = links[k - slc.start]
                    fh.write(f"f{k} {name} {i} {j} cap={self.cap[k]:.12g}\n")
            for k in range(self.n_flow):
                fh.write(f"t{k} time_for_f{k}\n")
            for idx, (bs, d) in enumerate(self.m_vars):
                fh.write(f"m{idx} fiber_{d} bs={bs}\n")
            fh.write("[inequalities] # rows of G x <= h\n")
            gcoo = self.G.tocoo()
            for r, c, v in zip(gcoo.row, gcoo.col, gcoo.data):
                fh.write(f"{r} {c} {v:.12g}\n")
            fh.write("[rhs]\n")
            for r, v in enumerate(self.h):
                fh.write(f"{r} {v:.12g}\n")
            fh.write("[equalities] # rows of A x = 0\n")
            acoo = self.A.tocoo()
            for r, c, v in zip(acoo.row, acoo.col, acoo.data):
                fh.write(f"{r} {c} {v:.12g}\n")
            fh.write("[objective] # served UE id: ul var ids / dl var ids\n")
            umat = self.U_mat.tolil()
            n = self.n_included
            for k, ue in enumerate(self.ue_ids):
                ul = " ".join(str(c) for c in umat.rows[k])
                dl = " ".join(str(c) for c in umat.rows[n + k])
                fh.write(f"ue{ue}: {ul} / {dl}\n")


def assemble(links: LinkTable, pattern: ConnectivityPattern, anchors: AnchorSet,
             cfg: BudgetConfig | None = None) -> RateProblem:
    """Build the RateProblem for one scenario.

    Raises InfeasibleProblemError when no UE is servable.  UEs attached only
    to sites with no route to a fiber drop are excluded as "starved" with a
    warning; UEs with no eligible link at all are excluded as "no_link".
    """
    cfg = cfg or links.cfg
    B, U = links.n_bs, links.n_ue
    y = anchors.y
    if y.shape[0] != B:
        raise InfeasibleProblemError("anchor vector length does not match link table")

    acc = pattern.access
    ul_acc_ok = acc & links.exists_ub               # (U, B) candidate u->b
    dl_acc_ok = acc & links.exists_bu.T             # (U, B) candidate b->u
    bh_ok = pattern.backhaul & links.exists_bb      # (B, B)
    np.fill_diagonal(bh_ok, False)

    fwd = [list(np.flatnonzero(bh_ok[i])) for i in range(B)]
    rev = [list(np.flatnonzero(bh_ok[:, i])) for i in range(B)]
    dl_reach = _bfs(B, y.copy(), fwd)   # can receive DL from some anchor
    ul_reach = _bfs(B, y.copy(), rev)   # can forward UL to some anchor

    ul_ok = ul_acc_ok & ul_reach[None, :]
    dl_ok = dl_acc_ok & dl_reach[None, :]
    included = ul_ok.any(axis=1) & dl_ok.any(axis=1)

    excluded = {}
    for u in np.flatnonzero(~included):
        had_any = bool(ul_acc_ok[u].any() or dl_acc_ok[u].any())
        excluded[int(u)] = "starved" if had_any else "no_link"
    n_starved = sum(1 for r in excluded.values() if r == "starved")
    if n_starved:
        warnings.warn(
            f"{n_starved} UE(s) starved (attached to sites with no route to "
            "fiber); excluded from the objective", stacklevel=2)
    if not included.any():
        raise InfeasibleProblemError("no servable UEs")
    ul_ok &= included[:, None]
    dl_ok &= included[:, None]

    # backhaul usability: DL needs an anchor upstream and a UE-serving BS
    # downstream; UL is the mirror image.
    t_d = dl_ok.any(axis=0)   # BS delivers DL to some served UE
    s_u = ul_ok.any(axis=0)   # BS collects UL from some served UE
    dl_sinkable = _bfs(B, t_d.copy(), rev)
    ul_sourceable = _bfs(B, s_u.copy(), fwd)
    bh_dl = bh_ok & dl_reach[:, None] & dl_sinkable[None, :]
    bh_ul = bh_ok & ul_sourceable[:, None] & ul_reach[None, :]

    m_vars = [(int(i), "D") for i in np.flatnonzero(y & dl_sinkable)]
    m_vars += [(int(i), "U") for i in np.flatnonzero(y & ul_sourceable)]

    ul_access = np.argwhere(ul_ok)            # (ue, bs)
    dl_access = np.argwhere(dl_ok)[:, ::-1].copy()  # stored as (bs, ue)
    dl_access = dl_access[np.lexsort((dl_access[:, 1], dl_access[:, 0]))]
    ul_backhaul = np.argwhere(bh_ul)
    dl_backhaul = np.argwhere(bh_dl)

    cap_bps = np.concatenate([
        links.cap_ub[ul_access[:, 0], ul_access[:, 1]] if ul_access.size else [],
        links.cap_bu[dl_access[:, 0], dl_access[:, 1]] if dl_access.size else [],
        links.cap_bb[ul_backhaul[:, 0], ul_backhaul[:, 1]] if ul_backhaul.size else [],
        links.cap_bb[dl_backhaul[:, 0], dl_backhaul[:, 1]] if dl_backhaul.size else [],
    ]).astype(float)
    if cap_bps.size == 0 or cap_bps.max() <= 0:
        raise InfeasibleProblemError("no usable link capacity")
    scale = float(cap_bps.max())
    cap = cap_bps / scale
    fiber_norm = cfg.fiber_capacity_bps / scale

    nf = cap.size
    nm = len(m_vars)
    n = 2 * nf + nm
    na, nd = ul_access.shape[0], dl_access.shape[0]
    nbu = ul_backhaul.shape[0]

    def f_idx(k):
        return k

    def t_idx(k):
        return nf + k

    def m_idx(k):
        return 2 * nf + k

    # --- inequalities -----------------------------------------------------
    rows, cols, vals, h = [], [], [], []
    row = 0
    cap_start = row
    for k in range(nf):
        rows += [row, row]
        cols += [f_idx(k), t_idx(k)]
        vals += [1.0, -cap[k]]
        h.append(0.0)
        row += 1
    cap_stop = row

    # per-BS incident time variables
    incident = [[] for _ in range(B)]
    for k, (u, b) in enumerate(ul_access):
        incident[b].append(t_idx(k))
    for k, (b, u) in enumerate(dl_access):
        incident[b].append(t_idx(na + k))
    for k, (i, j) in enumerate(ul_backhaul):
        incident[i].append(t_idx(na + nd + k))
        incident[j].append(t_idx(na + nd + k))
    for k, (i, j) in enumerate(dl_backhaul):
        incident[i].append(t_idx(na + nd + nbu + k))
        incident[j].append(t_idx(na + nd + nbu + k))

    res_start = row
    resource_bs = []
    for b in range(B):
        if not incident[b]:
            continue
        for c in incident[b]:
            rows.append(row)
            cols.append(c)
            vals.append(1.0)
        h.append(1.0)
        resource_bs.append(b)
        row += 1
    res_stop = row

    fib_start = row
    fiber_bs = []
    by_bs = {}
    for k, (bs, _d) in enumerate(m_vars):
        by_bs.setdefault(bs, []).append(m_idx(k))
    for bs in sorted(by_bs):
        for c in by_bs[bs]:
            rows.append(row)
            cols.append(c)
            vals.append(1.0)
        h.append(fiber_norm)
        fiber_bs.append(bs)
        row += 1
    fib_stop = row

    nn_start = row
    for k in range(n):
        rows.append(row)
        cols.append(k)
        vals.append(-1.0)
        h.append(0.0)
        row += 1
    nn_stop = row

    G = sp.csr_matrix((vals, (rows, cols)), shape=(row, n))
    h = np.asarray(h)
    row_slices = {
        "flow_capacity": slice(cap_start, cap_stop),
        "resource": slice(res_start, res_stop),
        "fiber": slice(fib_start, fib_stop),
        "nonneg": slice(nn_start, nn_stop),
    }

    # --- equalities: flow conservation per BS and direction ---------------
    erows, ecols, evals, eq_labels = [], [], [], []
    m_lookup = {(bs, d): m_idx(k) for k, (bs, d) in enumerate(m_vars)}
    er = 0
    for b in range(B):
        # DL: access out + backhaul out - backhaul in - M_b^D = 0
        entries = []
        for k, (bb, u) in enumerate(dl_access):
            if bb == b:
                entries.append((f_idx(na + k), 1.0))
        for k, (i, j) in enumerate(dl_backhaul):
            if i == b:
                entries.append((f_idx(na + nd + nbu + k), 1.0))
            if j == b:
                entries.append((f_idx(na + nd + nbu + k), -1.0))
        if (b, "D") in m_lookup:
            entries.append((m_lookup[(b, "D")], -1.0))
        if entries:
            for c, v in entries:
                erows.append(er)
                ecols.append(c)
                evals.append(v)
            eq_labels.append((b, "D"))
            er += 1
        # UL: access in + backhaul in - backhaul out - M_b^U = 0
        entries = []
        for k, (u, bb) in enumerate(ul_access):
            if bb == b:
                entries.append((f_idx(k), 1.0))
        for k, (i, j) in enumerate(ul_backhaul):
            if j == b:
                entries.append((f_idx(na + nd + k), 1.0))
            if i == b:
                entries.append((f_idx(na + nd + k), -1.0))
        if (b, "U") in m_lookup:
            entries.append((m_lookup[(b, "U")], -1.0))
        if entries:
            for c, v in entries:
                erows.append(er)
                ecols.append(c)
                evals.append(v)
            eq_labels.append((b, "U"))
            er += 1
    A = sp.csr_matrix((evals, (erows, ecols)), shape=(er, n))
    A, eq_labels = _drop_dependent_rows(A, eq_labels)

    # --- objective aggregation --------------------------------------------
    ue_ids = np.flatnonzero(included)
    pos = {int(u): k for k, u in enumerate(ue_ids)}
    urows, ucols = [], []
    for k, (u, b) in enumerate(ul_access):
        urows.append(pos[int(u)])
        ucols.append(f_idx(k))
    for k, (b, u) in enumerate(dl_access):
        urows.append(len(ue_ids) + pos[int(u)])
        ucols.append(f_idx(na + k))
    U_mat = sp.csr_matrix((np.ones(len(urows)), (urows, ucols)),
                          shape=(2 * len(ue_ids), n))

    return RateProblem(
        n_bs=B, n_ue=U, anchors_y=y.copy(),
        ul_access=ul_access, dl_access=dl_access,
        ul_backhaul=ul_backhaul, dl_backhaul=dl_backhaul,
        m_vars=m_vars, cap=cap, scale_bps=scale, fiber_norm=fiber_norm,
        G=G, h=h, A=A, eq_labels=eq_labels, U_mat=U_mat,
        ue_ids=ue_ids, excluded=excluded, row_slices=row_slices,
    )


def _drop_dependent_rows(A: sp.csr_matrix, labels: list):
    """Keep a maximal independent subset of the (homogeneous) equality rows."""
    if A.shape[0] == 0:
        return A, labels
    dense = A.toarray()
    _q, r, piv = scipy.linalg.qr(dense.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0:
        return A[:0], []
    rank = int(np.sum(diag > diag[0] * 1e-12))
    keep = np.sort(piv[:rank])
    return A[keep], [labels[i] for i in keep]


@dataclass
class ValidationReport:
    """Max violation per constraint family, in capacity-normalized units."""

    violations: dict
    tol: float

    @property
    def max_violation(self) -> float:
        return max(self.violations.values()) if self.violations else 0.0

    @property
    def ok(self) -> bool:
        return self.max_violation <= self.tol


def validate(problem: RateProblem, candidate, tol: float = 1e-8) -> ValidationReport:
    """Residual report for a candidate point (Solution or normalized vector).

    Since the problem is capacity-normalized, inequality violations are
    reported relative to max(1, |rhs|): a resource row with time fractions
    summing to 1.5 reports exactly 0.5.  Conservation rows (rhs 0) are
    normalized by the magnitude of the flows entering the row.
    """
    x = np.asarray(getattr(candidate, "x", candidate), dtype=float)
    if x.shape != (problem.n_var,):
        raise ValueError(f"candidate has shape {x.shape}, expected ({problem.n_var},)")

    viol = {}
    gx = problem.G @ x
    for family, slc in problem.row_slices.items():
        raw = gx[slc] - problem.h[slc]
        if raw.size == 0:
            viol[family] = 0.0
            continue
        denom = np.maximum(1.0, np.abs(problem.h[slc]))
        viol[family] = float(np.maximum(raw / denom, 0.0).max())

    if problem.A.shape[0]:
        ax = problem.A @ x
        denom = np.maximum(1.0, np.abs(problem.A) @ np.abs(x))
        resid = np.abs(ax) / denom
        dl = [k for k, (_b, d) in enumerate(problem.eq_labels) if d == "D"]
        ul = [k for k, (_b, d) in enumerate(problem.eq_labels) if d == "U"]
        viol["conservation_dl"] = float(resid[dl].max()) if dl else 0.0
        viol["conservation_ul"] = float(resid[ul].max()) if ul else 0.0
    else:
        viol["conservation_dl"] = viol["conservation_ul"] = 0.0

    return ValidationReport(violations=viol, tol=tol)
