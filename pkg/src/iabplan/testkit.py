"""Small hand-built instances with known structure, for verification.

Capacities are specified directly in bps and converted back to gains through
the inverse of the budget chain, so the instances exercise the same build
path as real runs.  Under the default budget a link exists only above
~1 Gbps, so toy capacities stay in the 1.2..9.5 Gbps range (the effective
SNR ceiling caps links near 9.97 Gbps).
"""

from __future__ import annotations

import numpy as np

from .connectivity import Variant, make_scenario
from .geometry import AnchorSet
from .linkbudget import BudgetConfig, Gains, LinkTable, build_link_table, link_snr
from .problem import RateProblem, assemble


def gain_for_capacity(cap_bps: float, direction: str, cfg: BudgetConfig) -> float:
    """Gain (dB) that produces the requested capacity under `cfg`."""
    eff = 2.0 ** (cap_bps / cfg.bandwidth_hz) - 1.0
    cap_lin = 10.0 ** (cfg.snr_cap_db / 10.0)
    if cfg.effective_snr_mode == "harmonic-mean":
        eff /= 2.0
    if not 0 < eff < cap_lin:
        raise ValueError(f"capacity {cap_bps:.3g} bps not reachable under the budget")
    snr_db = 10.0 * np.log10(1.0 / (1.0 / eff - 1.0 / cap_lin))
    if snr_db < cfg.min_snr_db:
        raise ValueError(f"capacity {cap_bps:.3g} bps implies a sub-threshold link")
    return float(snr_db - link_snr(0.0, direction, cfg))


def links_from_caps(cap_ub, cap_bu, cap_bb, cfg: BudgetConfig | None = None) -> LinkTable:
    """LinkTable with the given per-pair capacities (0 or None = absent)."""
    cfg = cfg or BudgetConfig()
    cap_ub = np.asarray(cap_ub, dtype=float)
    cap_bu = np.asarray(cap_bu, dtype=float)
    cap_bb = np.asarray(cap_bb, dtype=float)

    def to_gain(caps, direction):
        out = np.full(caps.shape, -np.inf)
        for idx in np.argwhere(caps > 0):
            out[tuple(idx)] = gain_for_capacity(caps[tuple(idx)], direction, cfg)
        return out

    gains = Gains(bb=to_gain(cap_bb, "bs-bs"), bu=to_gain(cap_bu, "bs-ue"),
                  ub=to_gain(cap_ub, "ue-bs"))
    return build_link_table(gains, cfg)


def analytic_single_instance(c_bps: float = 4e9):
    """One anchor BS serving one UE; optimum splits time evenly, GM = c/2."""
    links = links_from_caps([[c_bps]], [[c_bps]], [[0.0]])
    anchors = AnchorSet(np.array([True]))
    pattern = make_scenario(Variant.ACCESS_SS, links, anchors, seed=0)
    return assemble(links, pattern, anchors), c_bps


def analytic_chain_instance(c_access_bps: float = 3e9, c_backhaul_bps: float = 5e9):
    """Anchor -> relay -> UE chain; per-direction optimum is
    1 / (2 (1/c_access + 1/c_backhaul)), which also equals the GM."""
    cap_ub = [[0.0, c_access_bps]]          # UE0 -> BS1 only
    cap_bu = [[0.0], [c_access_bps]]        # BS1 -> UE0 only
    cap_bb = [[0.0, c_backhaul_bps], [c_backhaul_bps, 0.0]]
    links = links_from_caps(cap_ub, cap_bu, cap_bb)
    anchors = AnchorSet(np.array([True, False]))
    pattern = make_scenario(Variant.IAB_ST, links, anchors, seed=0)
    expected = 1.0 / (2.0 * (1.0 / c_access_bps + 1.0 / c_backhaul_bps))
    return assemble(links, pattern, anchors), expected


def random_tiny_instance(seed: int) -> RateProblem:
    """Seeded instance from one of five shapes, all with <= 6 time variables
    and unique anchor-to-UE routes (what the brute-force oracle requires)."""
    rng = np.random.default_rng(seed)

    def cap():
        return float(rng.uniform(1.3e9, 9.0e9))

    family = int(rng.integers(0, 5))
    if family == 0:    # one anchor, one UE (2 time vars)
        links = links_from_caps([[cap()]], [[cap()]], [[0.0]])
        anchors = AnchorSet(np.array([True]))
    elif family == 1:  # one anchor, two UEs (4 time vars)
        links = links_from_caps([[cap()], [cap()]], [[cap(), cap()]], [[0.0]])
        anchors = AnchorSet(np.array([True]))
    elif family in (2, 4):  # anchor -> relay, UE on the relay (6 time vars)
        c_bh = cap()
        links = links_from_caps([[0.0, cap()]], [[0.0], [cap()]],
                                [[0.0, c_bh], [c_bh, 0.0]])
        anchors = AnchorSet(np.array([True, False]))
    else:              # one anchor, three UEs (6 time vars)
        links = links_from_caps([[cap()], [cap()], [cap()]],
                                [[cap(), cap(), cap()]], [[0.0]])
        anchors = AnchorSet(np.array([True]))
    pattern = make_scenario(Variant.IAB_ST, links, anchors, seed=seed)
    return assemble(links, pattern, anchors)
