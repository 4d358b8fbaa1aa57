"""iabplan: planning toolkit for integrated access and backhaul networks.

Builds street-grid deployments, derives per-link capacities from a
millimeter-wave budget, wires the five access/backhaul connectivity
scenarios, maximizes the geometric mean of UE rates with a certified
log-barrier solver, and produces the comparison artifacts (rate CDFs,
GM tables, fiber-drop sweeps, hop-count distributions).
"""

from .connectivity import (ConnectivityPattern, Variant, access_load_balanced,
                           access_signal_strength, backhaul_mesh,
                           backhaul_spanning_tree, make_scenario)
from .errors import (ConfigError, ConnectivityError, ConvergenceError,
                     DecompositionError, IabPlanError, InfeasibleProblemError,
                     IngestionError, MetricsError, OracleError)
from .geometry import AnchorSet, Topology, generate_grid, select_anchors
from .linkbudget import (BudgetConfig, Gains, LinkTable, build_link_table,
                         capacity, effective_snr, link_snr, load_gains_csv,
                         synth_gain, synthetic_gains)
from .metrics import (HopReport, RateReport, compare_table, fiber_sweep,
                      hop_counts, make_report, rate_cdf, sweep_summary,
                      sweep_to_csv, top_decile_mean)
from .oracle import OracleBracket, brute_force_oracle
from .problem import RateProblem, ValidationReport, assemble, validate
from .solver import (Certificate, KktReport, Solution, SolverConfig,
                     check_kkt, solve, strictly_feasible_point)

__version__ = "0.1.0"

__all__ = [
    "AnchorSet", "BudgetConfig", "Certificate", "ConfigError",
    "ConnectivityError", "ConnectivityPattern", "ConvergenceError",
    "DecompositionError", "Gains", "HopReport", "IabPlanError",
    "InfeasibleProblemError", "IngestionError", "KktReport", "LinkTable",
    "MetricsError", "OracleBracket", "OracleError", "RateProblem",
    "RateReport", "Solution", "SolverConfig", "Topology", "ValidationReport",
    "Variant", "access_load_balanced", "access_signal_strength", "assemble",
    "backhaul_mesh", "backhaul_spanning_tree", "brute_force_oracle",
    "build_link_table", "capacity", "check_kkt", "compare_table",
    "effective_snr", "fiber_sweep", "generate_grid", "hop_counts",
    "link_snr", "load_gains_csv", "make_report", "make_scenario", "rate_cdf",
    "select_anchors", "solve", "strictly_feasible_point", "sweep_summary",
    "sweep_to_csv", "synth_gain", "synthetic_gains", "top_decile_mean",
    "validate",
]
