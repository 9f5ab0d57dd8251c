"""Restoration planning for damaged radial distribution feeders with DERs.

Builds a mixed-integer linear program that assigns critical loads to
DERs and energizes one radial subtree per DER, solves it with an
embedded branch-and-bound (or exchanges MPS files), and validates plans
with exact power flow, radiality audits and reliability metrics.
"""

__version__ = "0.1.0"

from .bnb import MilpSolution, SolveOptions, solve_milp
from .feeder import (
    DerUnit,
    EdgeRecord,
    FeederError,
    FeederGraph,
    NodeRecord,
    ScenarioConfig,
    apply_scenario,
    parse_feeder,
    parse_scenario,
    serialize_feeder,
    validate_feeder,
)
from .lp import KERNEL_IMPL, solve_lp
from .model import MilpModel, ModelError, build_model, compute_t_net
from .mps import export_mps, import_solution, read_mps, write_solution
from .plan import PlanError, RestorationPlan, extract_plan, plan_from_json, plan_to_json
from .topology import build_path_catalog, enumerate_paths, find_loops, orient
from .verify import (
    VerificationReport,
    audit_radiality,
    brute_force_restore,
    monte_carlo_survival,
    sweep_powerflow,
    verify_plan,
)

__all__ = [
    "__version__",
    "MilpSolution",
    "SolveOptions",
    "solve_milp",
    "DerUnit",
    "EdgeRecord",
    "FeederError",
    "FeederGraph",
    "NodeRecord",
    "ScenarioConfig",
    "apply_scenario",
    "parse_feeder",
    "parse_scenario",
    "serialize_feeder",
    "validate_feeder",
    "KERNEL_IMPL",
    "solve_lp",
    "MilpModel",
    "ModelError",
    "build_model",
    "compute_t_net",
    "export_mps",
    "import_solution",
    "read_mps",
    "write_solution",
    "PlanError",
    "RestorationPlan",
    "extract_plan",
    "plan_from_json",
    "plan_to_json",
    "build_path_catalog",
    "enumerate_paths",
    "find_loops",
    "orient",
    "VerificationReport",
    "audit_radiality",
    "brute_force_restore",
    "monte_carlo_survival",
    "sweep_powerflow",
    "verify_plan",
]
