"""Data-driven safety verification of stochastic systems via scenario barrier certificates."""

from .bounds import (
    SampleComplexityInputs,
    empirical_count,
    lipschitz_linear,
    lipschitz_quadratic,
    minimal_scenario_count,
    variance_bound_additive_1d,
)
from .core import (
    BarrierCertificate,
    InputError,
    MonomialBasis,
    Region,
    Verdict,
    VerdictStatus,
    VerificationProblem,
    decision_rule,
    evaluate_barrier,
    monomial_features,
    region_contains,
)
from .lp import LpSolution, most_violated, solve
from .sampling import (
    ScenarioDataset,
    build_dataset,
    collect_successors,
    draw_states,
    empirical_successor_features,
    load_dataset,
)
from .scp import ConstraintSystem, assemble, evaluate_constraints
from .systems import (
    BlackBoxSystem,
    LinearSystem,
    PluginProtocolError,
    PluginSystem,
    RoomTemperatureSystem,
    controller_output,
)
from .verify import (
    AuditTable,
    VerificationReport,
    audit_certificate,
    run_verification,
    safety_probability_bound,
)

__version__ = "0.1.0"

__all__ = [
    "AuditTable",
    "BarrierCertificate",
    "BlackBoxSystem",
    "ConstraintSystem",
    "InputError",
    "LinearSystem",
    "LpSolution",
    "MonomialBasis",
    "PluginProtocolError",
    "PluginSystem",
    "Region",
    "RoomTemperatureSystem",
    "SampleComplexityInputs",
    "ScenarioDataset",
    "Verdict",
    "VerdictStatus",
    "VerificationProblem",
    "VerificationReport",
    "assemble",
    "audit_certificate",
    "build_dataset",
    "collect_successors",
    "controller_output",
    "decision_rule",
    "draw_states",
    "empirical_count",
    "empirical_successor_features",
    "evaluate_barrier",
    "evaluate_constraints",
    "lipschitz_linear",
    "lipschitz_quadratic",
    "load_dataset",
    "minimal_scenario_count",
    "monomial_features",
    "most_violated",
    "region_contains",
    "run_verification",
    "safety_probability_bound",
    "solve",
    "variance_bound_additive_1d",
]
