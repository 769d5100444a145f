"""Dark and bright eigenstates of the XX central spin model via Richardson-Gaudin charges."""

from .errors import *  # noqa: F401,F403
from .model import (
    CoefficientSet,
    CouplingDistribution,
    DistributionKind,
    ModelParams,
    assemble_coefficients,
    build_model,
    field_from_angle,
    make_distribution,
    rescaled_coupling,
)
from .solver import (
    BranchTracker,
    ChargeSolution,
    Enumeration,
    ParentState,
    all_parents,
    check_solution,
    continue_in_g,
    enumerate_all_states,
    newton_polish,
    track,
)
from .observables import (
    Classification,
    FieldParameter,
    ObservableRecord,
    ObservableTracker,
    classify,
    effective_field,
    observables_along,
    observables_at,
    purity_factor,
)
from .ed import ChargeForm, build_charge, build_hamiltonian, ed_analysis, match_solutions, spin_operator
from .config import ScenarioConfig, parse_config
from .runner import reproduce_paper_figures, run_scenario

__version__ = "0.1.0"
