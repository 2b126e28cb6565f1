"""Stationary states and energy-Casimir stability for a semi-relativistic
Schrödinger-Poisson system in a Dirichlet box."""

__version__ = "0.1.0"

from .casimir import (
    Boltzmann,
    CasimirDistribution,
    CasimirReport,
    PowerCutoff,
    distribution_from_dict,
    f_star_bruteforce,
    validate_casimir,
)
from .evolution import EvolutionConfig, EvolutionError, TrajectoryRecord, evolve, mild_residual, strang_step
from .experiments import ExperimentPlan, StabilityReport, VerificationReport, run_lemma_suite, run_stability
from .spectral import (
    DomainMismatchError,
    DomainSpec,
    ModeField,
    eigendecompose,
    from_grid,
    hamiltonian_matrix,
    hminus1_norm,
    laplacian_spectrum,
    poisson_solve,
    to_grid,
)
from .state import (
    MixedState,
    casimir_energy,
    density,
    energy,
    gram_schmidt,
    perturb,
    random_state,
)
from .stationary import (
    ConvergenceError,
    SolverConfig,
    StationarySolution,
    duality_check,
    trace_bound,
    phi_eval,
    scf_solve,
    sigma_solve,
)
