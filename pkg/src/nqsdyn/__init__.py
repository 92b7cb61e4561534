"""Quench dynamics of small spin-1/2 systems with an RBM wave function
evolved by the time-dependent variational principle, cross-validated
against exact diagonalization."""

from .errors import (
    CapacityLimitError,
    ConfigError,
    DegenerateGradientError,
    NonFiniteError,
    NumericFailure,
    ShapeMismatchError,
)
from .lattice import (
    DENSE_CAP,
    ExactPropagator,
    QuenchPair,
    SpinBasis,
    SpinHamiltonian,
    apply_hamiltonian_row,
    dense_matrix,
    exact_evolve,
    ground_state,
    heisenberg_chain,
    tfim_chain,
)
from .rbm import (
    RbmParameters,
    dense_state,
    init_random,
    load_snapshot,
    log_amplitude,
    log_amplitudes,
    log_derivatives,
    log_derivatives_batch,
    save_snapshot,
)
from .expectation import (
    SampleSet,
    TdvpProblem,
    exact_qgt_force,
    expectation_observable,
    local_energy,
    mc_qgt_force,
    metropolis_sample,
)
from .solvers import (
    Diagonalization,
    Geometric,
    Regularization,
    SolverReport,
    SolverStrategy,
    build_geometric_system,
    solve,
    solve_diagonalized,
    solve_geometric,
    solve_regularized,
)
from .integrators import (
    EstimatorParams,
    IntegratorConfig,
    SamplerParams,
    Scheme,
    Trajectory,
    TrajectoryRecord,
    euler_step,
    heun_step,
    run_dynamics,
    tamed_euler_step,
    tamed_heun_step,
)
from .prep import PrepConfig, PrepResult, infidelity, infidelity_gradient, optimize_infidelity
from .config import ExperimentConfig, parse_config
from .experiment import emit_trajectory_csv, run_experiment

__version__ = "0.1.0"
