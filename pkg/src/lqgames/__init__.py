"""Solvers for infinite-horizon, discrete-time, two-player LQ dynamic games:
feedback Nash equilibria (coupled algebraic equations), open-loop Nash
equilibria (stable invariant subspace / asymmetric coupled Riccati equations),
the underlying affine-quadratic optimal control problem, and an empirical
Nash-inequality verification harness."""

from .affine_oc import (
    AffineOCProblem,
    AffineOCSolution,
    feedback_rollout,
    hamiltonian_rollout,
    optimal_input,
    solve_affine_oc,
    value_function,
)
from .errors import LqgError
from .fne import (
    FeedbackEquilibrium,
    FneOptions,
    best_response,
    equilibrium_value,
    fne_residuals,
    solve_fne,
)
from .game_model import (
    AssumptionReport,
    GameDefinition,
    Spectrum,
    spectrum,
    validate_game,
)
from .gamefile import load_affine_problem, load_game
from .olne import (
    HamiltonianSystem,
    OpenLoopEquilibrium,
    build_hamiltonian,
    olne_trajectory,
    openloop_inputs,
    solve_olne,
)
from .riccati import DareOptions, DareSolution, solve_dare, solve_dlyap
from .simulate import (
    Trajectory,
    eval_cost_feedback,
    rollout_feedback,
    rollout_openloop,
    write_trajectory_csv,
)
from .verify import (
    InequalityCheck,
    OpponentFeedback,
    OpponentOpenLoop,
    SweepResult,
    best_feedback_deviation,
    best_openloop_deviation,
    certify_fne,
    certify_olne,
    sweep_gain,
    write_sweep_csv,
)

__version__ = "0.1.0"
