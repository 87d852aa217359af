"""Empirical Nash-inequality verification: gain sweeps, exact best-deviation
searches, and admissibility classification.

Two opponent models are supported, mirroring the two equilibrium notions:

* feedback opponent -- the other player reacts to the realized state through a
  fixed gain.  A deviation gain is admissible iff the joint closed loop is
  strictly stable; admissible costs are exact (one Lyapunov solve).
* open-loop opponent -- the other player replays a fixed input sequence
  regardless of the state.  A deviation gain is admissible iff the rollout
  cost stays finite and the state has converged at the decay horizon.

The exact best deviations come from the Riccati machinery: against a feedback
opponent the continuum optimum is a single-player Riccati problem; against an
open-loop opponent it is the affine problem with w(k) = B_j u_j(k).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .affine_oc import AffineOCProblem, AffineOCSolution, solve_affine_oc
from .errors import EmptyGrid, UnstableClosedLoop
from .fne import best_response
from .game_model import GameDefinition
from .riccati import DareOptions, DareSolution, solve_dlyap

#: admissibility thresholds for open-loop-opponent sweeps
_COST_CEILING = 1e12
_STATE_DECAY_FACTOR = 1e-6


@dataclass(frozen=True)
class OpponentFeedback:
    """Opponent plays u_j(k) = K x(k)."""
    gain: np.ndarray


@dataclass(frozen=True)
class OpponentOpenLoop:
    """Opponent replays a fixed input sequence (zero beyond its support)."""
    inputs: np.ndarray


@dataclass
class SweepResult:
    player: int
    opponent_mode: str
    grid: list
    costs: np.ndarray
    admissible: np.ndarray
    argmin_gain: np.ndarray
    reference_gain: np.ndarray | None = None
    gap: float | None = None
    x0: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)


def _feedback_cost(game, player, K_dev, K_other, x0):
    """Exact cost of the deviating player, +inf when not stabilizing."""
    if player == 1:
        A_cl = game.A + game.B1 @ K_dev + game.B2 @ K_other
        Q, R = game.Q1, game.R1
    else:
        A_cl = game.A + game.B1 @ K_other + game.B2 @ K_dev
        Q, R = game.Q2, game.R2
    rho = float(np.max(np.abs(np.linalg.eigvals(A_cl))))
    if rho >= 1.0 - 1e-8:
        return np.inf
    P = solve_dlyap(A_cl, Q + K_dev.T @ R @ K_dev)
    return 0.5 * float(x0 @ P @ x0)


def _openloop_cost(game, player, K_dev, u_other, x0):
    """Converged truncated rollout of x+ = (A + B_i K)x + B_j u_j(k).

    Admissible iff the accumulated cost stays below 1e12 and the state at the
    decay horizon satisfies ||x(T)|| <= 1e-6 ||x0||; then the exact Lyapunov
    tail is added.  Returns +inf otherwise."""
    B_i = game.B(player)
    B_j = game.B(2 if player == 1 else 1)
    Q, R = game.Q(player), game.R(player)
    A_K = game.A + B_i @ K_dev
    rho = float(np.max(np.abs(np.linalg.eigvals(A_K))))

    cum = 0.0
    x = x0.copy()
    for k in range(len(u_other)):
        u = K_dev @ x
        cum += 0.5 * float(x @ Q @ x + u @ R @ u)
        x = A_K @ x + B_j @ u_other[k]
        if not np.isfinite(cum) or cum > _COST_CEILING:
            return np.inf

    if rho < 1.0 - 1e-8:
        # forcing has ended: free phase handled exactly
        T_free = int(min(np.ceil(np.log(1e-9) / np.log(max(rho, 1e-12))), 100_000))
        x_T = np.linalg.matrix_power(A_K, T_free) @ x
        tail = 0.5 * float(x @ solve_dlyap(A_K, Q + K_dev.T @ R @ K_dev) @ x)
        total = cum + tail
    else:
        x_T = x
        for _ in range(200):
            u = K_dev @ x_T
            cum += 0.5 * float(x_T @ Q @ x_T + u @ R @ u)
            if not np.isfinite(cum) or cum > _COST_CEILING:
                return np.inf
            x_T = A_K @ x_T
        total = cum
    x0_norm = float(np.linalg.norm(x0))
    if total > _COST_CEILING or np.linalg.norm(x_T) > _STATE_DECAY_FACTOR * x0_norm:
        return np.inf
    return total


def sweep_gain(game: GameDefinition, player: int, opponent, grid, x0,
               reference_gain=None) -> SweepResult:
    """Evaluate the deviating player's cost over a grid of feedback gains.

    ``opponent`` is an OpponentFeedback or OpponentOpenLoop; inadmissible
    grid points get cost +inf.  ``reference_gain`` (e.g. the equilibrium gain
    under test) is evaluated the same way and reported via ``gap`` =
    cost(reference) - cost(argmin).
    """
    if player not in (1, 2):
        raise ValueError("player must be 1 or 2")
    m_i = game.m1 if player == 1 else game.m2
    gains = [np.atleast_2d(np.asarray(g, dtype=float)).reshape(m_i, game.n) for g in grid]
    if not gains:
        raise EmptyGrid("sweep requested with an empty gain grid")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))

    if isinstance(opponent, OpponentFeedback):
        mode = "feedback"
        m_j = game.m2 if player == 1 else game.m1
        K_other = np.atleast_2d(np.asarray(opponent.gain, dtype=float)).reshape(m_j, game.n)
        evaluate = lambda K: _feedback_cost(game, player, K, K_other, x0)
    elif isinstance(opponent, OpponentOpenLoop):
        mode = "openloop"
        m_j = game.m2 if player == 1 else game.m1
        u_other = np.asarray(opponent.inputs, dtype=float).reshape(-1, m_j)
        evaluate = lambda K: _openloop_cost(game, player, K, u_other, x0)
    else:
        raise TypeError(f"unsupported opponent mode: {type(opponent).__name__}")

    costs = np.array([evaluate(K) for K in gains])
    admissible = np.isfinite(costs)
    best = int(np.argmin(costs))
    ref = None
    gap = None
    if reference_gain is not None:
        ref = np.atleast_2d(np.asarray(reference_gain, dtype=float)).reshape(m_i, game.n)
        gap = float(evaluate(ref) - costs[best])
    return SweepResult(
        player=player,
        opponent_mode=mode,
        grid=gains,
        costs=costs,
        admissible=admissible,
        argmin_gain=gains[best],
        reference_gain=ref,
        gap=gap,
        x0=x0,
    )


def best_feedback_deviation(game: GameDefinition, player: int, K_other,
                            opts: DareOptions | None = None) -> DareSolution:
    """Exact continuum-optimal feedback deviation (not grid-limited)."""
    return best_response(game, player, K_other, opts)


def best_openloop_deviation(game: GameDefinition, player: int, u_other_seq,
                            x0) -> AffineOCSolution:
    """Exact optimal open-loop deviation against a fixed opponent sequence.

    The opponent's (finite-support) inputs act through w(k) = B_j u_j(k);
    the returned solution carries the optimal cost, and its rollouts yield
    the optimal deviation input sequence."""
    other = 2 if player == 1 else 1
    u_other = np.asarray(u_other_seq, dtype=float).reshape(-1, game.B(other).shape[1])
    w = u_other @ game.B(other).T
    problem = AffineOCProblem(
        A=game.A, B=game.B(player), Q=game.Q(player), R=game.R(player),
        w=w, x0=np.atleast_1d(np.asarray(x0, dtype=float)),
    )
    return solve_affine_oc(problem)


@dataclass(frozen=True)
class InequalityCheck:
    player: int
    kind: str          # "feedback" or "openloop"
    holds: bool
    equilibrium_cost: float
    deviation_cost: float
    improvement: float  # equilibrium_cost - deviation_cost (>= 0 means deviation helps)


def certify_fne(game: GameDefinition, K1, K2, x0, tol: float = 1e-8) -> list[InequalityCheck]:
    """Check both feedback Nash inequalities for a candidate gain pair by
    solving each player's exact best response against the other's gain."""
    K1 = np.atleast_2d(np.asarray(K1, dtype=float))
    K2 = np.atleast_2d(np.asarray(K2, dtype=float))
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    checks = []
    for player, K_self, K_other in ((1, K1, K2), (2, K2, K1)):
        ref_cost = _feedback_cost(game, player, K_self, K_other, x0)
        if not np.isfinite(ref_cost):
            raise UnstableClosedLoop("candidate gains do not stabilize the closed loop")
        dev = best_feedback_deviation(game, player, K_other)
        dev_cost = 0.5 * float(x0 @ dev.P @ x0)
        improvement = ref_cost - dev_cost
        checks.append(InequalityCheck(
            player=player, kind="feedback",
            holds=bool(improvement <= tol * max(1.0, abs(ref_cost))),
            equilibrium_cost=ref_cost, deviation_cost=dev_cost,
            improvement=improvement,
        ))
    return checks


def certify_olne(game: GameDefinition, K1, K2, x0, tol_rel: float = 1e-5,
                 horizon: int | None = None) -> list[InequalityCheck]:
    """Check both open-loop Nash inequalities for a feedback-synthesis gain
    pair: each player's exact affine-problem optimum against the opponent's
    replayed equilibrium sequence must not beat the equilibrium cost."""
    K1 = np.atleast_2d(np.asarray(K1, dtype=float))
    K2 = np.atleast_2d(np.asarray(K2, dtype=float))
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    A_cl = game.A + game.B1 @ K1 + game.B2 @ K2
    rho = float(np.max(np.abs(np.linalg.eigvals(A_cl))))
    if rho >= 1.0 - 1e-8:
        raise UnstableClosedLoop("candidate gains do not stabilize the closed loop")
    if horizon is None:
        horizon = int(min(max(np.ceil(np.log(1e-10) / np.log(max(rho, 1e-12))), 20), 2000))

    # equilibrium input sequences, truncated at the decay horizon
    x = x0.copy()
    u1 = np.zeros((horizon, game.m1))
    u2 = np.zeros((horizon, game.m2))
    for k in range(horizon):
        u1[k] = K1 @ x
        u2[k] = K2 @ x
        x = A_cl @ x

    checks = []
    for player, K_self, u_other in ((1, K1, u2), (2, K2, u1)):
        eq_cost = _feedback_cost(game, player, K_self,
                                 K2 if player == 1 else K1, x0)
        dev = best_openloop_deviation(game, player, u_other, x0)
        improvement = eq_cost - dev.optimal_cost
        checks.append(InequalityCheck(
            player=player, kind="openloop",
            holds=bool(improvement <= tol_rel * max(1.0, abs(eq_cost))),
            equilibrium_cost=eq_cost, deviation_cost=dev.optimal_cost,
            improvement=improvement,
        ))
    return checks


def write_sweep_csv(result: SweepResult, path) -> None:
    """Columns gain_1..gain_p, cost, admissible; metadata comment header."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# player={result.player}\n")
        fh.write(f"# mode={result.opponent_mode}\n")
        if result.x0 is not None:
            fh.write(f"# x0={','.join(repr(float(v)) for v in result.x0)}\n")
        if result.reference_gain is not None:
            flat = ",".join(repr(float(v)) for v in result.reference_gain.ravel())
            fh.write(f"# reference_gain={flat}\n")
        if result.gap is not None:
            fh.write(f"# gap={result.gap!r}\n")
        p = result.grid[0].size
        fh.write(",".join([f"gain_{i+1}" for i in range(p)] + ["cost", "admissible"]) + "\n")
        for K, cost, adm in zip(result.grid, result.costs, result.admissible):
            cells = [repr(float(v)) for v in K.ravel()]
            cells.append(repr(float(cost)) if np.isfinite(cost) else "inf")
            cells.append("1" if adm else "0")
            fh.write(",".join(cells) + "\n")
