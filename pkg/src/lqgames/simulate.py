"""Deterministic rollouts and exact infinite-horizon cost evaluation.

Costs follow the game convention: stage cost of player i at time k is
1/2 (x(k)'Q_i x(k) + u_i(k)'R_i u_i(k)), accumulated over k = 0..T-1.  For
stabilizing feedback gains the exact infinite-horizon cost matrices come from
one discrete Lyapunov solve each, which also yields exact tail values for
truncated rollouts.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import UnstableClosedLoop
from .game_model import GameDefinition
from .riccati import solve_dlyap

#: rollouts are truncated (and flagged) once the state norm passes this guard
OVERFLOW_GUARD = 1e150
#: hard cap on automatically chosen horizons
MAX_HORIZON = 1_000_000


@dataclass
class Trajectory:
    """Time-indexed rollout data.

    ``states`` has T+1 rows, input/stage-cost arrays have T rows.  Costates
    are present only for rollouts that carry adjoint variables.  ``tail_bound``
    bounds the cost omitted by truncation (+inf when the closed loop cannot be
    certified stable); ``tail_costs`` holds the per-player exact Lyapunov
    tails when available.
    """

    states: np.ndarray
    inputs1: np.ndarray
    inputs2: np.ndarray
    stage_costs1: np.ndarray
    stage_costs2: np.ndarray
    cumulative1: float
    cumulative2: float
    tail_bound: float
    tail_costs: tuple[float, float] | None = None
    costates1: np.ndarray | None = None
    costates2: np.ndarray | None = None
    diverged: bool = False

    @property
    def horizon(self) -> int:
        return len(self.states) - 1


def default_horizon(rho: float, x0_norm: float, floor: int = 8) -> int:
    """Smallest T with rho^(2T) * ||x0||^2 below 1e-12, capped."""
    if rho >= 1.0:
        return 200
    if rho <= 0.0:
        return max(floor, 2)
    target = 1e-12 / max(x0_norm**2, 1e-30)
    if target >= 1.0:
        return floor
    T = int(np.ceil(np.log(target) / (2.0 * np.log(rho))))
    return int(min(max(T, floor), MAX_HORIZON))


def _stage_cost(Q, R, x, u) -> float:
    return 0.5 * float(x @ Q @ x + u @ R @ u)


def rollout_feedback(game: GameDefinition, K1, K2, x0, T: int | None = None) -> Trajectory:
    """Simulate u_i(k) = K_i x(k).  Divergent rollouts are returned truncated
    with ``diverged=True`` and an infinite tail bound, never raised."""
    K1 = np.atleast_2d(np.asarray(K1, dtype=float))
    K2 = np.atleast_2d(np.asarray(K2, dtype=float))
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    A_cl = game.A + game.B1 @ K1 + game.B2 @ K2
    rho = float(np.max(np.abs(np.linalg.eigvals(A_cl))))
    if T is None:
        T = default_horizon(rho, float(np.linalg.norm(x0)))

    states = [x0]
    u1s, u2s, c1s, c2s = [], [], [], []
    diverged = False
    for _ in range(T):
        x = states[-1]
        u1 = K1 @ x
        u2 = K2 @ x
        u1s.append(u1)
        u2s.append(u2)
        c1s.append(_stage_cost(game.Q1, game.R1, x, u1))
        c2s.append(_stage_cost(game.Q2, game.R2, x, u2))
        x_next = A_cl @ x
        if np.linalg.norm(x_next) > OVERFLOW_GUARD:
            diverged = True
            states.append(x_next)
            break
        states.append(x_next)

    tail_costs = None
    tail_bound = np.inf
    if not diverged and rho < 1.0 - 1e-8:
        P1t, P2t = eval_cost_feedback(game, K1, K2)
        xT = states[-1]
        tail_costs = (0.5 * float(xT @ P1t @ xT), 0.5 * float(xT @ P2t @ xT))
        tail_bound = max(tail_costs)
    return Trajectory(
        states=np.array(states),
        inputs1=np.array(u1s).reshape(len(u1s), game.m1),
        inputs2=np.array(u2s).reshape(len(u2s), game.m2),
        stage_costs1=np.array(c1s),
        stage_costs2=np.array(c2s),
        cumulative1=float(np.sum(c1s)),
        cumulative2=float(np.sum(c2s)),
        tail_bound=float(tail_bound),
        tail_costs=tail_costs,
        diverged=diverged,
    )


def eval_cost_feedback(game: GameDefinition, K1, K2) -> tuple[np.ndarray, np.ndarray]:
    """Exact infinite-horizon cost matrices for stabilizing gains.

    Returns (P1, P2) with J_i(x0) = 1/2 x0'P_i x0, each solving the Lyapunov
    equation P = (Q_i + K_i'R_i K_i) + A_cl' P A_cl.
    """
    K1 = np.atleast_2d(np.asarray(K1, dtype=float))
    K2 = np.atleast_2d(np.asarray(K2, dtype=float))
    A_cl = game.A + game.B1 @ K1 + game.B2 @ K2
    rho = float(np.max(np.abs(np.linalg.eigvals(A_cl))))
    if rho >= 1.0 - 1e-8:
        raise UnstableClosedLoop(f"closed-loop spectral radius {rho:.9f}")
    P1 = solve_dlyap(A_cl, game.Q1 + K1.T @ game.R1 @ K1)
    P2 = solve_dlyap(A_cl, game.Q2 + K2.T @ game.R2 @ K2)
    return P1, P2


def rollout_openloop(game: GameDefinition, u1_seq, u2_seq, x0, T: int) -> Trajectory:
    """Simulate fixed input sequences (zero-extended beyond their support)."""
    u1_seq = np.asarray(u1_seq, dtype=float).reshape(-1, game.m1)
    u2_seq = np.asarray(u2_seq, dtype=float).reshape(-1, game.m2)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))

    def u_at(seq, k, m):
        return seq[k] if k < len(seq) else np.zeros(m)

    states = [x0]
    u1s, u2s, c1s, c2s = [], [], [], []
    diverged = False
    for k in range(T):
        x = states[-1]
        u1 = u_at(u1_seq, k, game.m1)
        u2 = u_at(u2_seq, k, game.m2)
        u1s.append(u1)
        u2s.append(u2)
        c1s.append(_stage_cost(game.Q1, game.R1, x, u1))
        c2s.append(_stage_cost(game.Q2, game.R2, x, u2))
        x_next = game.A @ x + game.B1 @ u1 + game.B2 @ u2
        states.append(x_next)
        if np.linalg.norm(x_next) > OVERFLOW_GUARD:
            diverged = True
            break

    # tail under zero future input: exact Lyapunov value when A itself is stable
    tail_costs = None
    tail_bound = np.inf
    rho_A = float(np.max(np.abs(np.linalg.eigvals(game.A))))
    if not diverged and rho_A < 1.0 - 1e-8:
        xT = states[-1]
        P1t = solve_dlyap(game.A, game.Q1)
        P2t = solve_dlyap(game.A, game.Q2)
        tail_costs = (0.5 * float(xT @ P1t @ xT), 0.5 * float(xT @ P2t @ xT))
        tail_bound = max(tail_costs)
    return Trajectory(
        states=np.array(states),
        inputs1=np.array(u1s).reshape(len(u1s), game.m1),
        inputs2=np.array(u2s).reshape(len(u2s), game.m2),
        stage_costs1=np.array(c1s),
        stage_costs2=np.array(c2s),
        cumulative1=float(np.sum(c1s)),
        cumulative2=float(np.sum(c2s)),
        tail_bound=float(tail_bound),
        tail_costs=tail_costs,
        diverged=diverged,
    )


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Columns: k, x_*, u1_*, u2_*, cost1, cost2, cum1, cum2 and lambda columns
    when costates are present.  The final row carries the terminal state only."""
    n = traj.states.shape[1]
    m1 = traj.inputs1.shape[1]
    m2 = traj.inputs2.shape[1]
    header = (["k"]
              + [f"x_{i+1}" for i in range(n)]
              + [f"u1_{i+1}" for i in range(m1)]
              + [f"u2_{i+1}" for i in range(m2)]
              + ["cost1", "cost2", "cum1", "cum2"])
    if traj.costates1 is not None:
        header += [f"lambda1_{i+1}" for i in range(n)]
    if traj.costates2 is not None:
        header += [f"lambda2_{i+1}" for i in range(n)]
    T = len(traj.inputs1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        cum1 = cum2 = 0.0
        for k in range(len(traj.states)):
            row = [str(k)] + [repr(float(v)) for v in traj.states[k]]
            if k < T:
                cum1 += float(traj.stage_costs1[k])
                cum2 += float(traj.stage_costs2[k])
                row += [repr(float(v)) for v in traj.inputs1[k]]
                row += [repr(float(v)) for v in traj.inputs2[k]]
                row += [repr(float(traj.stage_costs1[k])), repr(float(traj.stage_costs2[k])),
                        repr(cum1), repr(cum2)]
            else:
                row += [""] * (m1 + m2 + 4)
            if traj.costates1 is not None:
                row += [repr(float(v)) for v in traj.costates1[k]]
            if traj.costates2 is not None:
                row += [repr(float(v)) for v in traj.costates2[k]]
            writer.writerow(row)
