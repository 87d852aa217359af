"""Feedback Nash equilibria via coupled algebraic matrix equations.

A gain pair (K1, K2) with value matrices (P1, P2) is a feedback equilibrium
iff the closed loop A + B1 K1 + B2 K2 is strictly stable, each P_i solves the
Lyapunov-type equation

    P_i = Q_i + K_i'R_i K_i + A_cl' P_i A_cl,

and the gains satisfy the stationarity system

    [R1 + B1'P1 B1   B1'P1 B2 ] [K1]     [B1'P1]
    [B2'P2 B1   R2 + B2'P2 B2 ] [K2] = - [B2'P2] A.

These are not Riccati equations (eliminating the gains makes them cubic in
P_i), so the solver runs a damped best-response iteration: each sweep fixes
one player's gain and solves the other player's single-player Riccati
problem.  Convergence is a fixed point, i.e. literally a pair of mutual best
responses within the linear feedback class.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    InternalContradiction,
    MSingular,
    NoConvergence,
    NotStabilizable,
    StabilityViolation,
)
from .game_model import GameDefinition, Spectrum, pbh_detectable, spectrum, validate_game
from .riccati import DareOptions, DareSolution, solve_dare, solve_dlyap


@dataclass
class FneOptions:
    initial_gains: tuple[np.ndarray, np.ndarray] | None = None
    damping: float = 1.0           # K <- (1-a) K_old + a K_new
    tol_fp: float = 1e-10          # gain-update fixed-point tolerance
    max_iters: int = 500
    tol_res: float = 1e-9          # accepted residual of the coupled equations
    dare: DareOptions = field(default_factory=DareOptions)


@dataclass(frozen=True)
class FeedbackEquilibrium:
    K1: np.ndarray
    K2: np.ndarray
    P1: np.ndarray
    P2: np.ndarray
    closed_loop_spectrum: Spectrum
    residuals: dict
    iterations: int


def best_response(game: GameDefinition, player: int, K_other,
                  opts: DareOptions | None = None) -> DareSolution:
    """Optimal single-player response when the opponent plays K_other.

    With u_j = K_other x frozen, player i faces the plain LQ problem on
    (A + B_j K_other, B_i, Q_i, R_i); the gain of the returned solution is the
    best response.
    """
    if player not in (1, 2):
        raise ValueError("player must be 1 or 2")
    other = 2 if player == 1 else 1
    K_other = np.atleast_2d(np.asarray(K_other, dtype=float))
    if K_other.shape != (game.B(other).shape[1], game.n):
        raise DimensionMismatch(
            f"opponent gain must be {game.B(other).shape[1]}x{game.n}, got {K_other.shape}"
        )
    A_mod = game.A + game.B(other) @ K_other
    return solve_dare(A_mod, game.B(player), game.Q(player), game.R(player), opts)


def _stationarity_system(game: GameDefinition, P1, P2):
    """(M, rhs) of the gain-stationarity equations M [K1; K2] = rhs."""
    B1, B2, A = game.B1, game.B2, game.A
    M = np.block([
        [game.R1 + B1.T @ P1 @ B1, B1.T @ P1 @ B2],
        [B2.T @ P2 @ B1, game.R2 + B2.T @ P2 @ B2],
    ])
    rhs = -np.vstack([B1.T @ P1, B2.T @ P2]) @ A
    return M, rhs


def fne_residuals(game: GameDefinition, K1, K2, P1, P2) -> dict:
    """Residuals of the coupled equations for an externally supplied candidate.

    Pure evaluation, no solving: Lyapunov residuals of the two value
    equations, the Frobenius norm of the stationarity defect, and the
    closed-loop spectral radius.
    """
    K1 = np.atleast_2d(np.asarray(K1, dtype=float))
    K2 = np.atleast_2d(np.asarray(K2, dtype=float))
    P1 = np.atleast_2d(np.asarray(P1, dtype=float))
    P2 = np.atleast_2d(np.asarray(P2, dtype=float))
    n = game.n
    if K1.shape != (game.m1, n) or K2.shape != (game.m2, n):
        raise DimensionMismatch("gain shapes inconsistent with the game")
    if P1.shape != (n, n) or P2.shape != (n, n):
        raise DimensionMismatch("value-matrix shapes inconsistent with the game")
    A_cl = game.A + game.B1 @ K1 + game.B2 @ K2
    lyap1 = np.linalg.norm(game.Q1 + K1.T @ game.R1 @ K1 + A_cl.T @ P1 @ A_cl - P1)
    lyap2 = np.linalg.norm(game.Q2 + K2.T @ game.R2 @ K2 + A_cl.T @ P2 @ A_cl - P2)
    M, rhs = _stationarity_system(game, P1, P2)
    stationarity = np.linalg.norm(M @ np.vstack([K1, K2]) - rhs)
    return {
        "lyap1": float(lyap1),
        "lyap2": float(lyap2),
        "stationarity": float(stationarity),
        "spectral_radius": float(np.max(np.abs(np.linalg.eigvals(A_cl)))),
    }


def _initial_gains(game: GameDefinition, opts: FneOptions):
    if opts.initial_gains is not None:
        K1 = np.atleast_2d(np.asarray(opts.initial_gains[0], dtype=float))
        K2 = np.atleast_2d(np.asarray(opts.initial_gains[1], dtype=float))
        return K1, K2
    K1 = np.zeros((game.m1, game.n))
    K2 = np.zeros((game.m2, game.n))
    if np.max(np.abs(np.linalg.eigvals(game.A))) >= 1.0:
        # LQR warm start for player 1 so the first best-response call sees a
        # stabilizable-and-detectable single-player problem
        K1 = solve_dare(game.A, game.B1, game.Q1, game.R1, opts.dare).K
    return K1, K2


def solve_fne(game: GameDefinition, opts: FneOptions | None = None) -> FeedbackEquilibrium:
    """Best-response iteration for a feedback Nash equilibrium.

    Non-convergence is inconclusive (the coupled equations may still admit
    solutions reachable from other initial gains; see
    ``FneOptions.initial_gains``).  When (A, Q1+Q2) is detectable, a returned
    PSD pair (P1, P2) must be stabilizing; a violation is reported as
    InternalContradiction rather than a plain stability failure.
    """
    opts = opts or FneOptions()
    report = validate_game(game)
    if not report.stabilizable_joint:
        raise NotStabilizable("(A, [B1 B2]) is not stabilizable")

    K1, K2 = _initial_gains(game, opts)
    alpha = opts.damping
    iterations = 0
    converged = False
    for iterations in range(1, opts.max_iters + 1):
        sol1 = best_response(game, 1, K2, opts.dare)
        K1_new = (1 - alpha) * K1 + alpha * sol1.K
        sol2 = best_response(game, 2, K1_new, opts.dare)
        K2_new = (1 - alpha) * K2 + alpha * sol2.K
        delta = max(float(np.max(np.abs(K1_new - K1))), float(np.max(np.abs(K2_new - K2))))
        K1, K2 = K1_new, K2_new
        if delta < opts.tol_fp:
            converged = True
            break
    if not converged:
        raise NoConvergence(
            f"best-response iteration did not settle within {opts.max_iters} sweeps "
            "(inconclusive; try damping < 1 or different initial gains)"
        )

    A_cl = game.A + game.B1 @ K1 + game.B2 @ K2
    cl = spectrum(A_cl)
    if cl.spectral_radius >= 1.0:
        # the final best-response value matrices are PSD by construction, so
        # with (A, Q1+Q2) detectable an unstable fixed point contradicts theory
        if report.detectable_Qsum:
            raise InternalContradiction(
                "(A, Q1+Q2) is detectable yet the fixed point is not stabilizing"
            )
        raise StabilityViolation(f"closed-loop spectral radius {cl.spectral_radius:.6f}")

    P1 = solve_dlyap(A_cl, game.Q1 + K1.T @ game.R1 @ K1)
    P2 = solve_dlyap(A_cl, game.Q2 + K2.T @ game.R2 @ K2)
    M, _ = _stationarity_system(game, P1, P2)
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[-1] <= 1e-14 * sv[0]:
        raise MSingular("stationarity matrix is numerically singular at the candidate")

    res = fne_residuals(game, K1, K2, P1, P2)
    scale = max(1.0, float(np.linalg.norm(P1)), float(np.linalg.norm(P2)))
    if max(res["lyap1"], res["lyap2"], res["stationarity"]) > opts.tol_res * scale:
        raise NoConvergence(
            f"fixed point found but coupled-equation residuals exceed tolerance: {res}"
        )
    min_eig = min(float(np.linalg.eigvalsh(P1)[0]), float(np.linalg.eigvalsh(P2)[0]))
    if min_eig < -1e-9 * scale:
        raise StabilityViolation(f"value matrix not PSD (min eig {min_eig:.3e})")
    return FeedbackEquilibrium(
        K1=K1, K2=K2, P1=P1, P2=P2,
        closed_loop_spectrum=cl,
        residuals={k: res[k] for k in ("lyap1", "lyap2", "stationarity")},
        iterations=iterations,
    )


def equilibrium_value(eq: FeedbackEquilibrium, x0) -> tuple[float, float]:
    """Equilibrium costs J_i = 1/2 x0'P_i x0."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (eq.P1.shape[0],):
        raise DimensionMismatch(f"x0 must have length {eq.P1.shape[0]}")
    return 0.5 * float(x0 @ eq.P1 @ x0), 0.5 * float(x0 @ eq.P2 @ x0)
