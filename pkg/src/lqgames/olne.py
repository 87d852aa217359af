"""Open-loop Nash equilibria via the stable invariant subspace of the
3n x 3n state/costate matrix.

Eliminating the two players' controls u_i = -R_i^{-1}B_i' lambda_i(k+1) from
the coupled necessary conditions gives the forward propagation

    [x; lambda1; lambda2](k+1) = H [x; lambda1; lambda2](k),

where H is assembled from A, A^{-T}, the state weights and S_i = B_i R_i^{-1} B_i'.
Equilibrium trajectories are exactly those whose costates decay, i.e. those
living on the stable invariant subspace of H.  When that subspace has
dimension n and a basis [X; Y1; Y2] with X invertible, P_i = Y_i X^{-1}
solve a pair of coupled *asymmetric* Riccati equations, the equilibrium
admits the constant feedback synthesis

    u_i(k) = -R_i^{-1} B_i' A^{-T} (P_i - Q_i) x(k),

and the closed loop equals the subspace restriction Lambda = X T11 X^{-1}.

Caveat for trajectory generation: H also carries the antistable modes, so a
forward rollout of the full 3n system amplifies rounding noise like
rho_max(H)^k.  ``olne_trajectory`` therefore restricts itself to a certified
window where its step-wise invariance assertions are meaningful;
``openloop_inputs`` generates equilibrium input sequences of any length
through the (numerically stable) feedback synthesis, which produces the same
control by construction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    Assumption4Violated,
    DimensionMismatch,
    DivergenceDetected,
    InternalContradiction,
    ResidualTooLarge,
    SchurFailure,
    SingularA,
)
from .game_model import GameDefinition, Spectrum, spectrum
from .simulate import OVERFLOW_GUARD, Trajectory, default_horizon, eval_cost_feedback

#: invariance assertions target this absolute accuracy (scaled by the data)
_ASSERT_TOL = 1e-8
#: eigenvalues in [1 - band, 1) make the stable count numerically ambiguous
_MARGINAL_BAND = 1e-8
#: ordered-Schur selection threshold (strictly inside the unit circle)
_SORT_THRESHOLD = 1.0 - 1e-10


@dataclass(frozen=True)
class Assumption4Report:
    """Spectral-dichotomy check: n strictly stable eigenvalues and a stable
    subspace complementary to the two costate coordinate planes (equivalently:
    the top n x n block of the stable basis is invertible)."""

    holds: bool
    n_stable: int
    complementarity_margin: float
    marginal: bool


@dataclass(frozen=True)
class HamiltonianSystem:
    H: np.ndarray
    eigenvalues: np.ndarray
    n_stable: int
    stable_basis: np.ndarray
    schur_block: np.ndarray
    assumption4: Assumption4Report


@dataclass(frozen=True)
class OpenLoopEquilibrium:
    """Feedback synthesis of the unique stable-subspace open-loop equilibrium.

    P1/P2 are in general *not* symmetric and are not cost matrices; exact
    equilibrium costs come from simulate.eval_cost_feedback on the gains."""

    P1: np.ndarray
    P2: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    Lambda: np.ndarray
    closed_loop_spectrum: Spectrum
    riccati_residuals: tuple[float, float]
    invariance_residual: float
    cond_X: float
    hamiltonian: HamiltonianSystem


def mixed_time_matrix(game: GameDefinition) -> np.ndarray:
    """Matrix of the mixed-time identity
    [x(k+1); l1(k); l2(k)] = M [x(k); l1(k+1); l2(k+1)]."""
    n = game.n
    Z = np.zeros((n, n))
    return np.block([
        [game.A, -game.S1, -game.S2],
        [game.Q1, game.A.T, Z],
        [game.Q2, Z, game.A.T],
    ])


def build_hamiltonian(game: GameDefinition) -> HamiltonianSystem:
    """Assemble H (both the direct and the factored construction, which must
    agree to 1e-12 relative), compute its spectrum and ordered real Schur
    form, and evaluate the spectral-dichotomy assumption."""
    n = game.n
    sv = np.linalg.svd(game.A, compute_uv=False)
    if sv[-1] <= 1e-12 * max(sv[0], 1e-300):
        raise SingularA("A is singular; the state/costate matrix needs A^{-T}")
    AiT = np.linalg.solve(game.A.T, np.eye(n))
    S1, S2 = game.S1, game.S2
    Z = np.zeros((n, n))
    H = np.block([
        [game.A + S1 @ AiT @ game.Q1 + S2 @ AiT @ game.Q2, -S1 @ AiT, -S2 @ AiT],
        [-AiT @ game.Q1, AiT, Z],
        [-AiT @ game.Q2, Z, AiT],
    ])
    H_factored = np.block([
        [np.eye(n), S1 @ AiT, S2 @ AiT],
        [Z, -AiT, Z],
        [Z, Z, -AiT],
    ]) @ np.block([
        [game.A, Z, Z],
        [game.Q1, -np.eye(n), Z],
        [game.Q2, Z, -np.eye(n)],
    ])
    if np.linalg.norm(H - H_factored) > 1e-12 * max(1.0, np.linalg.norm(H)):
        raise InternalContradiction("direct and factored constructions of H disagree")

    ev = np.linalg.eigvals(H)
    moduli = np.abs(ev)
    n_stable = int(np.sum(moduli < 1.0))
    marginal = bool(np.any((moduli >= 1.0 - _MARGINAL_BAND) & (moduli < 1.0)))

    try:
        T, Zs, sdim = scipy.linalg.schur(
            H, output="real", sort=lambda re, im: np.hypot(re, im) < _SORT_THRESHOLD
        )
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError, ValueError) as exc:
        raise SchurFailure(f"ordered real Schur decomposition failed: {exc}") from exc
    basis = Zs[:, :sdim]
    block = T[:sdim, :sdim]
    if sdim and np.linalg.norm(H @ basis - basis @ block) > 1e-10 * max(1.0, np.linalg.norm(H)):
        raise SchurFailure("stable invariant subspace residual too large")

    margin = 0.0
    if sdim == n:
        margin = float(np.linalg.svd(basis[:n, :], compute_uv=False)[-1])
    report = Assumption4Report(
        holds=bool(n_stable == n and sdim == n and margin > 1e-10),
        n_stable=n_stable,
        complementarity_margin=margin,
        marginal=marginal,
    )
    return HamiltonianSystem(
        H=H, eigenvalues=ev, n_stable=n_stable,
        stable_basis=basis, schur_block=block, assumption4=report,
    )


def _spectra_match(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    sa = sorted(a, key=lambda v: (v.real, v.imag))
    sb = sorted(b, key=lambda v: (v.real, v.imag))
    return len(sa) == len(sb) and all(abs(x - y) <= 4 * tol for x, y in zip(sa, sb))


def solve_olne(game: GameDefinition, tol_res: float = 1e-9) -> OpenLoopEquilibrium:
    """Unique open-loop equilibrium admitting a feedback synthesis.

    Requires the spectral dichotomy: exactly n eigenvalues of H strictly
    inside the unit circle (eigenvalues in [1-1e-8, 1) are rejected as
    marginal) and an invertible top block X of the stable basis.  The
    returned matrices are certified by direct substitution into the coupled
    asymmetric Riccati equations and the subspace invariance relation.
    """
    hs = build_hamiltonian(game)
    n = game.n
    if hs.assumption4.marginal:
        raise Assumption4Violated(
            "an eigenvalue of H lies within 1e-8 below the unit circle; "
            "the stable/antistable split is numerically ambiguous"
        )
    if not hs.assumption4.holds:
        raise Assumption4Violated(
            f"need exactly n={n} strictly stable eigenvalues of H with an invertible "
            f"top basis block; got n_stable={hs.n_stable}, "
            f"complementarity margin {hs.assumption4.complementarity_margin:.3e}"
        )
    X = hs.stable_basis[:n, :]
    Y1 = hs.stable_basis[n:2 * n, :]
    Y2 = hs.stable_basis[2 * n:, :]
    # P_i = Y_i X^{-1} and Lambda = X T11 X^{-1}, both via solves against X'
    P1 = np.linalg.solve(X.T, Y1.T).T
    P2 = np.linalg.solve(X.T, Y2.T).T
    Lam = np.linalg.solve(X.T, (X @ hs.schur_block).T).T
    cond_X = float(np.linalg.cond(X))

    AiT = np.linalg.solve(game.A.T, np.eye(n))
    K1 = -np.linalg.solve(game.R1, game.B1.T @ AiT @ (P1 - game.Q1))
    K2 = -np.linalg.solve(game.R2, game.B2.T @ AiT @ (P2 - game.Q2))

    # direct substitution into the coupled asymmetric Riccati equations
    drift = game.A + game.S1 @ AiT @ game.Q1 + game.S2 @ AiT @ game.Q2
    r1 = AiT @ game.Q1 + P1 @ drift - AiT @ P1 \
        - P1 @ game.S1 @ AiT @ P1 - P1 @ game.S2 @ AiT @ P2
    r2 = AiT @ game.Q2 + P2 @ drift - AiT @ P2 \
        - P2 @ game.S1 @ AiT @ P1 - P2 @ game.S2 @ AiT @ P2
    graph = np.vstack([np.eye(n), P1, P2])
    inv_res = float(np.linalg.norm(hs.H @ graph - graph @ Lam))
    scale = max(1.0, float(np.linalg.norm(P1)), float(np.linalg.norm(P2)))
    residuals = (float(np.linalg.norm(r1)), float(np.linalg.norm(r2)))
    if max(residuals) > tol_res * scale or inv_res > tol_res * scale:
        raise ResidualTooLarge(
            f"asymmetric Riccati residuals {residuals}, invariance residual {inv_res:.3e}"
        )
    cl = spectrum(game.A + game.B1 @ K1 + game.B2 @ K2)
    lam_spec = np.linalg.eigvals(Lam)
    if float(np.max(np.abs(lam_spec))) >= 1.0:
        raise Assumption4Violated("subspace restriction is not strictly stable")
    if not _spectra_match(cl.eigenvalues, lam_spec, 1e-8 * max(1.0, float(np.max(np.abs(lam_spec))))):
        raise InternalContradiction(
            "closed-loop spectrum does not match the subspace restriction"
        )
    return OpenLoopEquilibrium(
        P1=P1, P2=P2, K1=K1, K2=K2, Lambda=Lam,
        closed_loop_spectrum=cl,
        riccati_residuals=residuals,
        invariance_residual=inv_res,
        cond_X=cond_X,
        hamiltonian=hs,
    )


def certified_horizon(eq: OpenLoopEquilibrium, x0, tol: float = _ASSERT_TOL) -> int:
    """Longest forward propagation of the full 3n system whose rounding drift
    (growing like rho_max(H)^k) provably stays below ``tol``."""
    rho_max = float(np.max(np.abs(eq.hamiltonian.eigenvalues)))
    if rho_max <= 1.0:
        return 10_000
    scale = max(1.0, float(np.linalg.norm(np.atleast_1d(x0))))
    budget = tol / (5.0 * np.finfo(float).eps * scale)
    return max(2, int(np.floor(np.log(budget) / np.log(rho_max))))


def openloop_inputs(game: GameDefinition, eq: OpenLoopEquilibrium, x0, T: int):
    """Equilibrium input sequences u_i(k) = K_i (A_cl)^k x0 of arbitrary
    length, generated by the stable closed-loop recursion."""
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    A_cl = game.A + game.B1 @ eq.K1 + game.B2 @ eq.K2
    u1 = np.zeros((T, game.m1))
    u2 = np.zeros((T, game.m2))
    for k in range(T):
        u1[k] = eq.K1 @ x
        u2[k] = eq.K2 @ x
        x = A_cl @ x
    return u1, u2


def olne_trajectory(game: GameDefinition, eq: OpenLoopEquilibrium, x0,
                    T: int | None = None) -> Trajectory:
    """Propagate the full state/costate system from (x0, P1 x0, P2 x0).

    Asserts, at every step, the static costate relation lambda_i(k) = P_i x(k)
    and agreement of the state path with the feedback-synthesis rollout (both
    to 1e-8).  The horizon is limited to the certified window (see
    ``certified_horizon``); beyond it these assertions are unfalsifiable in
    double precision and the call raises DivergenceDetected.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (game.n,):
        raise DimensionMismatch(f"x0 must have length {game.n}")
    cert = certified_horizon(eq, x0)
    if T is None:
        rho = eq.closed_loop_spectrum.spectral_radius
        T = min(default_horizon(rho, float(np.linalg.norm(x0))), cert)
    elif T > cert:
        raise DivergenceDetected(
            f"horizon {T} exceeds the certified propagation window {cert} for the "
            "full state/costate system; use openloop_inputs / the feedback "
            "synthesis for long horizons"
        )
    T = int(T)

    n = game.n
    H = eq.hamiltonian.H
    A_cl = game.A + game.B1 @ eq.K1 + game.B2 @ eq.K2
    tol = _ASSERT_TOL * max(1.0, float(np.linalg.norm(x0)))

    z = np.concatenate([x0, eq.P1 @ x0, eq.P2 @ x0])
    xs = np.zeros((T + 1, n))
    l1s = np.zeros((T + 1, n))
    l2s = np.zeros((T + 1, n))
    u1s = np.zeros((T, game.m1))
    u2s = np.zeros((T, game.m2))
    x_fb = x0.copy()
    for k in range(T + 1):
        x, l1, l2 = z[:n], z[n:2 * n], z[2 * n:]
        if np.linalg.norm(x) > OVERFLOW_GUARD:
            raise DivergenceDetected("state/costate propagation left the numeric range")
        if max(np.max(np.abs(l1 - eq.P1 @ x)), np.max(np.abs(l2 - eq.P2 @ x))) > tol:
            raise InternalContradiction(
                f"costate invariance violated at step {k} within the certified window"
            )
        if np.max(np.abs(x - x_fb)) > tol:
            raise InternalContradiction(
                f"state path departs from the feedback synthesis at step {k}"
            )
        xs[k], l1s[k], l2s[k] = x, l1, l2
        if k < T:
            z = H @ z
            u1s[k] = -np.linalg.solve(game.R1, game.B1.T @ z[n:2 * n])
            u2s[k] = -np.linalg.solve(game.R2, game.B2.T @ z[2 * n:])
            x_fb = A_cl @ x_fb

    # costates must have decayed: compare against the sharp subspace bound
    lam_pow = np.linalg.matrix_power(eq.Lambda, T)
    for lam_T, P in ((l1s[-1], eq.P1), (l2s[-1], eq.P2)):
        bound = float(np.linalg.norm(P, 2) * np.linalg.norm(lam_pow @ x0)) + tol
        if np.linalg.norm(lam_T) > bound:
            raise InternalContradiction("terminal costate exceeds its decay bound")

    c1 = np.array([0.5 * float(xs[k] @ game.Q1 @ xs[k] + u1s[k] @ game.R1 @ u1s[k])
                   for k in range(T)])
    c2 = np.array([0.5 * float(xs[k] @ game.Q2 @ xs[k] + u2s[k] @ game.R2 @ u2s[k])
                   for k in range(T)])
    P1t, P2t = eval_cost_feedback(game, eq.K1, eq.K2)
    tails = (0.5 * float(xs[-1] @ P1t @ xs[-1]), 0.5 * float(xs[-1] @ P2t @ xs[-1]))
    return Trajectory(
        states=xs,
        inputs1=u1s,
        inputs2=u2s,
        stage_costs1=c1,
        stage_costs2=c2,
        cumulative1=float(np.sum(c1)),
        cumulative2=float(np.sum(c2)),
        tail_bound=max(tails),
        tail_costs=tails,
        costates1=l1s,
        costates2=l2s,
    )
