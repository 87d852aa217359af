"""Single-player infinite-horizon LQ control with a known exogenous input.

The plant is x(k+1) = A x(k) + B u(k) + w(k) with finitely supported w and
cost 1/2 sum_k x'Qx + u'Ru.  The optimal law is the stabilizing Riccati
feedback plus an anticipative feedforward built from the backward recursion

    b(k) = A_cl'(b(k+1) + P w(k)),        b(k) = 0 for k >= len(w),

equivalently b(k) = sum_{h>=k} (A_cl')^{h-k+1} P w(h).  The same trajectory
is generated by the state/costate (adjoint) dynamics restricted to the set
lambda(k) = P x(k) + b(k); ``hamiltonian_rollout`` implements that route and
checks it against the dynamic-programming rollout step by step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AssumptionViolation,
    DimensionMismatch,
    DivergenceDetected,
    InternalContradiction,
)
from .game_model import _as_matrix, _ingest_weight, is_reachable, pbh_detectable, pbh_stabilizable
from .riccati import DareOptions, DareSolution, solve_dare
from .simulate import OVERFLOW_GUARD, Trajectory

_ROLLOUT_CAP = 100_000


@dataclass(frozen=True)
class AffineOCProblem:
    """Problem data; ``w`` is a (T_w, n) array, implicitly zero afterwards."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    w: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        n = A.shape[0]
        if A.shape != (n, n) or B.shape[0] != n:
            raise DimensionMismatch("A must be square and B must have matching rows")
        Q = _ingest_weight(self.Q, "Q", positive_definite=False)
        R = _ingest_weight(self.R, "R", positive_definite=True)
        if Q.shape != (n, n) or R.shape != (B.shape[1],) * 2:
            raise DimensionMismatch("Q must be n x n and R must match the width of B")
        w = np.asarray(self.w, dtype=float).reshape(-1, n) if np.size(self.w) else np.zeros((0, n))
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if x0.shape != (n,):
            raise DimensionMismatch(f"x0 must have length {n}")
        if not np.all(np.isfinite(w)):
            raise DimensionMismatch("w contains non-finite entries")
        for name, m in (("A", A), ("B", B), ("Q", Q), ("R", R), ("w", w), ("x0", x0)):
            object.__setattr__(self, name, m)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def support(self) -> int:
        """Length of the exogenous-input support T_w."""
        return self.w.shape[0]


@dataclass(frozen=True)
class AffineAssumptions:
    """The single-player structural items: (i) reachability, (ii) detectability,
    (iii) nonsingular A, (iv) a finite-cost control exists.  The solver itself
    only needs stabilizability + detectability; a failed reachability item is
    reported, not fatal."""

    reachable: bool
    detectable: bool
    a_nonsingular: bool
    stabilizable: bool

    @property
    def finite_cost_attainable(self) -> bool:
        # finite-support w: any stabilizing feedback gives a finite cost
        return self.stabilizable


@dataclass(frozen=True)
class AffineOCSolution:
    problem: AffineOCProblem
    P: np.ndarray
    K: np.ndarray
    A_cl: np.ndarray
    b: np.ndarray          # (support+1, n); b[k] = 0 for k >= support
    c: np.ndarray          # (support+1,); running cost offsets, c[0] is c0
    optimal_cost: float
    assumptions: AffineAssumptions
    dare: DareSolution

    @property
    def c0(self) -> float:
        return float(self.c[0])

    def b_at(self, k: int) -> np.ndarray:
        return self.b[k] if k < len(self.b) else np.zeros(self.problem.n)

    def c_at(self, k: int) -> float:
        return float(self.c[k]) if k < len(self.c) else 0.0

    def w_at(self, k: int) -> np.ndarray:
        return self.problem.w[k] if k < self.problem.support else np.zeros(self.problem.n)


def solve_affine_oc(problem: AffineOCProblem, opts: DareOptions | None = None) -> AffineOCSolution:
    """Riccati feedback + feedforward + optimal cost for the affine problem.

    The optimal cost is 1/2 x0'P x0 + x0'b(0) + c(0) with c accumulated
    backward alongside b.  Raises AssumptionViolation for singular A (the
    current-time control form needs A_cl^{-T}); Riccati preconditions
    propagate from the kernel.
    """
    A, B, Q, R = problem.A, problem.B, problem.Q, problem.R
    n = problem.n
    sv = np.linalg.svd(A, compute_uv=False)
    a_nonsingular = bool(sv[-1] > 1e-8 * max(sv[0], 1e-300))
    if not a_nonsingular:
        raise AssumptionViolation("item (iii): A is singular")
    assumptions = AffineAssumptions(
        reachable=is_reachable(A, B)[0],
        detectable=pbh_detectable(A, Q)[0],
        a_nonsingular=a_nonsingular,
        stabilizable=pbh_stabilizable(A, B)[0],
    )
    dare = solve_dare(A, B, Q, R, opts)
    P, K, A_cl = dare.P, dare.K, dare.A_cl
    G = R + B.T @ P @ B

    Tw = problem.support
    b = np.zeros((Tw + 1, n))
    c = np.zeros(Tw + 1)
    for k in range(Tw - 1, -1, -1):
        wk = problem.w[k]
        b[k] = A_cl.T @ (b[k + 1] + P @ wk)
        v = B.T @ (P @ wk + b[k + 1])
        c[k] = c[k + 1] + 0.5 * float(wk @ P @ wk) + float(wk @ b[k + 1]) \
            - 0.5 * float(v @ np.linalg.solve(G, v))
    x0 = problem.x0
    cost = 0.5 * float(x0 @ P @ x0) + float(x0 @ b[0]) + float(c[0])
    return AffineOCSolution(
        problem=problem, P=P, K=K, A_cl=A_cl, b=b, c=c,
        optimal_cost=cost, assumptions=assumptions, dare=dare,
    )


def optimal_input(sol: AffineOCSolution, x, k: int) -> np.ndarray:
    """u*(k) from state x at time k.

    Uses the lookahead form -G^{-1}B'(PAx + Pw(k) + b(k+1)); the equivalent
    current-time form -G^{-1}B'(PAx + A_cl^{-T} b(k)) is evaluated as well and
    must agree to 1e-10."""
    p = sol.problem
    x = np.atleast_1d(np.asarray(x, dtype=float))
    G = p.R + p.B.T @ sol.P @ p.B
    lead = sol.P @ (p.A @ x) + sol.P @ sol.w_at(k) + sol.b_at(k + 1)
    u = -np.linalg.solve(G, p.B.T @ lead)
    u_now = -np.linalg.solve(G, p.B.T @ (sol.P @ (p.A @ x) + np.linalg.solve(sol.A_cl.T, sol.b_at(k))))
    if np.max(np.abs(u - u_now)) > 1e-10 * max(1.0, float(np.max(np.abs(u)))):
        raise InternalContradiction(
            "lookahead and current-time forms of the optimal input disagree"
        )
    return u


def value_function(sol: AffineOCSolution, k: int, x) -> float:
    """V(k, x) = 1/2 x'Px + x'b(k) + c(k)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return 0.5 * float(x @ sol.P @ x) + float(x @ sol.b_at(k)) + sol.c_at(k)


def default_rollout_horizon(sol: AffineOCSolution) -> int:
    rho = sol.dare.closed_loop_spectrum.spectral_radius
    decay = int(np.ceil(np.log(1e-12) / np.log(rho))) if 0.0 < rho < 1.0 else 8
    return int(min(max(sol.problem.support + 50, decay), _ROLLOUT_CAP))


def _single_player_trajectory(p: AffineOCProblem, xs, us, tail: float, lams=None) -> Trajectory:
    xs = np.asarray(xs)
    us = np.asarray(us).reshape(-1, p.m)
    T = len(us)
    c1 = np.array([0.5 * float(xs[k] @ p.Q @ xs[k] + us[k] @ p.R @ us[k]) for k in range(T)])
    return Trajectory(
        states=xs,
        inputs1=us,
        inputs2=np.zeros((T, 0)),
        stage_costs1=c1,
        stage_costs2=np.zeros(T),
        cumulative1=float(np.sum(c1)),
        cumulative2=0.0,
        tail_bound=tail,
        tail_costs=(tail, 0.0) if np.isfinite(tail) else None,
        costates1=None if lams is None else np.asarray(lams),
    )


def feedback_rollout(sol: AffineOCSolution, T: int | None = None) -> Trajectory:
    """Dynamic-programming route: apply u*(k) to the true dynamics."""
    p = sol.problem
    T = default_rollout_horizon(sol) if T is None else int(T)
    xs = np.zeros((T + 1, p.n))
    us = np.zeros((T, p.m))
    xs[0] = p.x0
    for k in range(T):
        us[k] = optimal_input(sol, xs[k], k)
        xs[k + 1] = p.A @ xs[k] + p.B @ us[k] + sol.w_at(k)
        if np.linalg.norm(xs[k + 1]) > OVERFLOW_GUARD:
            raise DivergenceDetected("feedback rollout left the numeric range")
    # beyond the forcing support the cost-to-go is the plain LQR value
    tail = 0.5 * float(xs[-1] @ sol.P @ xs[-1]) if T >= p.support else np.inf
    return _single_player_trajectory(p, xs, us, tail)


def hamiltonian_rollout(sol: AffineOCSolution, T: int | None = None) -> Trajectory:
    """Adjoint route: propagate the costate-substituted closed form

        x(k+1) = (I + B R^{-1}B'P)^{-1} (A x(k) + w(k) - B R^{-1}B' b(k+1)),

    record lambda(k) = P x(k) + b(k) and u(k) = -R^{-1}B' lambda(k+1), and
    assert the state path matches the dynamic-programming rollout to 1e-9
    componentwise at every step."""
    p = sol.problem
    T = default_rollout_horizon(sol) if T is None else int(T)
    M = np.eye(p.n) + p.B @ np.linalg.solve(p.R, p.B.T) @ sol.P
    BRBt = p.B @ np.linalg.solve(p.R, p.B.T)
    xs = np.zeros((T + 1, p.n))
    us = np.zeros((T, p.m))
    lams = np.zeros((T + 1, p.n))
    xs[0] = p.x0
    lams[0] = sol.P @ p.x0 + sol.b_at(0)
    for k in range(T):
        rhs = p.A @ xs[k] + sol.w_at(k) - BRBt @ sol.b_at(k + 1)
        xs[k + 1] = np.linalg.solve(M, rhs)
        if np.linalg.norm(xs[k + 1]) > OVERFLOW_GUARD:
            raise DivergenceDetected("adjoint rollout left the numeric range")
        lams[k + 1] = sol.P @ xs[k + 1] + sol.b_at(k + 1)
        us[k] = -np.linalg.solve(p.R, p.B.T @ lams[k + 1])

    reference = feedback_rollout(sol, T)
    gap = float(np.max(np.abs(xs - reference.states)))
    if gap > 1e-9:
        raise InternalContradiction(
            f"adjoint and dynamic-programming rollouts disagree by {gap:.3e}"
        )
    return _single_player_trajectory(p, xs, us, reference.tail_bound, lams=lams)
