"""Discrete-time Riccati and Lyapunov kernels.

``solve_dare`` returns the unique stabilizing solution of

    P = Q + A'PA - A'PB (R + B'PB)^{-1} B'PA

computed with the structure-preserving doubling algorithm (quadratically
convergent, no inversion of A needed), polished by a few Newton-Kleinman
steps, with plain value iteration as a last-resort fallback.  ``solve_dlyap``
solves the Stein equation P = F'PF + W by vectorization for small problems
and Smith doubling otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    IllConditioned,
    NoStabilizingSolution,
    NotDetectable,
    NotStabilizable,
    ResidualTooLarge,
    UnstableF,
)
from .game_model import Spectrum, pbh_detectable, pbh_stabilizable, spectrum

#: switch from kron-vectorization to Smith doubling above this state dimension
_VEC_CUTOFF = 20


@dataclass
class DareOptions:
    tol_update: float = 1e-12      # relative fixed-point stagnation threshold
    tol_res: float = 1e-9          # relative residual accepted for the solution
    max_doubling: int = 200
    max_value_iters: int = 100_000
    marginal_band: float = 1e-8    # closed-loop eigenvalue band treated as ill-conditioned
    refine_steps: int = 3


@dataclass(frozen=True)
class DareSolution:
    """Stabilizing Riccati solution with its gain (u = K x convention)."""

    P: np.ndarray
    K: np.ndarray
    A_cl: np.ndarray
    closed_loop_spectrum: Spectrum
    residual: float
    woodbury_residual: float
    iterations: int
    method: str


def _dare_residual(A, B, Q, R, P) -> float:
    G = R + B.T @ P @ B
    res = Q + A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(G, B.T @ P @ A) - P
    return float(np.linalg.norm(res))


def _woodbury_residual(B, R, P) -> float:
    # (I + B R^{-1} B'P)^{-1} == I - B (R + B'PB)^{-1} B'P
    n = P.shape[0]
    lhs = np.linalg.inv(np.eye(n) + B @ np.linalg.solve(R, B.T) @ P)
    rhs = np.eye(n) - B @ np.linalg.solve(R + B.T @ P @ B, B.T @ P)
    return float(np.linalg.norm(lhs - rhs))


def _gain(A, B, R, P) -> np.ndarray:
    return -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)


def _sda(A, B, Q, R, opts: DareOptions):
    """Doubling iteration; returns (P, iterations) or None on breakdown."""
    n = A.shape[0]
    Ak = A.copy()
    Gk = B @ np.linalg.solve(R, B.T)
    Pk = Q.copy()
    for it in range(opts.max_doubling):
        W = np.eye(n) + Gk @ Pk
        try:
            WiA = np.linalg.solve(W, Ak)
            WiG = np.linalg.solve(W, Gk)
        except np.linalg.LinAlgError:
            return None
        Pn = Pk + Ak.T @ Pk @ WiA
        Gn = Gk + Ak @ WiG @ Ak.T
        An = Ak @ WiA
        if not np.all(np.isfinite(Pn)):
            return None
        upd = np.linalg.norm(Pn - Pk) / max(1.0, np.linalg.norm(Pk))
        Ak, Gk, Pk = An, (Gn + Gn.T) / 2, (Pn + Pn.T) / 2
        if upd < opts.tol_update:
            return Pk, it + 1
    return None


def _value_iteration(A, B, Q, R, opts: DareOptions):
    P = np.zeros_like(Q)
    for it in range(opts.max_value_iters):
        G = R + B.T @ P @ B
        Pn = Q + A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(G, B.T @ P @ A)
        Pn = (Pn + Pn.T) / 2
        if np.linalg.norm(Pn - P) < opts.tol_update * max(1.0, np.linalg.norm(P)):
            return Pn, it + 1
        P = Pn
    return None


def _refine(A, B, Q, R, P, steps: int):
    """Newton-Kleinman polish: resolve the Lyapunov form at the current gain."""
    for _ in range(steps):
        K = _gain(A, B, R, P)
        Acl = A + B @ K
        if np.max(np.abs(np.linalg.eigvals(Acl))) >= 1.0:
            break
        P = solve_dlyap(Acl, Q + K.T @ R @ K)
    return P


def solve_dare(A, B, Q, R, opts: DareOptions | None = None) -> DareSolution:
    """Stabilizing solution of the discrete-time algebraic Riccati equation.

    Raises NotStabilizable / NotDetectable when the PBH preconditions fail,
    IllConditioned when the closed loop lands inside the marginal band around
    the unit circle, and NoStabilizingSolution when no acceptable fixed point
    is found.
    """
    opts = opts or DareOptions()
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n or Q.shape != (n, n) or R.shape != (B.shape[1],) * 2:
        raise DimensionMismatch(
            f"inconsistent DARE shapes: A{A.shape} B{B.shape} Q{Q.shape} R{R.shape}"
        )
    ok, _ = pbh_stabilizable(A, B)
    if not ok:
        raise NotStabilizable("(A, B) is not stabilizable")
    ok, _ = pbh_detectable(A, Q)
    if not ok:
        raise NotDetectable("(A, Q) is not detectable")

    method = "sda"
    out = _sda(A, B, Q, R, opts)
    if out is None:
        method = "value-iteration"
        out = _value_iteration(A, B, Q, R, opts)
    if out is None:
        raise NoStabilizingSolution("doubling and value iteration both failed to converge")
    P, iterations = out
    P = _refine(A, B, Q, R, P, opts.refine_steps)
    P = (P + P.T) / 2

    K = _gain(A, B, R, P)
    cl = spectrum(A + B @ K)
    if abs(cl.spectral_radius - 1.0) <= opts.marginal_band:
        raise IllConditioned(
            f"closed-loop spectral radius {cl.spectral_radius:.12f} is within "
            f"{opts.marginal_band:g} of the unit circle"
        )
    if cl.spectral_radius >= 1.0:
        raise NoStabilizingSolution(
            f"iteration converged to a non-stabilizing fixed point "
            f"(rho = {cl.spectral_radius:.6f})"
        )
    residual = _dare_residual(A, B, Q, R, P)
    if residual > opts.tol_res * max(1.0, float(np.linalg.norm(P))):
        raise NoStabilizingSolution(f"DARE residual {residual:.3e} exceeds tolerance")
    woodbury = _woodbury_residual(B, R, P)
    if woodbury > 1e-6 * max(1.0, float(np.linalg.norm(P))):
        raise NoStabilizingSolution(f"Woodbury identity residual {woodbury:.3e} is too large")
    return DareSolution(
        P=P,
        K=K,
        A_cl=A + B @ K,
        closed_loop_spectrum=cl,
        residual=residual,
        woodbury_residual=woodbury,
        iterations=iterations,
        method=method,
    )


def solve_dlyap(F, W, tol_margin: float = 1e-8) -> np.ndarray:
    """Solve the discrete Lyapunov (Stein) equation P = F'PF + W.

    ``F`` must be strictly stable; ``W`` symmetric.  Vectorized solve for
    small n, Smith doubling for larger problems.
    """
    F = np.asarray(F, dtype=float)
    W = np.asarray(W, dtype=float)
    n = F.shape[0]
    if F.shape != (n, n) or W.shape != (n, n):
        raise DimensionMismatch(f"inconsistent Lyapunov shapes: F{F.shape} W{W.shape}")
    if np.linalg.norm(W - W.T) > 1e-8 * max(1.0, np.linalg.norm(W)):
        raise DimensionMismatch("W must be symmetric")
    W = (W + W.T) / 2
    rho = float(np.max(np.abs(np.linalg.eigvals(F)))) if n else 0.0
    if rho >= 1.0 - tol_margin:
        raise UnstableF(f"spectral radius {rho:.12f} >= 1 - {tol_margin:g}")

    if n <= _VEC_CUTOFF:
        # vec(P) = (I - F' (x) F')^{-1} vec(W)
        lhs = np.eye(n * n) - np.kron(F.T, F.T)
        P = np.linalg.solve(lhs, W.reshape(-1)).reshape(n, n)
    else:
        P = W.copy()
        Fk = F.copy()
        for _ in range(200):
            Pn = P + Fk.T @ P @ Fk
            Fk = Fk @ Fk
            if np.linalg.norm(Pn - P) < 1e-14 * max(1.0, np.linalg.norm(P)):
                P = Pn
                break
            P = Pn
    P = (P + P.T) / 2
    res = float(np.linalg.norm(F.T @ P @ F + W - P))
    if res > 1e-8 * max(1.0, float(np.linalg.norm(P))):
        raise ResidualTooLarge(f"Lyapunov residual {res:.3e}")
    return P
