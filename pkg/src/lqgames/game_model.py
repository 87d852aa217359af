"""Game data types, structural-assumption checks and spectral utilities.

A two-player game is the tuple (A, B1, B2, Q1, Q2, R1, R2) for the dynamics
x(k+1) = A x(k) + B1 u1(k) + B2 u2(k) and the per-player costs
J_i = 1/2 sum_k x'Q_i x + u_i'R_i u_i.  Construction symmetrizes the weight
matrices and rejects definiteness violations; everything downstream can then
assume clean data.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    NotPositiveDefinite,
    NotSymmetric,
)

#: relative threshold deciding numerical rank in PBH / reachability tests
RANK_RTOL = 1e-8
#: half-width of the band around the unit circle reported as "marginal"
MARGINAL_BAND = 1e-8


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a square matrix plus their maximum modulus."""

    eigenvalues: np.ndarray
    spectral_radius: float

    def classify(self, band: float = MARGINAL_BAND) -> str:
        """'stable' / 'unstable' for a spectral radius clear of the unit
        circle, 'marginal' when some eigenvalue sits within ``band`` of it."""
        moduli = np.abs(self.eigenvalues)
        if np.any(np.abs(moduli - 1.0) <= band):
            return "marginal"
        return "stable" if self.spectral_radius < 1.0 else "unstable"


def spectrum(m: np.ndarray) -> Spectrum:
    """Eigenvalues of ``m`` via a backward-stable dense solver."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    try:
        ev = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"eigensolver failed: {exc}") from exc
    return Spectrum(eigenvalues=ev, spectral_radius=float(np.max(np.abs(ev))) if ev.size else 0.0)


def _as_matrix(value, name: str) -> np.ndarray:
    m = np.asarray(value, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be a 2-D matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise DimensionMismatch(f"{name} contains non-finite entries")
    return m


def _ingest_weight(value, name: str, positive_definite: bool) -> np.ndarray:
    """Symmetrize a weight matrix; reject asymmetry or definiteness violations."""
    m = _as_matrix(value, name)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {m.shape}")
    scale = max(1.0, float(np.linalg.norm(m)))
    if np.linalg.norm(m - m.T) > 1e-8 * scale:
        raise NotSymmetric(f"{name} is asymmetric beyond tolerance")
    m = (m + m.T) / 2.0
    eigs = np.linalg.eigvalsh(m)
    if positive_definite:
        tol_pd = 1e-9 * float(np.linalg.norm(m))
        if eigs[0] <= tol_pd:
            raise NotPositiveDefinite(f"{name} must be positive definite (min eig {eigs[0]:.3e})")
    else:
        tol_psd = 1e-9 * float(np.linalg.norm(m))
        if eigs[0] < -tol_psd:
            raise NotPositiveDefinite(
                f"{name} must be positive semidefinite (min eig {eigs[0]:.3e})"
            )
    return m


@dataclass(frozen=True)
class GameDefinition:
    """Immutable two-player LQ game data.

    Weight matrices are symmetrized on construction; Q1, Q2 must be PSD and
    R1, R2 PD.  ``S1``/``S2`` are the control-weighted input maps
    B_i R_i^{-1} B_i', computed on demand.
    """

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    R1: np.ndarray
    R2: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B1 = _as_matrix(self.B1, "B1")
        B2 = _as_matrix(self.B2, "B2")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B1.shape[0] != n or B2.shape[0] != n:
            raise DimensionMismatch("B1/B2 row count must match the state dimension")
        if min(n, B1.shape[1], B2.shape[1]) < 1:
            raise DimensionMismatch("state and input dimensions must be >= 1")
        Q1 = _ingest_weight(self.Q1, "Q1", positive_definite=False)
        Q2 = _ingest_weight(self.Q2, "Q2", positive_definite=False)
        R1 = _ingest_weight(self.R1, "R1", positive_definite=True)
        R2 = _ingest_weight(self.R2, "R2", positive_definite=True)
        if Q1.shape != (n, n) or Q2.shape != (n, n):
            raise DimensionMismatch("Q1/Q2 must be n x n")
        if R1.shape != (B1.shape[1],) * 2 or R2.shape != (B2.shape[1],) * 2:
            raise DimensionMismatch("R_i must match the width of B_i")
        for name, m in (("A", A), ("B1", B1), ("B2", B2), ("Q1", Q1),
                        ("Q2", Q2), ("R1", R1), ("R2", R2)):
            object.__setattr__(self, name, m)
            m.setflags(write=False)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m1(self) -> int:
        return self.B1.shape[1]

    @property
    def m2(self) -> int:
        return self.B2.shape[1]

    @cached_property
    def S1(self) -> np.ndarray:
        return self.B1 @ np.linalg.solve(self.R1, self.B1.T)

    @cached_property
    def S2(self) -> np.ndarray:
        return self.B2 @ np.linalg.solve(self.R2, self.B2.T)

    def B(self, player: int) -> np.ndarray:
        return self.B1 if player == 1 else self.B2

    def Q(self, player: int) -> np.ndarray:
        return self.Q1 if player == 1 else self.Q2

    def R(self, player: int) -> np.ndarray:
        return self.R1 if player == 1 else self.R2


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of the structural checks, with the margins that decided them."""

    stabilizable_joint: bool
    A_nonsingular: bool
    reachable_1: bool
    reachable_2: bool
    detectable_Q1: bool
    detectable_Q2: bool
    detectable_Qsum: bool
    details: dict = field(default_factory=dict)

    def all_hold(self) -> bool:
        return all(
            (self.stabilizable_joint, self.A_nonsingular, self.reachable_1,
             self.reachable_2, self.detectable_Q1, self.detectable_Q2,
             self.detectable_Qsum)
        )


def reachability_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def _rank_margin(m: np.ndarray, n: int) -> tuple[bool, float]:
    """(full row-rank n?, the singular value that decided it)."""
    sv = np.linalg.svd(m, compute_uv=False)
    if sv.size < n:
        return False, 0.0
    margin = float(sv[n - 1])
    return margin > RANK_RTOL * float(sv[0]), margin


def is_reachable(A: np.ndarray, B: np.ndarray) -> tuple[bool, float]:
    """Rank test on the reachability matrix [B, AB, ..., A^{n-1}B]."""
    return _rank_margin(reachability_matrix(A, B), A.shape[0])


def pbh_stabilizable(A: np.ndarray, B: np.ndarray) -> tuple[bool, float]:
    """PBH: rank [lam*I - A, B] = n at every eigenvalue with |lam| >= 1."""
    n = A.shape[0]
    ok, margin = True, np.inf
    for lam in np.linalg.eigvals(A):
        if abs(lam) < 1.0:
            continue
        pencil = np.hstack([lam * np.eye(n) - A, B.astype(complex)])
        full, m = _rank_margin(pencil, n)
        ok &= full
        margin = min(margin, m)
    return ok, float(margin)


def pbh_detectable(A: np.ndarray, C: np.ndarray) -> tuple[bool, float]:
    """Dual PBH: rank [lam*I - A; C] = n at every eigenvalue with |lam| >= 1."""
    ok, margin = pbh_stabilizable(A.T, C.T)
    return ok, margin


def validate_game(game: GameDefinition, tol: float = RANK_RTOL) -> AssumptionReport:
    """Run all structural checks on a game and report booleans plus margins.

    Stabilizability of (A, [B1 B2]) is necessary for any feedback equilibrium;
    nonsingular A, per-player reachability and per-player detectability back
    the open-loop construction; detectability of (A, Q1+Q2) is the hypothesis
    under which any PSD solution of the coupled feedback equations must be
    stabilizing.
    """
    del tol  # documented default; kept in the signature for explicit callers
    A = game.A
    B_joint = np.hstack([game.B1, game.B2])
    stab, stab_margin = pbh_stabilizable(A, B_joint)
    sv_A = np.linalg.svd(A, compute_uv=False)
    a_nonsing = bool(sv_A[-1] > RANK_RTOL * sv_A[0])
    reach1, reach1_margin = is_reachable(A, game.B1)
    reach2, reach2_margin = is_reachable(A, game.B2)
    det1, det1_margin = pbh_detectable(A, game.Q1)
    det2, det2_margin = pbh_detectable(A, game.Q2)
    dets, dets_margin = pbh_detectable(A, game.Q1 + game.Q2)
    return AssumptionReport(
        stabilizable_joint=stab,
        A_nonsingular=a_nonsing,
        reachable_1=reach1,
        reachable_2=reach2,
        detectable_Q1=det1,
        detectable_Q2=det2,
        detectable_Qsum=dets,
        details={
            "stabilizable_joint_margin": stab_margin,
            "A_smallest_singular_value": float(sv_A[-1]),
            "reachable_1_margin": reach1_margin,
            "reachable_2_margin": reach2_margin,
            "detectable_Q1_margin": det1_margin,
            "detectable_Q2_margin": det2_margin,
            "detectable_Qsum_margin": dets_margin,
        },
    )
