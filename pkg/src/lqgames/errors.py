"""Exception hierarchy shared by all solvers."""


class LqgError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(LqgError, ValueError):
    """Matrix/vector shapes are inconsistent."""


class NotSymmetric(LqgError, ValueError):
    """A weight matrix is asymmetric beyond tolerance."""


class NotPositiveDefinite(LqgError, ValueError):
    """A weight matrix violates its (semi)definiteness requirement."""


class ConvergenceFailure(LqgError):
    """A dense eigensolver or iteration failed to converge."""


class NotStabilizable(LqgError):
    """PBH test failed: an unstable mode is uncontrollable."""


class NotDetectable(LqgError):
    """PBH test failed: an unstable mode is unobservable."""


class NoStabilizingSolution(LqgError):
    """Riccati iteration converged to a non-stabilizing fixed point (or not at all)."""


class IllConditioned(LqgError):
    """An eigenvalue sits inside the marginal band around the unit circle."""


class UnstableF(LqgError):
    """Lyapunov coefficient matrix has spectral radius >= 1."""


class NoConvergence(LqgError):
    """Best-response iteration exceeded the iteration budget (inconclusive)."""


class MSingular(LqgError):
    """The stationarity block matrix is numerically singular at the candidate."""


class StabilityViolation(LqgError):
    """Candidate equilibrium gains do not stabilize the closed loop."""


class InternalContradiction(LqgError):
    """A condition guaranteed by theory failed numerically; indicates a bug or
    a violated hypothesis upstream."""


class AssumptionViolation(LqgError):
    """A structural assumption required by the solver does not hold."""


class DivergenceDetected(LqgError):
    """A rollout left the numerically meaningful range."""


class SingularA(LqgError):
    """The state matrix is singular; the state/costate matrix needs A^{-T}."""


class SchurFailure(LqgError):
    """Ordered real Schur decomposition failed."""


class Assumption4Violated(LqgError):
    """The state/costate matrix does not have a clean n-dimensional stable
    invariant subspace complementary to the costate coordinate planes."""


class ResidualTooLarge(LqgError):
    """A solution candidate failed its defining-equation residual check."""


class UnstableClosedLoop(LqgError):
    """Exact cost evaluation requested for gains that do not stabilize."""


class EmptyGrid(LqgError, ValueError):
    """A gain sweep was requested with no grid points."""


class SchemaError(LqgError, ValueError):
    """An input file does not match the documented schema."""
