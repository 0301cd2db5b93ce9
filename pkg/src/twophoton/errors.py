class SolverError(RuntimeError):
    """Base class for numerical failures reported per parameter point."""


class SingularSteadyStateError(SolverError):
    """The reduced steady-state system has no unique solution."""


class HarmonicTruncationError(SolverError):
    """Doubling the harmonic cutoff changed the solution by more than the tolerance."""


class IntegrationError(SolverError):
    """Fixed-step propagation drifted in trace or produced non-finite values."""


class SpectralExpansionError(SolverError):
    """Eigen-expansion of the propagation generator failed to reconstruct G2."""
