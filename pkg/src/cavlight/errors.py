"""Exception classes shared across the package.

Exit-code mapping used by the CLI: configuration errors -> 2,
convergence-class failures -> 3, truncation violations -> 4.
"""


class CavlightError(Exception):
    """Base class for all package errors."""


class DimensionError(CavlightError):
    """Invalid or mismatched Hilbert-space dimensions."""


class UnknownLabelError(CavlightError, KeyError):
    """A factor label that does not exist in the space."""


class ConfigError(CavlightError):
    """Bad run configuration (schema violation, unknown keys, bad preset)."""

    exit_code = 2


class ConvergenceError(CavlightError):
    """An iterative solver failed to reach its tolerance."""

    exit_code = 3

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NonUniqueSteadyStateError(ConvergenceError):
    """The Liouvillian null space has dimension > 1."""


class StiffnessError(ConvergenceError):
    """Adaptive step size underflowed during time integration."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class DegenerateEnvelopeError(ConvergenceError):
    """Correlation function is numerically zero; no temporal mode exists."""


class TruncationError(CavlightError):
    """Fock-space truncation violated beyond the hard limit."""

    exit_code = 4


class PhaseSpaceRangeError(CavlightError):
    """Wigner grid leaves too much state mass outside its range (strict mode)."""

    exit_code = 4
