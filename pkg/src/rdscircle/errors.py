"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 2, StructureEstimationError -> 3,
ConjugacyConstructionError -> 4, NumericError -> 5.
"""


class RdsCircleError(Exception):
    """Base class for all library errors."""


class ConfigError(RdsCircleError):
    """Bad run configuration or bad usage of a public entry point."""


class UsageError(ConfigError):
    """Operation called on inputs that violate its contract (e.g. mismatched noise)."""


class DomainError(UsageError):
    """Noise point outside the family's noise box."""


class NumericError(RdsCircleError):
    """A numerical routine failed to converge or lost continuity."""


class StructureEstimationError(RdsCircleError):
    """Minimal-structure estimation produced inconsistent results."""


class AntonovInconclusiveError(StructureEstimationError):
    """Trichotomy classification could not collapse the factor system."""


class ConjugacyConstructionError(RdsCircleError):
    """Conjugacy map construction failed (typically: window too short)."""


class GenericityError(ConjugacyConstructionError):
    """Every step maps the anchors exactly; perturbation has nothing to work with."""


class PerturbationPreconditionError(RdsCircleError):
    """Sequence perturbation hypothesis violated at a named index."""

    def __init__(self, index, message=""):
        self.index = index
        super().__init__(message or f"perturbation hypothesis violated at index {index}")


class PullbackDiagnosticError(RdsCircleError):
    """Pullback terms are not monotone; anchor data is wrong or input not invariant."""


class FactorCommutationError(UsageError):
    """Requested factor order does not commute with the family."""
