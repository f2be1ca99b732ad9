"""Exception hierarchy for the renormalization engine."""


class RenormLabError(Exception):
    """Base class for engine failures."""


class ConfigError(RenormLabError):
    """Run configuration could not be parsed or violates a budget."""


class DomainError(RenormLabError, ValueError):
    """A point lies outside the domain of a map."""


class NoSolutionError(RenormLabError, ValueError):
    """Requested value is outside the range of an inverse branch."""


class RefitError(RenormLabError):
    """Least-squares refit residual too large for the polynomial degree."""


class FixedPointError(RenormLabError):
    """The fixed-point solver stalled or was given an insufficient degree."""


class StraighteningError(RenormLabError):
    """The inverse of the horizontal-like map failed to contract."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (achieved residual {residual:.3e})")
        self.residual = residual


class ConjugationError(RenormLabError):
    """A coordinate change could not be inverted."""


class BudgetError(RenormLabError, ValueError):
    """Perturbation norms exceed the declared budget."""


class CascadeError(RenormLabError):
    """Renormalization failed at a given level of the cascade."""

    def __init__(self, level, cause):
        super().__init__(f"level {level}: {cause}")
        self.level = level
        self.cause = cause


class DegenerateMapError(RenormLabError):
    """Map has zero Jacobian where a diffeomorphism is required."""


class TipDepthError(RenormLabError):
    """Cascade too shallow to locate a tip to the requested tolerance."""

    def __init__(self, level, radius, tol):
        super().__init__(f"tip of level {level} known to {radius:.3e} (> {tol:.1e})")
        self.level = level
        self.radius = radius


class TipDriftError(RenormLabError):
    """Limit and Newton estimates of a critical point disagree."""


class AdequacyError(RenormLabError):
    """Lattice refinement changed a sampled quantity too much."""


class HypothesisError(RenormLabError, ValueError):
    """Arguments outside the hypotheses of an estimate."""
