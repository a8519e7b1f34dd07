"""Exception hierarchy shared by the solver, analysis and simulation modules."""


class SwitchingError(Exception):
    """Base class for every error raised by this package."""


class ModelError(SwitchingError, ValueError):
    """A domain type was built with data that breaks its invariants."""


class ConfigError(SwitchingError, ValueError):
    """The experiment configuration is malformed or out of range."""


class ConvergenceError(SwitchingError):
    def __init__(self, what, iterations, residual):
        self.what = what
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"{what} did not converge after {iterations} iterations "
            f"(last residual {residual:.3e})"
        )


class ChainStructureError(SwitchingError):
    """The induced chain has no unique, aperiodic stationary regime."""

    def __init__(self, check, message):
        self.check = check
        super().__init__(f"{check} check failed: {message}")


class LambdaSignError(SwitchingError):
    def __init__(self, failed_sides, numerator, denominator):
        self.failed_sides = tuple(failed_sides)
        self.numerator = numerator
        self.denominator = denominator
        sides = " and ".join(f"{side} nonpositive" for side in self.failed_sides)
        super().__init__(
            f"{sides} (numerator={numerator:.6g}, denominator={denominator:.6g})"
        )


class MixingBoundViolation(SwitchingError):
    def __init__(self, bound, state, k, gap, limit):
        self.bound = bound
        self.witness = (state, k)
        self.gap = gap
        self.limit = limit
        super().__init__(
            f"{bound} bound violated at start state {state}, k={k}: "
            f"gap {gap:.6g} > bound {limit:.6g}"
        )


class ImpossibleTransitionError(SwitchingError):
    def __init__(self, x, x_next):
        self.transition = (x, x_next)
        super().__init__(f"impossible transition {x} -> {x_next}")


class ThresholdStructureError(SwitchingError):
    """Stopping set of some state is not an upper interval of the grid."""


class TruncationError(SwitchingError):
    """Too many episodes never triggered the switch before the horizon."""


class StageError(SwitchingError):
    """Wraps a numerical failure with the name of the pipeline stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
