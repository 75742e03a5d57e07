"""Exception types shared across the package."""


class TssLabError(Exception):
    """Base class for all tss-lab errors."""


class SingularDenominator(TssLabError):
    """The PLL loop denominator 1 - kp*Xg*Isd/ws fell below the guard.

    Signals a physically invalid parameter set, not a numeric edge to
    integrate through.
    """

    def __init__(self, denominator: float, guard: float):
        self.denominator = denominator
        self.guard = guard
        super().__init__(
            f"loop denominator {denominator:.6g} below guard {guard:.6g}"
        )


class NoEquilibrium(TssLabError):
    """|U0| >= Ug: the current injection boundary is violated, no equilibrium."""


class NoPrefaultEquilibrium(TssLabError):
    """The pre-fault stage admits no equilibrium; the scenario cannot start."""


class AngleBeyondCritical(TssLabError):
    """Clearing angle is past the critical angle; decelerating area exhausted."""


class NonPositiveBase(TssLabError):
    """Per-unit conversion requires positive MVA and kV bases."""


class CertificationViolation(TssLabError):
    """A state certified stable by the index diverged in simulation."""

    def __init__(self, states, message="certified state diverged in simulation"):
        self.states = states
        super().__init__(f"{message}: {len(states)} offending state(s)")


class ConfigError(TssLabError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    """Malformed configuration document."""


class ValidationError(ConfigError):
    """Configuration violates an invariant; names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
