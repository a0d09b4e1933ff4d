"""Exception hierarchy shared by every module of the package."""


class AutopilotError(Exception):
    """Base class for all faults raised by this package."""


class ConfigError(AutopilotError, ValueError):
    """Invalid or inconsistent configuration."""


class RangeFault(AutopilotError):
    """Angle of attack left the valid range of an aerodynamic coefficient."""

    def __init__(self, coefficient: str, alpha: float, valid: tuple[float, float]):
        self.coefficient = coefficient
        self.alpha = alpha
        self.valid = valid
        super().__init__(
            f"{coefficient}: alpha={alpha:.6g} rad outside valid range "
            f"[{valid[0]:.6g}, {valid[1]:.6g}]"
        )


class NumericFault(AutopilotError):
    """Non-finite input or state."""


class AuthorityFault(AutopilotError):
    """Control effectiveness g3 fell below the configured floor."""


class SynthesisFault(AutopilotError):
    """Outer-loop gain synthesis precondition violated."""


class IdentificationFault(AutopilotError):
    """Inner-loop model identification failed (trace did not settle)."""


class AnalysisFault(AutopilotError):
    """Degenerate linear model in zero computation."""


class SimulationFault(AutopilotError):
    """A fault raised during a closed-loop run, tagged with the step index."""

    def __init__(self, step: int, time: float, cause: Exception):
        self.step = step
        self.time = time
        self.cause = cause
        super().__init__(f"step {step} (t={time:.6g} s): {type(cause).__name__}: {cause}")
