"""Exception types shared across the package."""


class ContractError(ValueError):
    """An argument violates a documented precondition (shape, finiteness, range)."""


class SingularConfigurationError(RuntimeError):
    """The joint-space inertia matrix is numerically singular at some configuration."""

    def __init__(self, q, condition=None):
        self.q = q
        self.condition = condition
        detail = f", condition number {condition:.3e}" if condition is not None else ""
        super().__init__(f"inertia matrix singular at q={q!r}{detail}")


class SimulationFault(RuntimeError):
    """The plant received a non-finite command and the run was halted."""

    def __init__(self, message, time=None, trial=None):
        self.time = time
        self.trial = trial
        super().__init__(message)


class SettlingError(RuntimeError):
    """A force trace never satisfied the settling criterion."""

    def __init__(self, message, last_value=None):
        self.last_value = last_value
        super().__init__(message)


class TraceError(ValueError):
    """A time-series trace is empty or malformed."""


class ConfigError(ValueError):
    """A suite/chain file failed to parse or validate; message names the offending field."""


class ConfigMismatchError(ValueError):
    """Two reports were compared that do not come from matching scenario configurations."""
