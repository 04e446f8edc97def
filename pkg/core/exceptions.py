"""
Error hierarchy shared by every simulation app.
"""


class SpikeRegError(Exception):
    """Base class for all simulation errors"""


class DomainError(SpikeRegError, ValueError):
    """Numeric input outside the operation's domain"""


class ConfigurationError(SpikeRegError, ValueError):
    """Experiment or network configuration that cannot be run"""


class SolverError(SpikeRegError):
    """
    Riccati solve or matrix inversion failure.

    ``residual`` carries the CARE residual when one could be computed.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InstabilityError(SpikeRegError):
    """
    Numerical instability during a run (firing-loop overrun, non-finite state).

    ``step`` is the simulation step index at which it was detected.
    """

    def __init__(self, message, step=None):
        super().__init__(f"{message} (step {step})" if step is not None else message)
        self.step = step
