"""Exception hierarchy shared across the package.

Validation failures (bad config, broken invariants, dimension mismatches)
are kept distinct from runtime failures (integration blow-ups) so the CLI
can map them to different exit codes.
"""


class BklError(Exception):
    """Base class for all package errors."""


class ValidationError(BklError):
    """Invalid input: config values, shapes, or violated type invariants."""


class IntegrationError(BklError):
    """Integrator produced a non-finite state.

    Attributes:
        step: index of the failing step within the segment.
        time: simulation time at which the failure was detected.
    """

    def __init__(self, message: str, step: int, time: float):
        super().__init__(message)
        self.step = step
        self.time = time
