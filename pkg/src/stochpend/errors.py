"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value violates a documented constraint."""


class SampleLengthError(ValueError):
    """A sample is too short for the requested statistic."""


class BlowUpError(RuntimeError):
    """An integration produced a non-finite state.

    Carries the index of the first offending grid step.
    """

    def __init__(self, step_index: int, message: str | None = None):
        self.step_index = step_index
        super().__init__(message or f"non-finite state at grid step {step_index}")
