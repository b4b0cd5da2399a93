class PipelineError(Exception):
    """Fatal pipeline error. ``kind`` is a short machine-readable tag."""

    kind = "pipeline"


class ConfigError(PipelineError):
    kind = "config"


class InputError(PipelineError):
    kind = "input"


class RecordError(ValueError):
    """A single record or field failed validation. Never fatal on its own."""

    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason
