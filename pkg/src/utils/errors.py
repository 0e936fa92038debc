"""
Exception types raised across the lab
"""


class LayoutError(ValueError):
    """Layout file cannot be parsed or violates a geometry invariant"""


class ConfigError(ValueError):
    """Pipeline configuration is malformed"""


class CoverageError(ValueError):
    """Requested time window is not covered by the available data"""


class DegenerateInputError(ValueError):
    """Input is empty, constant or otherwise outside an operation's domain"""


class ShapeError(ValueError):
    """Model input does not match the configured shapes"""


class PipelineStageError(RuntimeError):
    """A pipeline stage failed; carries the stage name"""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage} failed: {cause}")
