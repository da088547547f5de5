"""Exception classes shared across the library."""


class RecoError(Exception):
    """Base class for all errors raised by this package."""


class TensorFormatError(RecoError, ValueError):
    """A tensor file (or byte stream) violates the binary format contract."""


class ManifestError(RecoError, ValueError):
    """An archive or index manifest is malformed or references missing files."""


class DegenerateInputError(RecoError, ValueError):
    """An input carries no usable signal (e.g. an all-zero feature map)."""


class ConfigurationError(RecoError, ValueError):
    """A configuration document is inconsistent or incomplete."""


class PipelineStageError(RecoError, RuntimeError):
    """A pipeline stage failed; carries the stage name and offending concept."""

    def __init__(self, stage: str, concept: str | None, cause: BaseException):
        self.stage = stage
        self.concept = concept
        self.cause = cause
        where = f"stage '{stage}'" + (f", concept '{concept}'" if concept else "")
        super().__init__(f"{where}: {cause}")
