"""Exception hierarchy shared across the pipeline."""


class PipelineError(Exception):
    """Base class for all envinfer errors."""


class DataError(PipelineError):
    """Problems with input data or data files."""


class ConfigError(PipelineError):
    """Invalid configuration or arguments."""


class NumericError(PipelineError):
    """Numerical failure during training."""


# --- IDX parsing / ingest ---

class BadMagic(DataError):
    pass


class TruncatedPayload(DataError):
    pass


class TrailingBytes(DataError):
    pass


class LabelOutOfRange(DataError):
    pass


class MissingFile(DataError):
    pass


class CountMismatch(DataError):
    pass


# --- dataset / model ---

class EmptyDataset(DataError):
    pass


class BadWidths(ConfigError):
    pass


class ShapeMismatch(ConfigError):
    pass


class DivergedLoss(NumericError):
    pass


# --- clustering / environments ---

class TooFewPoints(DataError):
    pass


class LengthMismatch(ConfigError):
    pass


class EmptyGroup(DataError):
    pass


class NoMinorities(DataError):
    pass


class TooFewEnvironments(ConfigError):
    pass


class GridMismatch(ConfigError):
    pass


# --- persistence ---

class ArtifactError(PipelineError):
    pass


class WrongKind(ArtifactError):
    pass


class UnsupportedVersion(ArtifactError):
    pass


class CorruptPayload(ArtifactError):
    pass
