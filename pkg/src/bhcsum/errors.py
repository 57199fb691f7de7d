"""Exception hierarchy shared across the pipeline."""


class BHCError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 1


class ConfigError(BHCError):
    exit_code = 2


class DataError(BHCError):
    exit_code = 3


class EmptyAdmission(DataError):
    pass


class TooFewAdmissions(DataError):
    pass


class MissingReference(DataError):
    pass


class EmptyTraining(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class AlignmentError(DataError):
    pass


class MisalignedGuidance(DataError):
    pass


class CheckpointError(DataError):
    pass


class TrainingDivergence(BHCError):
    exit_code = 4
