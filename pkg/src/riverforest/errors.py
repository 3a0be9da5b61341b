"""Exception hierarchy shared across the package.

The three intermediate bases map one-to-one onto CLI exit codes:
DataError -> 2, TrainingError -> 3, ModelFormatError -> 4.
"""


class RiverForestError(Exception):
    """Base class for every error raised by this package."""


class DataError(RiverForestError):
    """Input or dataset problem (bad CSV, bad matrix, bad distribution)."""


class TrainingError(RiverForestError):
    """Training or cross-validation cannot proceed."""


class ModelFormatError(RiverForestError):
    """A serialized model is unreadable or structurally invalid."""


# -- dataset ingestion and construction --------------------------------------

class MissingColumn(DataError):
    pass


class UnknownColumn(DataError):
    pass


class MalformedValue(DataError):
    pass


class UnknownLabel(DataError):
    pass


class EmptyDataset(DataError):
    pass


class UnlabeledData(DataError):
    pass


class MissingDate(DataError):
    pass


class DegenerateSplit(DataError):
    pass


class InvalidDistribution(DataError):
    pass


# -- evaluation ---------------------------------------------------------------

class EmptyCounts(DataError):
    pass


class UnknownClass(DataError):
    pass


class LengthMismatch(DataError):
    pass


class OutOfRange(DataError):
    pass


class MalformedMatrix(DataError):
    pass


# -- training and cross-validation --------------------------------------------

class SingleClassDataset(TrainingError):
    pass


class InsufficientClassMembers(TrainingError):
    pass


class DegenerateFold(TrainingError):
    pass


# -- model persistence ---------------------------------------------------------

class FormatVersionMismatch(ModelFormatError):
    pass


class CorruptModel(ModelFormatError):
    pass
