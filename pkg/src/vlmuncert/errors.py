"""Exception types raised across the package.

Every error is a subclass of :class:`VlmUncertError`, named after the
contract it enforces rather than the module that raises it.
"""

from __future__ import annotations

__all__ = [
    "VlmUncertError",
    "MissingFile",
    "MagicMismatch",
    "DimensionMismatch",
    "NonFiniteValue",
    "LabelOutOfRange",
    "LabelCountMismatch",
    "EmptyDataset",
    "UnknownSplit",
    "InvalidSplit",
    "ZeroNormRow",
    "IoFailure",
    "RankTooLow",
    "DegenerateInput",
    "TooFewSamples",
    "EmptyTrainSplit",
    "UnknownClass",
    "ZeroCount",
    "KTooLarge",
    "EmptyPool",
    "SingleClassOnly",
    "NoPositives",
    "EmptyInput",
]


class VlmUncertError(Exception):
    """Base class for all errors raised by this package."""


# --- storage / dataset validation ---

class MissingFile(VlmUncertError):
    """A manifest or a file it references does not exist."""


class MagicMismatch(VlmUncertError):
    """A binary file does not start with the expected magic/version header."""


class DimensionMismatch(VlmUncertError):
    """Matrix dimensions are inconsistent with each other or with a model."""


class NonFiniteValue(VlmUncertError):
    """An embedding payload contains NaN or Inf."""


class LabelOutOfRange(VlmUncertError):
    """A label index is not covered by the class-name list."""


class LabelCountMismatch(VlmUncertError):
    """Label file row count differs from the embedding row count."""


class EmptyDataset(VlmUncertError):
    """A dataset with zero rows was supplied where rows are required."""


class UnknownSplit(VlmUncertError):
    """A named split does not exist in the dataset."""


class InvalidSplit(VlmUncertError):
    """Split indices are duplicated or out of range."""


class ZeroNormRow(VlmUncertError):
    """An all-zero row cannot be L2-normalized."""


class IoFailure(VlmUncertError):
    """An underlying filesystem write or read failed."""


# --- projection ---

class RankTooLow(VlmUncertError):
    """Requested component count exceeds the available data rank."""


class DegenerateInput(VlmUncertError):
    """Too few rows or a non-positive component count for a fit."""


# --- gaussian fitting / scoring ---

class TooFewSamples(VlmUncertError):
    """An estimator needs more samples than were provided."""


class EmptyTrainSplit(VlmUncertError):
    """No usable training rows to build a dictionary from."""


class UnknownClass(VlmUncertError):
    """A queried class has no entry in the dictionary."""


# --- label shift ---

class ZeroCount(VlmUncertError):
    """Class counts for pool-size selection must be positive."""


class KTooLarge(VlmUncertError):
    """Requested retrieval depth exceeds the dictionary class count."""


class EmptyPool(VlmUncertError):
    """A superclass pool contains no training rows."""


# --- metrics ---

class SingleClassOnly(VlmUncertError):
    """A ranking metric needs both correct and erroneous samples."""


class NoPositives(VlmUncertError):
    """Precision-recall needs at least one correct prediction."""


class EmptyInput(VlmUncertError):
    """A metric was invoked on an empty sample list."""
