"""Exception hierarchy for the decoding engine."""

from __future__ import annotations


class DecodingError(Exception):
    """Base class for all engine errors."""


# -- state ------------------------------------------------------------------

class PositionNotMasked(DecodingError):
    """A position selected for unmasking is not currently masked."""


class MissingPrediction(DecodingError):
    """A selected position has no entry in the prediction matrix."""


# -- metrics ----------------------------------------------------------------

class InsufficientTopK(DecodingError):
    """The distribution carries too few entries for the requested metric."""


class EmptySelection(DecodingError):
    """A step score was requested for an empty position set."""


class NoTokensInScope(DecodingError):
    """No decoded tokens precede the delimiter."""


class EmptyTrace(DecodingError):
    """The trace decoded no tokens."""


# -- subset search ----------------------------------------------------------

class SubsetTooLarge(DecodingError):
    """Requested subset size exceeds the number of available scores."""


class TooManyCombinations(DecodingError):
    """Brute-force enumeration would exceed its safety cap."""


# -- schedulers -------------------------------------------------------------

class NothingMasked(DecodingError):
    """A step was requested on a candidate with no masked positions."""


class EmptyPool(DecodingError):
    """Beam update received an empty candidate pool."""


class EmptyBeam(DecodingError):
    """A scheduler step received an empty beam."""


class BackendFailure(DecodingError):
    """A model backend failed; carries the step context."""


# -- backends / protocol ----------------------------------------------------

class LengthMismatch(DecodingError):
    """State length does not match the planted instance length."""


class ProtocolError(DecodingError):
    """Malformed frame, id mismatch, or invariant violation on the wire."""


class BackendError(DecodingError):
    """The worker reported a failure for a request."""


class WorkerTimeout(DecodingError):
    """The worker did not answer within the deadline."""


# -- harness ----------------------------------------------------------------

class TooLong(DecodingError):
    """Exhaustive order enumeration was requested beyond its length cap."""
