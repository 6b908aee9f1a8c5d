"""Exception hierarchy shared across the package."""

from __future__ import annotations


class CbfgenError(Exception):
    """Base class for all package-specific errors."""


class TokenRangeError(CbfgenError, ValueError):
    """A token id falls outside the vocabulary range [1, N]."""


class NormalizationError(CbfgenError):
    """A probability vector with no positive mass cannot be normalized.

    During generation this signals a stalled filter: everything the filter
    let through carried zero prior probability.
    """


class PredictorContractError(CbfgenError):
    """A logit source violated its contract (wrong length, NaN or inf logits)."""


class ConstraintEvaluationError(CbfgenError):
    """The constraint function failed or returned a non-finite value."""


class FilterStalled(CbfgenError):
    """No candidate token satisfied the barrier condition within the scan budget.

    Carries the :class:`~cbfgen.filters.FilterDecision` for the failed step so
    callers can inspect exactly which candidates were examined and rejected.
    """

    def __init__(self, message: str, decision=None):
        super().__init__(message)
        self.decision = decision


class RemoteError(CbfgenError):
    """Transport-level failure talking to the inference bridge, after retries."""


class ProtocolError(CbfgenError):
    """The inference bridge returned a malformed or out-of-contract response."""


class SpecValidationError(CbfgenError, ValueError):
    """An experiment spec file failed validation.

    The message names the offending field.
    """
