"""Conditional log-probability providers.

A backend factorizes the probability of a target text given a source text
into per-token conditionals and reports them as a ScoredSequence.  Three
implementations ship: an exact lookup table (test oracle), a trainable
smoothed copy-aware n-gram model, and a client for external model servers.
"""

from .core import (
    BOS,
    EOS,
    LOGPROB_FLOOR,
    UNK,
    Backend,
    BackendDescriptor,
    ScoredSequence,
    floor_logprob,
    whitespace_tokenize,
)
from .copy_ngram import CopyNgramBackend, CopyNgramModel, train_copy_ngram
from .external import ExternalBackend, validate_score_response
from .table import TableBackend

__all__ = [
    "BOS",
    "EOS",
    "UNK",
    "LOGPROB_FLOOR",
    "Backend",
    "BackendDescriptor",
    "ScoredSequence",
    "floor_logprob",
    "whitespace_tokenize",
    "TableBackend",
    "CopyNgramBackend",
    "CopyNgramModel",
    "train_copy_ngram",
    "ExternalBackend",
    "validate_score_response",
]
