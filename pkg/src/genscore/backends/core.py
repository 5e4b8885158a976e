"""Shared backend contract: scored sequences, descriptors, tokenization."""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

from ..errors import ValidationError

EOS = "<eos>"
UNK = "<unk>"
BOS = "<bos>"  # context marker only, never emitted

# Per-token log-probabilities below this are clamped so that sums over
# out-of-support tokens stay finite.
LOGPROB_FLOOR = math.log(1e-12)


def floor_logprob(value: float) -> float:
    """Clamp a raw log-probability into [LOGPROB_FLOOR, 0]."""
    if value > 0.0:
        return 0.0
    if value < LOGPROB_FLOOR or not math.isfinite(value):
        return LOGPROB_FLOOR
    return value


def whitespace_tokenize(text: str) -> list[str]:
    """Split on whitespace runs, trimming the ends.  Never yields EOS."""
    return text.split()


@dataclass(frozen=True)
class ScoredSequence:
    """Target tokens (ending with EOS) and their conditional log-probs."""

    tokens: tuple[str, ...]
    logprobs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.logprobs):
            raise ValidationError(
                f"token/logprob length mismatch: {len(self.tokens)} vs {len(self.logprobs)}"
            )
        if len(self.tokens) < 1:
            raise ValidationError("a scored sequence must contain at least the EOS token")
        for lp in self.logprobs:
            if not math.isfinite(lp) or lp > 0.0:
                raise ValidationError(f"log-probability {lp!r} outside (-inf, 0] after flooring")

    @property
    def total(self) -> float:
        return sum(self.logprobs)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class BackendDescriptor:
    name: str
    kind: str  # table | copy-ngram | external
    tokenizer_id: str


class Backend(ABC):
    """Provider of per-token conditional log-probabilities."""

    @property
    @abstractmethod
    def descriptor(self) -> BackendDescriptor: ...

    @abstractmethod
    def tokenize(self, text: str) -> list[str]: ...

    @abstractmethod
    def token_log_probs(self, source: str, target: str) -> ScoredSequence:
        """Score every target token plus the trailing EOS, left to right."""
