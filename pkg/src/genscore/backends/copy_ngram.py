"""Smoothed copy-aware bigram language model.

A desk-scale stand-in for a neural seq2seq scorer: the conditional
probability of each target token interpolates a copy distribution over the
source tokens, an additively smoothed bigram, and an additively smoothed
unigram.  Tokens outside the training vocabulary map to a reserved UNK
symbol so the model has total support.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..errors import ValidationError
from .core import (
    BOS,
    EOS,
    UNK,
    Backend,
    BackendDescriptor,
    ScoredSequence,
    floor_logprob,
    whitespace_tokenize,
)

LAMBDA_SUM_TOL = 1e-12

DEFAULT_ALPHA = 0.1
DEFAULT_LAMBDA_COPY = 0.5
DEFAULT_LAMBDA_BI = 0.3
DEFAULT_LAMBDA_UNI = 0.2


@dataclass(frozen=True)
class CopyNgramModel:
    vocabulary: frozenset[str]  # includes EOS and UNK
    unigram_counts: dict[str, int]
    bigram_counts: dict[tuple[str, str], int]
    context_counts: dict[str, int]  # includes BOS
    total_unigrams: int
    alpha: float
    lambda_copy: float
    lambda_bi: float
    lambda_uni: float

    @property
    def vocab_size(self) -> int:
        return len(self.vocabulary)

    def map_token(self, token: str) -> str:
        return token if token in self.vocabulary else UNK

    def p_copy(self, token: str, source_tokens: Sequence[str]) -> float:
        count = sum(1 for t in source_tokens if t == token)
        return (count + self.alpha) / (len(source_tokens) + self.alpha * self.vocab_size)

    def p_bigram(self, token: str, prev: str) -> float:
        num = self.bigram_counts.get((prev, token), 0) + self.alpha
        den = self.context_counts.get(prev, 0) + self.alpha * self.vocab_size
        return num / den

    def p_unigram(self, token: str) -> float:
        num = self.unigram_counts.get(token, 0) + self.alpha
        den = self.total_unigrams + self.alpha * self.vocab_size
        return num / den

    def conditional(self, token: str, prev: str, source_tokens: Sequence[str]) -> float:
        """Interpolated probability; token and prev must be in-vocabulary (or BOS)."""
        return (
            self.lambda_copy * self.p_copy(token, source_tokens)
            + self.lambda_bi * self.p_bigram(token, prev)
            + self.lambda_uni * self.p_unigram(token)
        )

    def distribution(self, prev: str, source_tokens: Sequence[str]) -> dict[str, float]:
        """Full conditional distribution over the vocabulary for one context."""
        return {tok: self.conditional(tok, prev, source_tokens) for tok in sorted(self.vocabulary)}


def train_copy_ngram(
    corpus: Iterable[tuple[str, str]],
    alpha: float = DEFAULT_ALPHA,
    lambda_copy: float = DEFAULT_LAMBDA_COPY,
    lambda_bi: float = DEFAULT_LAMBDA_BI,
    lambda_uni: float = DEFAULT_LAMBDA_UNI,
) -> CopyNgramModel:
    """Estimate counts from a parallel corpus of (source, target) strings."""
    pairs = list(corpus)
    if not pairs:
        raise ValidationError("training corpus is empty")
    if alpha <= 0:
        raise ValidationError(f"alpha must be positive, got {alpha}")
    for lam, name in ((lambda_copy, "lambda_copy"), (lambda_bi, "lambda_bi"), (lambda_uni, "lambda_uni")):
        if lam < 0:
            raise ValidationError(f"{name} must be non-negative, got {lam}")
    if abs(lambda_copy + lambda_bi + lambda_uni - 1.0) > LAMBDA_SUM_TOL:
        raise ValidationError(
            f"interpolation weights must sum to 1, got {lambda_copy + lambda_bi + lambda_uni!r}"
        )

    unigrams: Counter[str] = Counter()
    bigrams: Counter[tuple[str, str]] = Counter()
    contexts: Counter[str] = Counter()
    vocab: set[str] = {EOS, UNK}
    for source, target in pairs:
        vocab.update(whitespace_tokenize(source))
        seq = whitespace_tokenize(target) + [EOS]
        vocab.update(seq)
        prev = BOS
        for tok in seq:
            unigrams[tok] += 1
            bigrams[(prev, tok)] += 1
            contexts[prev] += 1
            prev = tok
    return CopyNgramModel(
        vocabulary=frozenset(vocab),
        unigram_counts=dict(unigrams),
        bigram_counts=dict(bigrams),
        context_counts=dict(contexts),
        total_unigrams=sum(unigrams.values()),
        alpha=alpha,
        lambda_copy=lambda_copy,
        lambda_bi=lambda_bi,
        lambda_uni=lambda_uni,
    )


class CopyNgramBackend(Backend):
    def __init__(self, model: CopyNgramModel, name: str = "copy-ngram"):
        self.model = model
        self._descriptor = BackendDescriptor(
            name=name, kind="copy-ngram", tokenizer_id="whitespace-v1"
        )

    @classmethod
    def train(cls, corpus: Iterable[tuple[str, str]], **kwargs) -> "CopyNgramBackend":
        return cls(train_copy_ngram(corpus, **kwargs))

    @property
    def descriptor(self) -> BackendDescriptor:
        return self._descriptor

    def tokenize(self, text: str) -> list[str]:
        return whitespace_tokenize(text)

    def token_log_probs(self, source: str, target: str) -> ScoredSequence:
        model = self.model
        src = [model.map_token(t) for t in self.tokenize(source)]
        seq = [model.map_token(t) for t in self.tokenize(target)] + [EOS]
        logprobs = []
        prev = BOS
        for tok in seq:
            p = model.conditional(tok, prev, src)
            logprobs.append(floor_logprob(math.log(p)))
            prev = tok
        return ScoredSequence(tuple(seq), tuple(logprobs))
