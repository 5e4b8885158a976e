"""Exact lookup-table backend, used as the test oracle.

The table declares a vocabulary and explicit conditional distributions keyed
by (source text, target prefix).  Scoring is a pure lookup: no smoothing, no
backoff.  A token present in the vocabulary but absent from a context's
distribution has probability zero and is clamped to the floor.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Mapping

from ..errors import BackendError, ValidationError
from .core import (
    EOS,
    Backend,
    BackendDescriptor,
    ScoredSequence,
    floor_logprob,
    whitespace_tokenize,
)
import math

Context = tuple[str, tuple[str, ...]]

DIST_SUM_TOL = 1e-9


class TableBackend(Backend):
    def __init__(
        self,
        vocabulary: Iterable[str],
        entries: Mapping[Context, Mapping[str, float]],
        name: str = "table",
    ):
        self.vocabulary = frozenset(vocabulary) | {EOS}
        self.entries: dict[Context, dict[str, float]] = {}
        for (source, prefix), dist in entries.items():
            total = 0.0
            for token, prob in dist.items():
                if token not in self.vocabulary:
                    raise ValidationError(
                        f"table entry for source={source!r} prefix={prefix}: "
                        f"token {token!r} not in vocabulary"
                    )
                if prob < 0.0:
                    raise ValidationError(f"negative probability for token {token!r}")
                total += prob
            if abs(total - 1.0) > DIST_SUM_TOL:
                raise ValidationError(
                    f"table entry for source={source!r} prefix={prefix}: "
                    f"distribution sums to {total!r}, not 1"
                )
            self.entries[(source, tuple(prefix))] = dict(dist)
        self._descriptor = BackendDescriptor(name=name, kind="table", tokenizer_id="whitespace-v1")

    @classmethod
    def from_file(cls, path: str | Path, name: str = "table") -> "TableBackend":
        with Path(path).open("r", encoding="utf-8") as fh:
            obj = json.load(fh)
        try:
            vocab = obj["vocabulary"]
            raw_entries = obj["entries"]
        except KeyError as exc:
            raise ValidationError(f"{path}: missing field {exc}") from exc
        entries = {
            (e["source"], tuple(e["context"])): e["dist"] for e in raw_entries
        }
        return cls(vocab, entries, name=name)

    @property
    def descriptor(self) -> BackendDescriptor:
        return self._descriptor

    def tokenize(self, text: str) -> list[str]:
        return whitespace_tokenize(text)

    def conditional(self, source: str, prefix: tuple[str, ...], token: str) -> float:
        """Raw probability of one token in one context (0 when unlisted)."""
        dist = self.entries.get((source, prefix))
        if dist is None:
            raise BackendError(
                f"no table entry for source={source!r} prefix={prefix}"
            )
        return dist.get(token, 0.0)

    def token_log_probs(self, source: str, target: str) -> ScoredSequence:
        tokens = self.tokenize(target)
        for tok in tokens:
            if tok not in self.vocabulary:
                raise BackendError(f"token {tok!r} not in table vocabulary")
        seq = tokens + [EOS]
        logprobs = []
        for t, tok in enumerate(seq):
            p = self.conditional(source, tuple(seq[:t]), tok)
            logprobs.append(floor_logprob(math.log(p)) if p > 0.0 else floor_logprob(float("-inf")))
        return ScoredSequence(tuple(seq), tuple(logprobs))
