"""Classical reference-based metrics: BLEU, ROUGE-1/2/L, CHRF.

Self-contained implementations with a deterministic tokenizer (whitespace
split with punctuation separated); exact parity with external reference
implementations is not a goal, the variants are documented here.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from typing import Sequence

from .data import MetricScoreTable, TextInstance
from .errors import ValidationError

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Whitespace tokenization with punctuation split into separate tokens."""
    return _TOKEN_RE.findall(text)


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _bleu_stats(hyp_tokens, refs_tokens, max_order):
    """Clipped match and candidate counts per order, plus lengths."""
    matches = [0] * max_order
    totals = [0] * max_order
    for n in range(1, max_order + 1):
        hyp_ngrams = ngrams(hyp_tokens, n)
        max_ref = Counter()
        for ref in refs_tokens:
            for gram, count in ngrams(ref, n).items():
                max_ref[gram] = max(max_ref[gram], count)
        matches[n - 1] = sum(min(c, max_ref[g]) for g, c in hyp_ngrams.items())
        totals[n - 1] = max(0, len(hyp_tokens) - n + 1)
    hyp_len = len(hyp_tokens)
    # closest reference length; ties go to the shorter reference
    ref_len = min((abs(len(r) - hyp_len), len(r)) for r in refs_tokens)[1]
    return matches, totals, hyp_len, ref_len


def _bleu_from_stats(matches, totals, hyp_len, ref_len, smooth: bool) -> float:
    log_precisions = []
    for n, (m, t) in enumerate(zip(matches, totals), start=1):
        if t == 0:
            continue  # hypothesis shorter than n: order drops out
        if m == 0:
            if smooth and n > 1:
                m, t = m + 1, t + 1  # add-one smoothing for higher orders
            else:
                return 0.0
        log_precisions.append(math.log(m / t))
    if not log_precisions:
        return 0.0
    geo_mean = math.exp(sum(log_precisions) / len(log_precisions))
    bp = 1.0 if hyp_len > ref_len else math.exp(1 - ref_len / max(hyp_len, 1)) if hyp_len > 0 else 0.0
    return bp * geo_mean


def bleu(
    hypothesis: str,
    references: Sequence[str],
    max_order: int = 4,
    smooth: bool = True,
) -> float:
    """Sentence-level BLEU with add-one smoothing on zero-match orders > 1."""
    if not references:
        raise ValidationError("BLEU needs at least one reference")
    stats = _bleu_stats(tokenize(hypothesis), [tokenize(r) for r in references], max_order)
    return _bleu_from_stats(*stats, smooth=smooth)


def corpus_bleu(
    pairs: Sequence[tuple[str, Sequence[str]]],
    max_order: int = 4,
    smooth: bool = False,
) -> float:
    """Corpus-level BLEU over (hypothesis, references) pairs (aggregate counts)."""
    if not pairs:
        raise ValidationError("corpus BLEU needs at least one pair")
    agg_m = [0] * max_order
    agg_t = [0] * max_order
    agg_hyp = agg_ref = 0
    for hypothesis, references in pairs:
        if not references:
            raise ValidationError("BLEU needs at least one reference")
        m, t, hl, rl = _bleu_stats(tokenize(hypothesis), [tokenize(r) for r in references], max_order)
        agg_m = [a + b for a, b in zip(agg_m, m)]
        agg_t = [a + b for a, b in zip(agg_t, t)]
        agg_hyp += hl
        agg_ref += rl
    return _bleu_from_stats(agg_m, agg_t, agg_hyp, agg_ref, smooth=smooth)


def _prf(match: float, hyp_total: float, ref_total: float) -> tuple[float, float, float]:
    precision = match / hyp_total if hyp_total else 0.0
    recall = match / ref_total if ref_total else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def rouge_n(hypothesis: str, reference: str | Sequence[str], n: int) -> tuple[float, float, float]:
    """N-gram overlap (precision, recall, F1); multi-reference takes max F1."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if not isinstance(reference, str):
        return max((rouge_n(hypothesis, r, n) for r in reference), key=lambda t: t[2])
    hyp = ngrams(tokenize(hypothesis), n)
    ref = ngrams(tokenize(reference), n)
    match = sum(min(c, ref[g]) for g, c in hyp.items())
    return _prf(match, sum(hyp.values()), sum(ref.values()))


def _lcs_len(a: Sequence[str], b: Sequence[str]) -> int:
    prev = [0] * (len(b) + 1)
    for tok in a:
        cur = [0]
        for j, other in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if tok == other else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(hypothesis: str, reference: str | Sequence[str]) -> tuple[float, float, float]:
    """LCS-based (precision, recall, F1); multi-reference takes max F1."""
    if not isinstance(reference, str):
        return max((rouge_l(hypothesis, r) for r in reference), key=lambda t: t[2])
    hyp = tokenize(hypothesis)
    ref = tokenize(reference)
    lcs = _lcs_len(hyp, ref)
    return _prf(lcs, len(hyp), len(ref))


def _char_ngrams(text: str, n: int) -> Counter:
    chars = "".join(text.split())
    return Counter(chars[i : i + n] for i in range(len(chars) - n + 1))


def chrf(hypothesis: str, reference: str, char_order: int = 6, beta: float = 2.0) -> float:
    """Mean over character n-gram orders of the F-beta of P/R at that order.

    Whitespace is removed before extracting character n-grams; orders where
    neither side has any n-gram are skipped.
    """
    values = []
    for n in range(1, char_order + 1):
        hyp = _char_ngrams(hypothesis, n)
        ref = _char_ngrams(reference, n)
        if not hyp and not ref:
            continue
        match = sum(min(c, ref[g]) for g, c in hyp.items())
        precision = match / sum(hyp.values()) if hyp else 0.0
        recall = match / sum(ref.values()) if ref else 0.0
        denom = beta * beta * precision + recall
        values.append((1 + beta * beta) * precision * recall / denom if denom else 0.0)
    return sum(values) / len(values) if values else 0.0


BASELINE_METRICS = ("bleu", "rouge-1", "rouge-2", "rouge-l", "chrf")


def _score_one(metric: str, hypothesis: str, references: Sequence[str]) -> float:
    if metric == "bleu":
        return bleu(hypothesis, references)
    if metric == "rouge-1":
        return rouge_n(hypothesis, references, 1)[2]
    if metric == "rouge-2":
        return rouge_n(hypothesis, references, 2)[2]
    if metric == "rouge-l":
        return rouge_l(hypothesis, references)[2]
    if metric == "chrf":
        return max(chrf(hypothesis, r) for r in references)
    raise ValidationError(f"unknown baseline metric {metric!r}")


def score_corpus_baseline(
    corpus: Sequence[TextInstance], metric: str
) -> MetricScoreTable:
    """Score every (instance, system) pair with one classical metric."""
    if metric not in BASELINE_METRICS:
        raise ValidationError(
            f"unknown baseline metric {metric!r}; choose from {BASELINE_METRICS}"
        )
    scores: dict[tuple[str, str], float] = {}
    for inst in corpus:
        if not inst.references:
            raise ValidationError(
                f"instance {inst.instance_id!r}: baseline metrics need references"
            )
        for out in inst.outputs:
            scores[(inst.instance_id, out.system_id)] = _score_one(
                metric, out.hypothesis, inst.references
            )
    return MetricScoreTable(metric, f"baseline:{metric}", scores)
