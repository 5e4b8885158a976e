"""The metric core: weighted log-probability of a text given another text.

A scored sequence from a backend is reduced to a single number by token
weights (uniform, stopword-masked, IDF, or target-prior) and an aggregation
(mean over total weight, or the raw weighted sum).  Four directions choose
which texts play the conditioning and the scored roles; the F direction is
the arithmetic average of precision and recall.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Mapping, Sequence

from .backends.core import Backend, ScoredSequence
from .data import MetricScoreTable, SystemOutput, TextInstance
from .errors import ConfigError, GenscoreError, ValidationError

if TYPE_CHECKING:
    from .prompting import PromptApplication, PromptEnsemble


class Direction(str, Enum):
    FAITHFULNESS = "faithfulness"  # source -> hypothesis
    PRECISION = "precision"        # reference -> hypothesis
    RECALL = "recall"              # hypothesis -> reference
    F_SCORE = "f"                  # (precision + recall) / 2


class Aggregation(str, Enum):
    MEAN = "mean"
    SUM = "sum"


class MultiRef(str, Enum):
    MAX = "max"
    MEAN = "mean"


# A deliberately small default list; a fuller one can be supplied via file.
DEFAULT_STOPWORDS = frozenset(
    "a an the and or but if then than that this these those of in on at to for "
    "from by with as is are was were be been being it its he she they them his "
    "her their we you i not no do does did so such".split()
)


@dataclass(frozen=True)
class Uniform:
    kind = "uniform"


@dataclass(frozen=True)
class UniformNoStop:
    stopwords: frozenset[str] = DEFAULT_STOPWORDS
    kind = "nostop"


@dataclass(frozen=True)
class Idf:
    doc_freqs: Mapping[str, int] = field(default_factory=dict)
    n_docs: int = 1
    kind = "idf"

    def __post_init__(self) -> None:
        if self.n_docs < 1:
            raise ValidationError(f"document count must be >= 1, got {self.n_docs}")
        for token, df in self.doc_freqs.items():
            if df < 0 or df > self.n_docs:
                raise ValidationError(
                    f"document frequency for {token!r} must lie in [0, {self.n_docs}], got {df}"
                )


@dataclass(frozen=True)
class TargetPrior:
    kind = "prior"


WeightScheme = Uniform | UniformNoStop | Idf | TargetPrior


def idf_weight(token: str, df: int, n_docs: int) -> float:
    """Smoothed inverse document frequency, >= 1 and decreasing in df."""
    if n_docs < 1:
        raise ValidationError(f"document count must be >= 1, got {n_docs}")
    if df < 0 or df > n_docs:
        raise ValidationError(f"document frequency {df} outside [0, {n_docs}]")
    return math.log((1 + n_docs) / (1 + df)) + 1.0


def target_prior_weights(seq: ScoredSequence) -> list[float]:
    """Weight of each position: relative frequency of its token in the target."""
    m = len(seq)
    return [seq.tokens.count(tok) / m for tok in seq.tokens]


def token_weights(seq: ScoredSequence, scheme: WeightScheme) -> list[float]:
    if isinstance(scheme, Uniform):
        return [1.0] * len(seq)
    if isinstance(scheme, UniformNoStop):
        folded = {w.casefold() for w in scheme.stopwords}
        return [0.0 if tok.casefold() in folded else 1.0 for tok in seq.tokens]
    if isinstance(scheme, Idf):
        return [
            idf_weight(tok, scheme.doc_freqs.get(tok, 0), scheme.n_docs) for tok in seq.tokens
        ]
    if isinstance(scheme, TargetPrior):
        return target_prior_weights(seq)
    raise ConfigError(f"unknown weight scheme {scheme!r}")


def weighted_score(
    seq: ScoredSequence,
    weights: WeightScheme,
    aggregation: Aggregation = Aggregation.MEAN,
    mask: Sequence[bool] | None = None,
) -> float:
    """Reduce per-token log-probabilities to one number.

    Sum returns sum(w_t * lp_t); Mean divides that by sum(w_t).  Positions
    excluded by the mask contribute nothing to either side.
    """
    omega = token_weights(seq, weights)
    if mask is not None:
        if len(mask) != len(seq):
            raise ValidationError(
                f"mask length {len(mask)} does not match sequence length {len(seq)}"
            )
        omega = [w if keep else 0.0 for w, keep in zip(omega, mask)]
    total = sum(w * lp for w, lp in zip(omega, seq.logprobs))
    if aggregation is Aggregation.SUM:
        return total
    weight_sum = sum(omega)
    if weight_sum == 0.0:
        raise ConfigError(
            "degenerate weighting: all scored tokens have zero weight "
            "(every token stop-worded or masked out)"
        )
    return total / weight_sum


@dataclass(frozen=True)
class ScoreConfig:
    direction: Direction = Direction.FAITHFULNESS
    weights: WeightScheme = Uniform()
    aggregation: Aggregation = Aggregation.MEAN
    multi_ref: MultiRef = MultiRef.MAX
    prompt: "PromptApplication | PromptEnsemble | None" = None


def _weights_payload(scheme: WeightScheme) -> dict:
    payload: dict = {"kind": scheme.kind}
    if isinstance(scheme, UniformNoStop):
        payload["stopwords"] = sorted(scheme.stopwords)
    elif isinstance(scheme, Idf):
        payload["doc_freqs"] = dict(sorted(scheme.doc_freqs.items()))
        payload["n_docs"] = scheme.n_docs
    return payload


def config_payload(config: ScoreConfig) -> dict:
    """Deterministic serialization used for the config digest (fixed field order)."""
    prompt = None
    if config.prompt is not None:
        if hasattr(config.prompt, "prompts"):
            prompt = {
                "prompts": list(config.prompt.prompts),
                "position": config.prompt.position.value,
                "score_prompt_tokens": config.prompt.score_prompt_tokens,
            }
        else:
            prompt = {
                "prompt": config.prompt.prompt,
                "position": config.prompt.position.value,
                "score_prompt_tokens": config.prompt.score_prompt_tokens,
            }
    return {
        "direction": config.direction.value,
        "weights": _weights_payload(config.weights),
        "aggregation": config.aggregation.value,
        "multi_ref": config.multi_ref.value,
        "prompt": prompt,
    }


def config_digest(config: ScoreConfig, backend: Backend | None = None) -> str:
    payload = config_payload(config)
    if backend is not None:
        d = backend.descriptor
        payload["backend"] = {"name": d.name, "kind": d.kind, "tokenizer_id": d.tokenizer_id}
    blob = json.dumps(payload, sort_keys=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def score_pair(backend: Backend, source: str, target: str, config: ScoreConfig) -> float:
    """Score one (conditioning text, scored text) pair under the config."""
    if config.prompt is not None and hasattr(config.prompt, "prompts"):
        from .prompting import ensemble_score

        return ensemble_score(backend, source, target, list(config.prompt.prompts), config)
    if config.prompt is not None and config.prompt.prompt:
        source, target, mask = config.prompt.apply(source, target, backend.tokenize)
    else:
        mask = None
    seq = backend.token_log_probs(source, target)
    return weighted_score(seq, config.weights, config.aggregation, mask)


def _aggregate(values: Sequence[float], mode: MultiRef) -> float:
    top = max(values)
    if mode is MultiRef.MAX:
        return top
    # centered mean: offsets are non-positive in floating point, so the
    # mean can never round above the max
    return top + sum(v - top for v in values) / len(values)


def score_direction(
    backend: Backend,
    instance: TextInstance,
    output: SystemOutput,
    config: ScoreConfig,
) -> float:
    """Score one system output in the configured direction."""
    if config.direction is Direction.FAITHFULNESS:
        return score_pair(backend, instance.source, output.hypothesis, config)
    if not instance.references:
        raise ValidationError(
            f"instance {instance.instance_id!r}: direction {config.direction.value!r} "
            "requires at least one reference"
        )
    hyp = output.hypothesis
    if config.direction is Direction.PRECISION:
        return _aggregate(
            [score_pair(backend, ref, hyp, config) for ref in instance.references],
            config.multi_ref,
        )
    if config.direction is Direction.RECALL:
        return _aggregate(
            [score_pair(backend, hyp, ref, config) for ref in instance.references],
            config.multi_ref,
        )
    precision = _aggregate(
        [score_pair(backend, ref, hyp, config) for ref in instance.references],
        config.multi_ref,
    )
    recall = _aggregate(
        [score_pair(backend, hyp, ref, config) for ref in instance.references],
        config.multi_ref,
    )
    return (precision + recall) / 2.0


def score_corpus(
    backend: Backend,
    corpus: Sequence[TextInstance],
    config: ScoreConfig,
    metric_name: str = "genscore",
    workers: int = 1,
    skip_errors: bool = False,
) -> MetricScoreTable:
    """Score every (instance, system) pair; deterministic in any worker count."""
    jobs = [(inst, out) for inst in corpus for out in inst.outputs]

    def run(job: tuple[TextInstance, SystemOutput]):
        inst, out = job
        try:
            return (inst.instance_id, out.system_id), score_direction(backend, inst, out, config)
        except GenscoreError as exc:
            if skip_errors:
                return (inst.instance_id, out.system_id), None
            raise type(exc)(
                f"scoring failed for ({inst.instance_id!r}, {out.system_id!r}): {exc}"
            ) from exc

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    scores = {key: value for key, value in results if value is not None}
    return MetricScoreTable(metric_name, config_digest(config, backend), scores)
