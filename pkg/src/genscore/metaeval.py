"""Metric-human agreement measures, significance testing, and analyses.

Correlation measures operate on paired score vectors pooled across systems
(or grouped per system / per instance).  Pairwise preference data is handled
by a relative-ranking Kendall variant and by raw pairwise accuracy.  The
paired bootstrap resamples evaluation instances with replacement to compare
two metrics on identical data.
"""

from __future__ import annotations

import warnings
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from .backends.core import whitespace_tokenize
from .data import MetricScoreTable, PreferencePair, TextInstance
from .errors import ValidationError

SCALAR_MEASURES = ("pearson", "spearman", "kendall")
PREFERENCE_MEASURES = ("darr", "accuracy")


class Grouping(str, Enum):
    POOLED = "pooled"
    PER_SYSTEM_MEAN = "per-system-mean"
    PER_INSTANCE_MEAN = "per-instance-mean"


@dataclass(frozen=True)
class CorrelationReport:
    measure: str
    value: float
    n: int
    grouping: Grouping = Grouping.POOLED

    def __post_init__(self) -> None:
        lo = 0.0 if self.measure == "accuracy" else -1.0
        if not (lo - 1e-12 <= self.value <= 1.0 + 1e-12):
            raise ValidationError(
                f"{self.measure} value {self.value!r} outside [{lo}, 1]"
            )


def _check_pairs(xs: Sequence[float], ys: Sequence[float], name: str) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError(f"{name}: inputs must be equal-length 1-d vectors")
    if len(x) < 2:
        raise ValidationError(f"{name}: need at least 2 pairs, got {len(x)}")
    return x, y


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Product-moment correlation; zero variance is an error, never NaN."""
    x, y = _check_pairs(xs, ys, "pearson")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ValidationError("pearson: zero variance in one of the inputs")
    return float(stats.pearsonr(x, y).statistic)


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Rank correlation with average-rank tie handling."""
    x, y = _check_pairs(xs, ys, "spearman")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ValidationError("spearman: zero rank variance in one of the inputs")
    return float(stats.spearmanr(x, y).statistic)


def kendall_tau_b(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Kendall's tau with tie corrections in both variables (tau-b)."""
    x, y = _check_pairs(xs, ys, "kendall")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ValidationError("kendall: all-tied input")
    return float(stats.kendalltau(x, y, variant="b").statistic)


_MEASURE_FNS: dict[str, Callable[[Sequence[float], Sequence[float]], float]] = {
    "pearson": pearson,
    "spearman": spearman,
    "kendall": kendall_tau_b,
}


def _scores_of(table: MetricScoreTable | Mapping[tuple[str, str], float]) -> Mapping:
    return table.scores if isinstance(table, MetricScoreTable) else table


def darr_kendall(
    table: MetricScoreTable | Mapping[tuple[str, str], float],
    pairs: Sequence[PreferencePair],
) -> float:
    """Relative-ranking Kendall: (concordant - discordant) / total.

    A pair is concordant when the metric scores the human-preferred output
    strictly higher; score ties count as discordant.
    """
    scores = _scores_of(table)
    concordant = discordant = 0
    for pair in pairs:
        better = scores.get((pair.instance_id, pair.better_id))
        worse = scores.get((pair.instance_id, pair.worse_id))
        if better is None or worse is None:
            continue
        if better > worse:
            concordant += 1
        else:
            discordant += 1
    total = concordant + discordant
    if total == 0:
        raise ValidationError("no preference pairs resolvable against the score table")
    return (concordant - discordant) / total


def pairwise_accuracy(
    table: MetricScoreTable | Mapping[tuple[str, str], float],
    pairs: Sequence[PreferencePair],
) -> float:
    """Fraction of preference pairs ranked correctly; ties count as incorrect."""
    scores = _scores_of(table)
    correct = total = 0
    for pair in pairs:
        better = scores.get((pair.instance_id, pair.better_id))
        worse = scores.get((pair.instance_id, pair.worse_id))
        if better is None or worse is None:
            continue
        total += 1
        if better > worse:
            correct += 1
    if total == 0:
        raise ValidationError("no preference pairs resolvable against the score table")
    return correct / total


def paired_values(
    table: MetricScoreTable | Mapping[tuple[str, str], float],
    corpus: Sequence[TextInstance],
    perspective: str,
) -> tuple[list[float], list[float]]:
    """Pooled (metric, human) pairs for one perspective, in corpus order.

    Outputs lacking the perspective or lacking a metric score are skipped.
    """
    scores = _scores_of(table)
    metric, human = [], []
    for inst in corpus:
        for out in inst.outputs:
            if perspective not in out.judgments:
                continue
            value = scores.get((inst.instance_id, out.system_id))
            if value is None:
                continue
            metric.append(value)
            human.append(out.judgments[perspective])
    return metric, human


def correlate(
    table: MetricScoreTable | Mapping[tuple[str, str], float],
    corpus: Sequence[TextInstance],
    perspective: str,
    measure: str = "spearman",
    grouping: Grouping = Grouping.POOLED,
) -> CorrelationReport:
    """Correlation between metric scores and one human perspective."""
    if measure not in _MEASURE_FNS:
        raise ValidationError(f"unknown scalar measure {measure!r}")
    fn = _MEASURE_FNS[measure]
    scores = _scores_of(table)

    if grouping is Grouping.POOLED:
        metric, human = paired_values(scores, corpus, perspective)
        return CorrelationReport(measure, fn(metric, human), len(metric), grouping)

    if grouping is Grouping.PER_SYSTEM_MEAN:
        by_system: dict[str, list[tuple[float, float]]] = defaultdict(list)
        for inst in corpus:
            for out in inst.outputs:
                if perspective not in out.judgments:
                    continue
                value = scores.get((inst.instance_id, out.system_id))
                if value is None:
                    continue
                by_system[out.system_id].append((value, out.judgments[perspective]))
        systems = sorted(by_system)
        metric = [float(np.mean([m for m, _ in by_system[s]])) for s in systems]
        human = [float(np.mean([h for _, h in by_system[s]])) for s in systems]
        return CorrelationReport(measure, fn(metric, human), len(systems), grouping)

    # Per-instance: correlate across systems within each instance, then average.
    values = []
    for inst in corpus:
        metric, human = paired_values(scores, [inst], perspective)
        if len(metric) < 2 or np.ptp(metric) == 0 or np.ptp(human) == 0:
            continue
        values.append(fn(metric, human))
    if not values:
        raise ValidationError("no instance admits a per-instance correlation")
    return CorrelationReport(measure, float(np.mean(values)), len(values), grouping)


def evaluate_table(
    table: MetricScoreTable | Mapping[tuple[str, str], float],
    corpus: Sequence[TextInstance],
    measure: str,
    perspective: str | None = None,
    preferences: Sequence[PreferencePair] | None = None,
    grouping: Grouping = Grouping.POOLED,
) -> float:
    """Dispatch a measure name to the right computation."""
    if measure in _MEASURE_FNS:
        if perspective is None:
            raise ValidationError(f"measure {measure!r} needs a perspective")
        return correlate(table, corpus, perspective, measure, grouping).value
    if measure == "darr":
        if not preferences:
            raise ValidationError("measure 'darr' needs preference pairs")
        return darr_kendall(table, preferences)
    if measure == "accuracy":
        if not preferences:
            raise ValidationError("measure 'accuracy' needs preference pairs")
        return pairwise_accuracy(table, preferences)
    raise ValidationError(f"unknown measure {measure!r}")


@dataclass(frozen=True)
class SignificanceResult:
    p_value: float
    resamples: int
    winner: str
    seed: int
    observed_a: float
    observed_b: float


def bootstrap_compare(
    table_a: MetricScoreTable,
    table_b: MetricScoreTable,
    corpus: Sequence[TextInstance],
    measure: str,
    perspective: str | None = None,
    preferences: Sequence[PreferencePair] | None = None,
    resamples: int = 1000,
    seed: int = 0,
) -> SignificanceResult:
    """Paired bootstrap over instances comparing two metrics on one measure.

    The instance list is resampled with replacement; both metrics are
    re-measured on each resample.  The p-value is the fraction of resamples
    on which the observed winner fails to outperform the loser.  Per-resample
    RNG streams derive from (seed, index), so any execution order gives
    identical results.
    """
    if resamples < 100:
        raise ValidationError(f"need at least 100 resamples, got {resamples}")
    ids_a = {iid for iid, _ in table_a.scores}
    ids_b = {iid for iid, _ in table_b.scores}
    common = ids_a & ids_b
    if not common:
        raise ValidationError("the two metrics share no scored instances")
    instances = [inst for inst in corpus if inst.instance_id in common]
    if not instances:
        raise ValidationError("no corpus instances covered by both metrics")

    prefs_by_instance: dict[str, list[PreferencePair]] = defaultdict(list)
    for pair in preferences or ():
        prefs_by_instance[pair.instance_id].append(pair)

    def measure_on(table: MetricScoreTable, sample: Sequence[TextInstance]) -> float:
        if measure in PREFERENCE_MEASURES:
            pairs = [p for inst in sample for p in prefs_by_instance[inst.instance_id]]
            return evaluate_table(table, sample, measure, preferences=pairs)
        return evaluate_table(table, sample, measure, perspective=perspective)

    observed_a = measure_on(table_a, instances)
    observed_b = measure_on(table_b, instances)

    name_a, name_b = table_a.metric_name, table_b.metric_name
    if name_a == name_b:
        name_a, name_b = f"{name_a}(A)", f"{name_b}(B)"

    if observed_a == observed_b:
        return SignificanceResult(1.0, resamples, "tie", seed, observed_a, observed_b)
    winner_is_a = observed_a > observed_b

    n = len(instances)
    losses = 0
    for i in range(resamples):
        rng = np.random.default_rng([seed, i])
        idx = rng.integers(0, n, size=n)
        sample = [instances[j] for j in idx]
        try:
            va = measure_on(table_a, sample)
            vb = measure_on(table_b, sample)
        except ValidationError:
            losses += 1  # degenerate resample counts against the winner
            continue
        delta = (va - vb) if winner_is_a else (vb - va)
        if delta <= 0:
            losses += 1
    p_value = losses / resamples
    winner = (name_a if winner_is_a else name_b) if p_value < 0.05 else "tie"
    return SignificanceResult(p_value, resamples, winner, seed, observed_a, observed_b)


DatasetGroup = tuple[Sequence[TextInstance], MetricScoreTable]


def _as_datasets(
    datasets: Mapping[str, DatasetGroup] | DatasetGroup,
) -> Mapping[str, DatasetGroup]:
    if isinstance(datasets, Mapping):
        return datasets
    return {"default": datasets}


def topk_analysis(
    datasets: Mapping[str, DatasetGroup] | DatasetGroup,
    perspective: str,
    ks: Sequence[int],
    measure: str = "spearman",
    grouping: Grouping = Grouping.POOLED,
) -> list[tuple[int, float]]:
    """Mean correlation when restricted to outputs of the top-k systems.

    Systems are ranked per dataset by mean human judgment; correlations are
    averaged across datasets.  k above the system count is clamped with a
    warning.  With per-system grouping, k = 1 is degenerate and raises.
    """
    groups = _as_datasets(datasets)
    results = []
    for k in ks:
        values = []
        for name, (corpus, table) in groups.items():
            by_system: dict[str, list[float]] = defaultdict(list)
            for inst in corpus:
                for out in inst.outputs:
                    if perspective in out.judgments:
                        by_system[out.system_id].append(out.judgments[perspective])
            ranked = sorted(
                by_system, key=lambda s: (-float(np.mean(by_system[s])), s)
            )
            kk = k
            if kk > len(ranked):
                warnings.warn(
                    f"dataset {name!r}: k={k} exceeds {len(ranked)} systems; clamped"
                )
                kk = len(ranked)
            keep = set(ranked[:kk])
            sub = [
                TextInstance(
                    inst.instance_id,
                    inst.source,
                    inst.references,
                    tuple(o for o in inst.outputs if o.system_id in keep),
                )
                for inst in corpus
            ]
            values.append(correlate(table, sub, perspective, measure, grouping).value)
        results.append((k, float(np.mean(values))))
    return results


DEFAULT_LENGTH_BUCKETS: tuple[tuple[int, int], ...] = ((15, 25), (25, 35), (35, 45), (45, 54))


def assign_bucket(
    length: int, buckets: Sequence[tuple[int, int]] = DEFAULT_LENGTH_BUCKETS
) -> int | None:
    """Bucket index for a reference length; the final bucket is closed."""
    for i, (lo, hi) in enumerate(buckets):
        last = i == len(buckets) - 1
        hit = (lo <= length <= hi) if last else (lo <= length < hi)
        if hit:
            return i
    return None


def length_bucket_analysis(
    datasets: Mapping[str, DatasetGroup] | DatasetGroup,
    perspective: str,
    buckets: Sequence[tuple[int, int]] = DEFAULT_LENGTH_BUCKETS,
    min_count: int = 500,
    measure: str = "kendall",
    tokenize: Callable[[str], list[str]] = whitespace_tokenize,
) -> dict[tuple[int, int], float | None]:
    """Per-bucket mean correlation over datasets with enough instances.

    Instances are assigned by token length of the first reference.  A dataset
    contributing fewer than min_count instances to a bucket is dropped from
    that bucket; a bucket with no surviving dataset is reported as None.
    """
    groups = _as_datasets(datasets)
    report: dict[tuple[int, int], float | None] = {}
    for i, bucket in enumerate(buckets):
        values = []
        for corpus, table in groups.values():
            sub = []
            for inst in corpus:
                if not inst.references:
                    raise ValidationError(
                        f"instance {inst.instance_id!r} has no reference for length bucketing"
                    )
                if assign_bucket(len(tokenize(inst.references[0])), buckets) == i:
                    sub.append(inst)
            if len(sub) < min_count:
                continue
            values.append(correlate(table, sub, perspective, measure).value)
        report[tuple(bucket)] = float(np.mean(values)) if values else None
    return report


PERSPECTIVE_CATEGORIES = {
    "semantic_overlap": ("Info", "Cov", "Rel"),
    "linguistic_quality": ("Flu", "Coh"),
    "factual_correctness": ("Fac",),
}


@dataclass(frozen=True)
class PromptPerformance:
    """Per-prompt correlations for one (dataset, perspective) setting."""

    dataset: str
    perspective: str
    baseline: float
    per_prompt: Mapping[str, float]


def prompt_category_analysis(
    records: Sequence[PromptPerformance],
) -> dict[str, float]:
    """Mean fraction of prompts beating the promptless baseline, per category."""
    if not records:
        raise ValidationError("no prompt performance records given")
    fractions: dict[str, list[float]] = defaultdict(list)
    for rec in records:
        if not rec.per_prompt:
            raise ValidationError(
                f"record ({rec.dataset}, {rec.perspective}) has no per-prompt results"
            )
        category = next(
            (
                cat
                for cat, members in PERSPECTIVE_CATEGORIES.items()
                if rec.perspective in members
            ),
            None,
        )
        if category is None:
            raise ValidationError(f"perspective {rec.perspective!r} has no category")
        wins = sum(1 for v in rec.per_prompt.values() if v > rec.baseline)
        fractions[category].append(wins / len(rec.per_prompt))
    return {cat: float(np.mean(vals)) for cat, vals in fractions.items()}


def bias_rank_difference(
    corpus: Sequence[TextInstance],
    table: MetricScoreTable | Mapping[tuple[str, str], float],
    perspective: str,
) -> dict[str, int]:
    """Human rank minus metric rank per system (rank 1 = best).

    Ties break lexicographically by system id; the differences sum to zero.
    """
    scores = _scores_of(table)
    human_by_system: dict[str, list[float]] = defaultdict(list)
    metric_by_system: dict[str, list[float]] = defaultdict(list)
    for inst in corpus:
        for out in inst.outputs:
            value = scores.get((inst.instance_id, out.system_id))
            if value is None or perspective not in out.judgments:
                continue
            human_by_system[out.system_id].append(out.judgments[perspective])
            metric_by_system[out.system_id].append(value)
    systems = sorted(human_by_system)
    if len(systems) < 2:
        raise ValidationError("need at least 2 systems with human and metric means")

    def ranks(means: dict[str, float]) -> dict[str, int]:
        ordered = sorted(systems, key=lambda s: (-means[s], s))
        return {s: i + 1 for i, s in enumerate(ordered)}

    human_rank = ranks({s: float(np.mean(human_by_system[s])) for s in systems})
    metric_rank = ranks({s: float(np.mean(metric_by_system[s])) for s in systems})
    return {s: human_rank[s] - metric_rank[s] for s in systems}
