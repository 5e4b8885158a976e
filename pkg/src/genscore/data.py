"""Canonical in-memory types and the JSONL persistence format.

One corpus line holds a source text, its references, and every system output
for that source together with optional per-perspective human judgments.
Pairwise human preferences live in a parallel JSONL file.  Metric scores are
stored as a header record followed by one row per (instance, system).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ValidationError

PERSPECTIVES = ("Info", "Rel", "Flu", "Coh", "Fac", "Cov", "Ade")
EXTRA_PREFIX = "extra:"


def _check_label(label: str, where: str) -> None:
    if label in PERSPECTIVES or label.startswith(EXTRA_PREFIX):
        return
    raise ValidationError(
        f"{where}: unknown perspective label {label!r} "
        f"(expected one of {', '.join(PERSPECTIVES)} or an '{EXTRA_PREFIX}' prefixed name)"
    )


@dataclass(frozen=True)
class SystemOutput:
    """One system's hypothesis for an instance, with optional judgments."""

    system_id: str
    hypothesis: str
    judgments: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for label, value in self.judgments.items():
            _check_label(label, f"system {self.system_id!r}")
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValidationError(
                    f"system {self.system_id!r}: judgment {label!r} is not a finite number"
                )


@dataclass(frozen=True)
class TextInstance:
    """One evaluation unit: a source, its references, and system outputs."""

    instance_id: str
    source: str
    references: tuple[str, ...] = ()
    outputs: tuple[SystemOutput, ...] = ()

    def __post_init__(self) -> None:
        seen = set()
        for out in self.outputs:
            if out.system_id in seen:
                raise ValidationError(
                    f"instance {self.instance_id!r}: duplicate system_id {out.system_id!r}"
                )
            seen.add(out.system_id)

    def output(self, system_id: str) -> SystemOutput:
        for out in self.outputs:
            if out.system_id == system_id:
                return out
        raise KeyError(system_id)


@dataclass(frozen=True)
class PreferencePair:
    """A human preference between two outputs of the same instance."""

    instance_id: str
    better_id: str
    worse_id: str

    def __post_init__(self) -> None:
        if self.better_id == self.worse_id:
            raise ValidationError(
                f"instance {self.instance_id!r}: preference pair compares "
                f"{self.better_id!r} with itself"
            )


@dataclass(frozen=True)
class MetricScoreTable:
    """Per (instance, system) scores for one metric configuration."""

    metric_name: str
    config_digest: str
    scores: Mapping[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for key, value in self.scores.items():
            if not math.isfinite(value):
                raise ValidationError(f"score for {key} is not finite")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MetricScoreTable):
            return NotImplemented
        return (
            self.metric_name == other.metric_name
            and self.config_digest == other.config_digest
            and dict(self.scores) == dict(other.scores)
        )


def _parse_lines(path: str | Path) -> Iterable[tuple[int, dict]]:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise ValidationError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def load_corpus(path: str | Path) -> list[TextInstance]:
    """Load a corpus JSONL file, preserving file order.

    Raises ValidationError with the offending line number for malformed JSON,
    duplicate instance ids, unknown perspective labels, or non-finite
    judgment values.
    """
    instances: list[TextInstance] = []
    seen_ids: set[str] = set()
    for lineno, obj in _parse_lines(path):
        try:
            outputs = tuple(
                SystemOutput(
                    system_id=o["system_id"],
                    hypothesis=o["hypothesis"],
                    judgments=dict(o.get("judgments") or {}),
                )
                for o in obj.get("outputs", [])
            )
            inst = TextInstance(
                instance_id=obj["instance_id"],
                source=obj["source"],
                references=tuple(obj.get("references") or ()),
                outputs=outputs,
            )
        except KeyError as exc:
            raise ValidationError(f"{path}:{lineno}: missing field {exc}") from exc
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
        if inst.instance_id in seen_ids:
            raise ValidationError(
                f"{path}:{lineno}: duplicate instance_id {inst.instance_id!r}"
            )
        seen_ids.add(inst.instance_id)
        instances.append(inst)
    return instances


def save_corpus(corpus: Iterable[TextInstance], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for inst in corpus:
            obj = {
                "instance_id": inst.instance_id,
                "source": inst.source,
                "references": list(inst.references),
                "outputs": [
                    {
                        "system_id": o.system_id,
                        "hypothesis": o.hypothesis,
                        "judgments": {k: v for k, v in o.judgments.items()},
                    }
                    for o in inst.outputs
                ],
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def load_preferences(
    path: str | Path, corpus: Iterable[TextInstance] | None = None
) -> list[PreferencePair]:
    """Load preference pairs; when a corpus is given, ids must resolve."""
    by_id = {inst.instance_id: inst for inst in corpus} if corpus is not None else None
    pairs: list[PreferencePair] = []
    for lineno, obj in _parse_lines(path):
        try:
            pair = PreferencePair(obj["instance_id"], obj["better_id"], obj["worse_id"])
        except KeyError as exc:
            raise ValidationError(f"{path}:{lineno}: missing field {exc}") from exc
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
        if by_id is not None:
            inst = by_id.get(pair.instance_id)
            if inst is None:
                raise ValidationError(
                    f"{path}:{lineno}: unknown instance_id {pair.instance_id!r}"
                )
            known = {o.system_id for o in inst.outputs}
            for sid in (pair.better_id, pair.worse_id):
                if sid not in known:
                    raise ValidationError(
                        f"{path}:{lineno}: system {sid!r} not found in instance "
                        f"{pair.instance_id!r}"
                    )
        pairs.append(pair)
    return pairs


def _format_score(value: float) -> str:
    # 17 significant digits round-trips any IEEE double exactly.
    return format(float(value), ".17g")


def save_scores(table: MetricScoreTable, path: str | Path) -> None:
    """Write a score table; loading the file reproduces it bit-for-bit."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(
            json.dumps(
                {"metric_name": table.metric_name, "config_digest": table.config_digest}
            )
            + "\n"
        )
        for (iid, sid), value in table.scores.items():
            row = (
                '{"instance_id": %s, "system_id": %s, "score": %s}'
                % (json.dumps(iid), json.dumps(sid), _format_score(value))
            )
            fh.write(row + "\n")


def load_scores(path: str | Path) -> MetricScoreTable:
    rows = iter(_parse_lines(path))
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise ValidationError(f"{path}: empty score file (missing header record)")
    if "metric_name" not in header or "config_digest" not in header:
        raise ValidationError(f"{path}:{lineno}: first record must be the table header")
    scores: dict[tuple[str, str], float] = {}
    for lineno, obj in rows:
        try:
            key = (obj["instance_id"], obj["system_id"])
            value = float(obj["score"])
        except KeyError as exc:
            raise ValidationError(f"{path}:{lineno}: missing field {exc}") from exc
        if not math.isfinite(value):
            raise ValidationError(f"{path}:{lineno}: non-finite score")
        if key in scores:
            raise ValidationError(f"{path}:{lineno}: duplicate score row for {key}")
        scores[key] = value
    return MetricScoreTable(header["metric_name"], header["config_digest"], scores)
