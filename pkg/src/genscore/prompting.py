"""Prompt application, built-in prompt sets, ensembling, and prompt search.

A prompt is a short phrase either appended to the source text (the
conditioning side) or prepended to the target text (the scored side).
Ensembling averages per-prompt mean log-probabilities over a whole set.
Prompt search scores a development corpus once per candidate prompt and
ranks prompts by agreement with human judgments.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Iterable, Sequence

from .backends.core import Backend, whitespace_tokenize
from .errors import ConfigError, ValidationError

if TYPE_CHECKING:
    from .data import TextInstance
    from .scoring import ScoreConfig


class PromptPosition(str, Enum):
    SOURCE_APPEND = "source-append"
    TARGET_PREPEND = "target-prepend"


class PromptUsage(str, Enum):
    SOURCE_TO_HYP = "s2h"
    HYP_REF_BIDIRECTIONAL = "h2r"


@dataclass(frozen=True)
class PromptApplication:
    """How one prompt (or the empty identity prompt) modifies a scoring pair."""

    prompt: str = ""
    position: PromptPosition = PromptPosition.TARGET_PREPEND
    score_prompt_tokens: bool = True

    def apply(
        self, source: str, target: str, tokenize: Callable[[str], list[str]] = whitespace_tokenize
    ) -> tuple[str, str, list[bool]]:
        """Return (source', target', scored-token mask incl. the EOS slot).

        An empty prompt is the identity: texts unchanged, all tokens scored.
        Source appending never changes which target tokens are scored.
        """
        if not self.prompt:
            n = len(tokenize(target))
            return source, target, [True] * (n + 1)
        if self.position is PromptPosition.SOURCE_APPEND:
            new_source = f"{source} {self.prompt}" if source else self.prompt
            n = len(tokenize(target))
            return new_source, target, [True] * (n + 1)
        new_target = f"{self.prompt} {target}" if target else self.prompt
        n_prompt = len(tokenize(self.prompt))
        n_total = len(tokenize(new_target))
        mask = [self.score_prompt_tokens] * n_prompt + [True] * (n_total - n_prompt + 1)
        return source, new_target, mask


IDENTITY_PROMPT = PromptApplication()


@dataclass(frozen=True)
class PromptEnsemble:
    """Score under every prompt of a set and average the per-prompt means."""

    prompts: tuple[str, ...]
    position: PromptPosition = PromptPosition.TARGET_PREPEND
    score_prompt_tokens: bool = True


@dataclass(frozen=True)
class PromptSet:
    name: str
    usage: PromptUsage
    prompts: tuple[str, ...]

    def __post_init__(self) -> None:
        if any(not p for p in self.prompts):
            raise ValidationError(f"prompt set {self.name!r} contains an empty prompt")
        folded = [p.casefold() for p in self.prompts]
        if len(set(folded)) != len(folded):
            dupes = sorted({p for p in folded if folded.count(p) > 1})
            raise ValidationError(f"prompt set {self.name!r} has case-folded duplicates: {dupes}")

    def __len__(self) -> int:
        return len(self.prompts)


# Built-in phrases for steering the scorer toward summarizing continuations
# (used in the source-to-hypothesis direction).
_S2H_PROMPTS = (
    "Last", "Tersely", "Succinctly", "In summation", "To put it succinctly",
    "After", "In brief", "All in all", "To summarize", "Bringing up the rear",
    "Behind", "In short", "In outline", "In a nutshell", "To come to the point",
    "Lastly", "Concisely", "In closing", "In conclusion", "In the final analysis",
    "In sum", "In precis", "In passing", "In winding up", "Without wasting words",
    "To end", "In a word", "To conclude", "Last in order", "At the end of the day",
    "Curtly", "Compactly", "Summarising", "In a few words", "Without waste of words",
    "Crisply", "Summarily", "In the rear", "As a final point", "Finally yet importantly",
    "At last", "To sum up", "Summarizing", "Not least of all", "To put it in a nutshell",
    "Pithily", "Basically", "Laconically", "To put it briefly", "When all is said and done",
    "Shortly", "In the end", "At the rear", "Not to mince words", "To cut a long story short",
    "In fine", "At the end", "To be brief", "Last but not least", "Not to beat about the bush",
    "Finally", "In essence", "Last of all", "Just as importantly", "In drawing things to a close",
    "Briefly", "Ultimately", "Elliptically", "To put it concisely", "Not to put too fine a point on it",
)

# Built-in paraphrase/restatement phrases (hypothesis-reference directions).
_H2R_PROMPTS = (
    "As", "To wit", "As it were", "Case in point", "As an illustration",
    "sc.", "That is", "Especially", "That is to say", "To give an example",
    "i.e.", "Such as", "For example", "To rephrase it", "To give an instance",
    "Like", "Scilicet", "Particularly", "To be specific", "To put it another way",
    "Viz.", "Videlicet", "Specifically", "In plain English", "By way of explanation",
    "Namely", "Expressly", "For instance", "Take for example", "By way of illustration",
    "id est", "Specially", "To illustrate", "Strictly speaking",
)


def builtin_prompt_sets() -> list[PromptSet]:
    """The two shipped prompt sets (70 source-side, 34 target-side phrases)."""
    return [
        PromptSet("s2h", PromptUsage.SOURCE_TO_HYP, _S2H_PROMPTS),
        PromptSet("h2r", PromptUsage.HYP_REF_BIDIRECTIONAL, _H2R_PROMPTS),
    ]


def get_prompt_set(name_or_path: str) -> PromptSet:
    """Resolve a built-in set name or load a prompt file."""
    for ps in builtin_prompt_sets():
        if ps.name == name_or_path:
            return ps
    path = Path(name_or_path)
    if path.exists():
        return load_prompt_set(path)
    raise ValidationError(f"unknown prompt set {name_or_path!r} (not built-in, not a file)")


def load_prompt_set(
    path: str | Path, usage: PromptUsage = PromptUsage.HYP_REF_BIDIRECTIONAL
) -> PromptSet:
    """Load prompts from a text file, one per line; '#' starts a comment."""
    prompts = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            prompts.append(line)
    if not prompts:
        raise ValidationError(f"prompt file {path} contains no prompts")
    return PromptSet(Path(path).stem, usage, tuple(prompts))


def ensemble_score(
    backend: Backend,
    source: str,
    target: str,
    prompt_set: PromptSet | Sequence[str],
    config: "ScoreConfig",
) -> float:
    """Arithmetic mean over prompts of per-prompt mean log-probabilities."""
    from . import scoring

    prompts = list(prompt_set.prompts if isinstance(prompt_set, PromptSet) else prompt_set)
    if not prompts:
        raise ConfigError("ensemble over an empty prompt set")
    if config.aggregation is not scoring.Aggregation.MEAN:
        raise ConfigError("ensembling is defined over per-prompt mean scores; use Mean aggregation")
    if isinstance(config.prompt, PromptApplication):
        template = config.prompt
    elif isinstance(config.prompt, PromptEnsemble):
        template = PromptApplication(
            position=config.prompt.position,
            score_prompt_tokens=config.prompt.score_prompt_tokens,
        )
    else:
        template = IDENTITY_PROMPT
    total = 0.0
    for prompt in prompts:
        cfg = replace(config, prompt=replace(template, prompt=prompt))
        total += scoring.score_pair(backend, source, target, cfg)
    return total / len(prompts)


def prompt_search(
    backend: Backend,
    dev_corpus: "Sequence[TextInstance]",
    prompt_set: PromptSet | Sequence[str],
    config: "ScoreConfig",
    measure: str,
    perspective: str | None = None,
    preferences: Sequence | None = None,
) -> list[tuple[str, float]]:
    """Rank candidate prompts by metric-human agreement on a dev corpus.

    Each prompt is evaluated independently with a single-prompt configuration;
    ties break lexicographically by prompt string.  The first entry is the
    selected prompt.
    """
    from . import metaeval, scoring

    if not dev_corpus:
        raise ValidationError("prompt search needs a non-empty development corpus")
    prompts = list(prompt_set.prompts if isinstance(prompt_set, PromptSet) else prompt_set)
    if not prompts:
        raise ValidationError("prompt search needs a non-empty prompt set")
    template = config.prompt or IDENTITY_PROMPT
    results = []
    for prompt in prompts:
        cfg = replace(config, prompt=replace(template, prompt=prompt))
        table = scoring.score_corpus(backend, dev_corpus, cfg)
        value = metaeval.evaluate_table(
            table, dev_corpus, measure, perspective=perspective, preferences=preferences
        )
        results.append((prompt, value))
    results.sort(key=lambda item: (-item[1], item[0]))
    return results
