"""Command-line surface: scoring runs, meta-evaluation reports, prompt search.

Every output file is accompanied by a run manifest recording the normalized
command, configuration digest, backend descriptor, input file digests,
artifact version, and seed.  Two runs with equal manifests produce
byte-identical outputs; execution-only knobs (worker count) are excluded
from the manifest.

Exit codes: 2 usage error, 3 data error, 4 backend error.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import os
import sys
from pathlib import Path

import click

from . import __version__, baselines, metaeval, prompting, scoring
from .backends import CopyNgramBackend, ExternalBackend, TableBackend
from .data import load_corpus, load_preferences, load_scores, save_scores
from .errors import BackendError, ConfigError, ValidationError

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_BACKEND = 4

ENDPOINT_ENV = "GENSCORE_BACKEND_ENDPOINT"


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, click.UsageError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_USAGE)
        except ValidationError as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except BackendError as exc:
            click.echo(f"backend error: {exc}", err=True)
            sys.exit(EXIT_BACKEND)

    return wrapper


def _file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(
    out_path: str | Path,
    command: str,
    params: dict,
    inputs: list[str],
    config_digest: str,
    backend: dict | None,
    seed: int = 0,
) -> None:
    manifest = {
        "artifact_version": __version__,
        "command": command,
        "params": {k: params[k] for k in sorted(params)},
        "config_digest": config_digest,
        "backend": backend,
        "inputs": {str(p): _file_digest(p) for p in sorted(inputs)},
        "seed": seed,
    }
    path = Path(str(out_path) + ".manifest.json")
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def build_backend(kind: str, config_path: str | None):
    if kind == "table":
        if not config_path:
            raise ConfigError("the table backend requires --backend-config")
        return TableBackend.from_file(config_path)
    if kind == "copy-ngram":
        if not config_path:
            raise ConfigError("the copy-ngram backend requires --backend-config")
        with open(config_path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
        if "pairs" in cfg:
            pairs = [(s, t) for s, t in cfg["pairs"]]
        elif "pairs_path" in cfg:
            pairs = []
            with open(cfg["pairs_path"], "r", encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        src, _, tgt = line.rstrip("\n").partition("\t")
                        pairs.append((src, tgt))
        else:
            raise ConfigError("copy-ngram config needs 'pairs' or 'pairs_path'")
        kwargs = {
            k: cfg[k]
            for k in ("alpha", "lambda_copy", "lambda_bi", "lambda_uni")
            if k in cfg
        }
        return CopyNgramBackend.train(pairs, **kwargs)
    if kind == "external":
        cfg = {}
        if config_path:
            with open(config_path, "r", encoding="utf-8") as fh:
                cfg = json.load(fh)
        if "command" in cfg:
            return ExternalBackend(command=cfg["command"])
        endpoint = cfg.get("endpoint") or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise ConfigError(
                f"external backend needs an endpoint (--backend-config or ${ENDPOINT_ENV})"
            )
        return ExternalBackend(endpoint=endpoint)
    raise ConfigError(f"unknown backend kind {kind!r}")


def build_weights(name: str, stopwords_path: str | None, corpus, backend) -> scoring.WeightScheme:
    if name == "uniform":
        return scoring.Uniform()
    if name == "nostop":
        if stopwords_path:
            words = frozenset(
                w.strip()
                for w in Path(stopwords_path).read_text(encoding="utf-8").splitlines()
                if w.strip()
            )
            return scoring.UniformNoStop(words)
        return scoring.UniformNoStop()
    if name == "idf":
        # documents: every reference and hypothesis text in the corpus
        docs = []
        for inst in corpus:
            docs.extend(inst.references)
            docs.extend(o.hypothesis for o in inst.outputs)
        dfs: dict[str, int] = {}
        for doc in docs:
            for tok in set(backend.tokenize(doc)):
                dfs[tok] = dfs.get(tok, 0) + 1
        return scoring.Idf(dfs, max(len(docs), 1))
    if name == "prior":
        return scoring.TargetPrior()
    raise ConfigError(f"unknown weight scheme {name!r}")


def _descriptor_dict(backend) -> dict:
    d = backend.descriptor
    return {"name": d.name, "kind": d.kind, "tokenizer_id": d.tokenizer_id}


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Generation-probability metric engine and meta-evaluation harness."""


@main.command("score")
@click.argument("corpus_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--backend", "backend_kind", type=click.Choice(["table", "copy-ngram", "external"]), required=True)
@click.option("--backend-config", type=click.Path(exists=True, dir_okay=False))
@click.option("--direction", type=click.Choice([d.value for d in scoring.Direction]), default="faithfulness")
@click.option("--weights", "weights_name", type=click.Choice(["uniform", "nostop", "idf", "prior"]), default="uniform")
@click.option("--stopwords", "stopwords_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--agg", type=click.Choice(["mean", "sum"]), default="mean")
@click.option("--multi-ref", type=click.Choice(["max", "mean"]), default="max")
@click.option("--prompt", "prompt_text", default=None, help="A single prompt string.")
@click.option("--prompt-set", default=None, help="Built-in set name or prompt file; ensembles over the set.")
@click.option("--prompt-position", type=click.Choice([p.value for p in prompting.PromptPosition]), default="target-prepend")
@click.option("--score-prompt-tokens/--no-score-prompt-tokens", default=True)
@click.option("--metric-name", default="genscore")
@click.option("--workers", type=int, default=1)
@click.option("--skip-errors", is_flag=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@handle_errors
def cmd_score(
    corpus_path,
    backend_kind,
    backend_config,
    direction,
    weights_name,
    stopwords_path,
    agg,
    multi_ref,
    prompt_text,
    prompt_set,
    prompt_position,
    score_prompt_tokens,
    metric_name,
    workers,
    skip_errors,
    out_path,
):
    """Score a corpus and write a score table plus its run manifest."""
    if prompt_text and prompt_set:
        raise ConfigError("--prompt and --prompt-set are mutually exclusive")
    corpus = load_corpus(corpus_path)
    backend = build_backend(backend_kind, backend_config)
    position = prompting.PromptPosition(prompt_position)
    prompt = None
    if prompt_text:
        prompt = prompting.PromptApplication(prompt_text, position, score_prompt_tokens)
    elif prompt_set:
        ps = prompting.get_prompt_set(prompt_set)
        prompt = prompting.PromptEnsemble(ps.prompts, position, score_prompt_tokens)
    config = scoring.ScoreConfig(
        direction=scoring.Direction(direction),
        weights=build_weights(weights_name, stopwords_path, corpus, backend),
        aggregation=scoring.Aggregation(agg),
        multi_ref=scoring.MultiRef(multi_ref),
        prompt=prompt,
    )
    table = scoring.score_corpus(
        backend, corpus, config, metric_name=metric_name, workers=workers, skip_errors=skip_errors
    )
    save_scores(table, out_path)
    inputs = [corpus_path] + ([backend_config] if backend_config else [])
    write_manifest(
        out_path,
        "score",
        {
            "direction": direction,
            "weights": weights_name,
            "agg": agg,
            "multi_ref": multi_ref,
            "prompt": prompt_text,
            "prompt_set": prompt_set,
            "prompt_position": prompt_position,
            "score_prompt_tokens": score_prompt_tokens,
            "metric_name": metric_name,
            "skip_errors": skip_errors,
        },
        inputs,
        table.config_digest,
        _descriptor_dict(backend),
    )
    click.echo(f"wrote {len(table.scores)} scores to {out_path}")


@main.command("score-baseline")
@click.argument("corpus_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--metric", type=click.Choice(baselines.BASELINE_METRICS), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@handle_errors
def cmd_score_baseline(corpus_path, metric, out_path):
    """Score a corpus with a classical reference-based metric."""
    corpus = load_corpus(corpus_path)
    table = baselines.score_corpus_baseline(corpus, metric)
    save_scores(table, out_path)
    write_manifest(out_path, "score-baseline", {"metric": metric}, [corpus_path], table.config_digest, None)
    click.echo(f"wrote {len(table.scores)} scores to {out_path}")


def _write_report(out_path: str, rows: list[dict]) -> None:
    Path(out_path + ".json").write_text(
        json.dumps(rows, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    if rows:
        with open(out_path + ".csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)


@main.command("metaeval")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--scores", "score_paths", type=click.Path(exists=True, dir_okay=False), multiple=True, required=True)
@click.option("--preferences", "pref_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--measure", type=click.Choice(["pearson", "spearman", "kendall", "darr", "accuracy"]), default="spearman")
@click.option("--perspective", default=None)
@click.option("--grouping", type=click.Choice([g.value for g in metaeval.Grouping]), default="pooled")
@click.option("--compare", nargs=2, type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--bootstrap", "resamples", type=int, default=1000)
@click.option("--seed", type=int, default=0)
@click.option("--analysis", type=click.Choice(["topk", "buckets", "bias"]), default=None)
@click.option("--ks", default="1,2,3,4,5", help="Comma-separated k values for --analysis topk.")
@click.option("--min-count", type=int, default=500, help="Bucket retention threshold for --analysis buckets.")
@click.option("--out", "out_path", required=True)
@handle_errors
def cmd_metaeval(
    corpus_path,
    score_paths,
    pref_path,
    measure,
    perspective,
    grouping,
    compare,
    resamples,
    seed,
    analysis,
    ks,
    min_count,
    out_path,
):
    """Measure metric-human agreement, significance, and robustness."""
    corpus = load_corpus(corpus_path)
    preferences = load_preferences(pref_path, corpus) if pref_path else None
    grouping = metaeval.Grouping(grouping)
    inputs = [corpus_path, *score_paths] + ([pref_path] if pref_path else [])

    rows: list[dict] = []
    if compare:
        table_a = load_scores(compare[0])
        table_b = load_scores(compare[1])
        result = metaeval.bootstrap_compare(
            table_a,
            table_b,
            corpus,
            measure,
            perspective=perspective,
            preferences=preferences,
            resamples=resamples,
            seed=seed,
        )
        rows.append(
            {
                "metric_a": table_a.metric_name,
                "metric_b": table_b.metric_name,
                "measure": measure,
                "observed_a": result.observed_a,
                "observed_b": result.observed_b,
                "p_value": result.p_value,
                "winner": result.winner,
                "resamples": result.resamples,
                "seed": result.seed,
            }
        )
        inputs += list(compare)
    elif analysis == "topk":
        table = load_scores(score_paths[0])
        k_values = [int(k) for k in ks.split(",") if k.strip()]
        for k, value in metaeval.topk_analysis(
            (corpus, table), perspective, k_values, measure, grouping
        ):
            rows.append({"k": k, "measure": measure, "value": value})
    elif analysis == "buckets":
        table = load_scores(score_paths[0])
        report = metaeval.length_bucket_analysis(
            (corpus, table), perspective, min_count=min_count, measure=measure
        )
        for (lo, hi), value in report.items():
            rows.append({"bucket_lo": lo, "bucket_hi": hi, "measure": measure, "value": value})
    elif analysis == "bias":
        table = load_scores(score_paths[0])
        for system, diff in metaeval.bias_rank_difference(corpus, table, perspective).items():
            rows.append({"system_id": system, "rank_difference": diff})
    else:
        for path in score_paths:
            table = load_scores(path)
            value = metaeval.evaluate_table(
                table,
                corpus,
                measure,
                perspective=perspective,
                preferences=preferences,
                grouping=grouping,
            )
            rows.append(
                {
                    "metric": table.metric_name,
                    "measure": measure,
                    "perspective": perspective,
                    "grouping": grouping.value,
                    "value": value,
                }
            )

    _write_report(out_path, rows)
    write_manifest(
        out_path,
        "metaeval",
        {
            "measure": measure,
            "perspective": perspective,
            "grouping": grouping.value,
            "analysis": analysis,
            "compare": bool(compare),
            "resamples": resamples,
            "ks": ks,
            "min_count": min_count,
        },
        inputs,
        "-",
        None,
        seed=seed,
    )
    click.echo(f"wrote {len(rows)} report rows to {out_path}.json")


@main.command("prompt-search")
@click.argument("corpus_path", type=click.Path(exists=True, dir_okay=False), required=False)
@click.option("--dump-builtin", type=click.Choice(["s2h", "h2r"]), default=None)
@click.option("--backend", "backend_kind", type=click.Choice(["table", "copy-ngram", "external"]))
@click.option("--backend-config", type=click.Path(exists=True, dir_okay=False))
@click.option("--prompt-set", default=None)
@click.option("--prompt-position", type=click.Choice([p.value for p in prompting.PromptPosition]), default="target-prepend")
@click.option("--direction", type=click.Choice([d.value for d in scoring.Direction]), default="faithfulness")
@click.option("--measure", type=click.Choice(["pearson", "spearman", "kendall", "darr", "accuracy"]), default="spearman")
@click.option("--perspective", default=None)
@click.option("--preferences", "pref_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False))
@handle_errors
def cmd_prompt_search(
    corpus_path,
    dump_builtin,
    backend_kind,
    backend_config,
    prompt_set,
    prompt_position,
    direction,
    measure,
    perspective,
    pref_path,
    out_path,
):
    """Rank candidate prompts by dev-set agreement; or dump a built-in set."""
    if dump_builtin:
        for prompt in prompting.get_prompt_set(dump_builtin).prompts:
            click.echo(prompt)
        return
    if not corpus_path or not backend_kind or not prompt_set or not out_path:
        raise ConfigError(
            "prompt search needs a corpus, --backend, --prompt-set, and --out"
        )
    corpus = load_corpus(corpus_path)
    preferences = load_preferences(pref_path, corpus) if pref_path else None
    backend = build_backend(backend_kind, backend_config)
    ps = prompting.get_prompt_set(prompt_set)
    config = scoring.ScoreConfig(
        direction=scoring.Direction(direction),
        prompt=prompting.PromptApplication(
            position=prompting.PromptPosition(prompt_position)
        ),
    )
    ranked = prompting.prompt_search(
        backend, corpus, ps, config, measure, perspective=perspective, preferences=preferences
    )
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "prompt", "correlation", "selected"])
        for i, (prompt, value) in enumerate(ranked, start=1):
            writer.writerow([i, prompt, format(value, ".17g"), str(i == 1).lower()])
    inputs = [corpus_path] + ([backend_config] if backend_config else []) + (
        [pref_path] if pref_path else []
    )
    write_manifest(
        out_path,
        "prompt-search",
        {
            "prompt_set": prompt_set,
            "prompt_position": prompt_position,
            "direction": direction,
            "measure": measure,
            "perspective": perspective,
        },
        inputs,
        "-",
        _descriptor_dict(backend),
    )
    click.echo(f"selected prompt: {ranked[0][0]!r} ({measure}={ranked[0][1]:.6f})")


if __name__ == "__main__":
    main()
