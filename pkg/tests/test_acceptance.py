"""End-to-end acceptance gate.

Each test exercises one release criterion at its stated tolerance and prints
a single PASS line when it holds; pytest reports the failure otherwise.
"""

import json
import math
import time

import numpy as np
import pytest
from click.testing import CliRunner

from genscore.backends import EOS, CopyNgramBackend, TableBackend
from genscore.cli import main as cli_main
from genscore.data import (
    MetricScoreTable,
    SystemOutput,
    TextInstance,
    save_corpus,
)
from genscore.metaeval import (
    assign_bucket,
    bias_rank_difference,
    bootstrap_compare,
    correlate,
    darr_kendall,
    kendall_tau_b,
    pairwise_accuracy,
    spearman,
    topk_analysis,
)
from genscore.data import PreferencePair
from genscore.prompting import PromptApplication, builtin_prompt_sets, ensemble_score
from genscore.scoring import (
    Aggregation,
    Direction,
    MultiRef,
    ScoreConfig,
    score_direction,
    score_pair,
)
from genscore import baselines

from table_oracle import brute_force_chain, complete_random_table
from test_metaeval import average_ranks, pearson_oracle, random_vectors, tau_b_oracle


def report(name: str) -> None:
    print(f"ACCEPTANCE PASS: {name}")


def test_scoring_oracle(two_token_table):
    start = time.monotonic()
    rng = np.random.default_rng(100)
    vocab = ["a", "b", "c"]
    texts = ["a", "b c", "a b", "c a b"]
    backend = complete_random_table(rng, texts + ["x"], texts, vocab)

    def oracle(src, tgt, agg):
        total = brute_force_chain(backend, src, tgt)
        if agg is Aggregation.SUM:
            return total
        return total / (len(tgt.split()) + 1)

    for src in ("x", "a"):
        for tgt in texts:
            inst = TextInstance("i", src, tuple(texts), (SystemOutput("s", tgt),))
            out = inst.outputs[0]
            for agg in Aggregation:
                for direction in Direction:
                    config = ScoreConfig(direction=direction, aggregation=agg)
                    got = score_direction(backend, inst, out, config)
                    if direction is Direction.FAITHFULNESS:
                        assert got == pytest.approx(oracle(src, tgt, agg), abs=1e-9)
                    elif direction is Direction.PRECISION:
                        expected = max(oracle(ref, tgt, agg) for ref in texts)
                        assert got == pytest.approx(expected, abs=1e-9)
                    elif direction is Direction.RECALL:
                        expected = max(oracle(tgt, ref, agg) for ref in texts)
                        assert got == pytest.approx(expected, abs=1e-9)

    # shipped two-token fixture value
    inst = TextInstance("i", "x", outputs=(SystemOutput("s", "a"),))
    got = score_direction(
        two_token_table, inst, inst.outputs[0], ScoreConfig(direction=Direction.FAITHFULNESS)
    )
    assert got == pytest.approx(-1.039721, abs=1e-6)
    assert got == pytest.approx((math.log(0.5) + math.log(0.25)) / 2, abs=1e-9)

    assert time.monotonic() - start < 1.0
    report("scoring matches brute-force chain rule to 1e-9 incl. -1.039721 fixture")


def test_f_identity_and_multiref_properties():
    start = time.monotonic()
    rng = np.random.default_rng(2024)
    vocab = ["a", "b"]
    texts = ["a", "b", "a b", "b a", ""]
    backend = complete_random_table(rng, texts + ["x", "y"], texts, vocab)
    cases = 0
    while cases < 1000:
        src = texts[int(rng.integers(0, 4))] or "x"
        hyp = texts[int(rng.integers(0, len(texts)))]
        n_refs = int(rng.integers(1, 4))
        refs = tuple(texts[int(rng.integers(0, len(texts)))] for _ in range(n_refs))
        inst = TextInstance("i", src, refs, (SystemOutput("s", hyp),))
        out = inst.outputs[0]
        for multi_ref in MultiRef:
            p = score_direction(
                backend, inst, out,
                ScoreConfig(direction=Direction.PRECISION, multi_ref=multi_ref),
            )
            r = score_direction(
                backend, inst, out,
                ScoreConfig(direction=Direction.RECALL, multi_ref=multi_ref),
            )
            f = score_direction(
                backend, inst, out,
                ScoreConfig(direction=Direction.F_SCORE, multi_ref=multi_ref),
            )
            assert f == (p + r) / 2  # exact, not approximate
        for direction in (Direction.PRECISION, Direction.RECALL, Direction.F_SCORE):
            mx = score_direction(
                backend, inst, out, ScoreConfig(direction=direction, multi_ref=MultiRef.MAX)
            )
            mean = score_direction(
                backend, inst, out, ScoreConfig(direction=direction, multi_ref=MultiRef.MEAN)
            )
            assert mx >= mean
        cases += 1
    assert time.monotonic() - start < 10.0
    report("F = (P+R)/2 exactly and Max >= Mean on 1000 randomized cases")


def test_correlation_oracles():
    start = time.monotonic()
    rng = np.random.default_rng(31)
    for _ in range(200):
        n = int(rng.integers(5, 201))
        xs, ys = random_vectors(rng, n)
        assert kendall_tau_b(xs, ys) == pytest.approx(tau_b_oracle(xs, ys), abs=1e-12)
        rank_pearson = pearson_oracle(average_ranks(xs), average_ranks(ys))
        assert spearman(xs, ys) == pytest.approx(rank_pearson, abs=1e-12)
    assert time.monotonic() - start < 10.0
    report("tau-b and Spearman agree with independent oracles to 1e-12 on 200 vectors")


def test_darr_and_accuracy_semantics():
    scores = {
        ("i1", "g"): 1.0, ("i1", "b"): 0.0,
        ("i2", "g"): 2.0, ("i2", "b"): 1.0,
        ("i3", "g"): 5.0, ("i3", "b"): 0.5,
        ("i4", "g"): 0.0, ("i4", "b"): 3.0,
    }
    pairs = [PreferencePair(f"i{k}", "g", "b") for k in range(1, 5)]
    reversed_pairs = [PreferencePair(p.instance_id, p.worse_id, p.better_id) for p in pairs]

    assert darr_kendall(scores, pairs[:3]) == 1.0
    assert darr_kendall(scores, reversed_pairs[:3]) == -1.0
    assert darr_kendall(scores, pairs) == 0.5  # 3 concordant, 1 discordant
    assert pairwise_accuracy(scores, pairs[:3]) == 1.0
    assert pairwise_accuracy(scores, reversed_pairs[:3]) == 0.0
    report("DARR/accuracy: 1.0 / -1.0 / 0.0 extremes and 3-vs-1 fixture = 0.5 exactly")


def _bootstrap_fixture(seed):
    rng = np.random.default_rng(seed)
    corpus, good, noise = [], {}, {}
    for i in range(50):
        iid = f"i{i:03d}"
        human = float(rng.uniform(0, 5))
        corpus.append(TextInstance(iid, "s", (), (SystemOutput("sys", "h", {"Info": human}),)))
        good[(iid, "sys")] = human
        noise[(iid, "sys")] = float(rng.normal(0, 1))
    return (
        corpus,
        MetricScoreTable("exact", "d", good),
        MetricScoreTable("noise", "d", noise),
    )


def test_bootstrap_power_and_reproducibility():
    start = time.monotonic()
    corpus, good, noise = _bootstrap_fixture(7)

    rejections = 0
    for seed in range(20):
        result = bootstrap_compare(
            good, noise, corpus, "pearson", "Info", resamples=500, seed=seed
        )
        if result.winner == "exact" and result.p_value < 0.05:
            rejections += 1
    assert rejections >= 19

    for seed in range(5):
        self_result = bootstrap_compare(
            good, good, corpus, "pearson", "Info", resamples=500, seed=seed
        )
        assert self_result.winner == "tie"
        assert self_result.p_value >= 0.05

    a = bootstrap_compare(good, noise, corpus, "pearson", "Info", resamples=500, seed=3)
    b = bootstrap_compare(good, noise, corpus, "pearson", "Info", resamples=500, seed=3)
    assert a.p_value == b.p_value

    assert time.monotonic() - start < 30.0
    report("bootstrap rejects noise metric in >= 19/20 seeds, never self, bit-reproducible")


def test_prompt_ensembling():
    s2h, h2r = builtin_prompt_sets()
    assert len(s2h) == 70
    assert len(h2r) == 34

    pairs = [
        ("the house is big", "in short the house is big"),
        ("birds can fly", "that is to say birds fly"),
        ("rain falls down", "in other words it rains"),
    ]
    backend = CopyNgramBackend.train(pairs)
    config = ScoreConfig()
    src, tgt = "the house is big", "the house"

    prompts = list(h2r.prompts)
    singles = [
        score_pair(backend, src, tgt, ScoreConfig(prompt=PromptApplication(p)))
        for p in prompts
    ]
    combined = ensemble_score(backend, src, tgt, prompts, config)
    assert combined == pytest.approx(sum(singles) / len(singles), abs=1e-12)

    plain = score_pair(backend, src, tgt, config)
    identity = score_pair(backend, src, tgt, ScoreConfig(prompt=PromptApplication("")))
    assert plain == identity  # bit-exact

    report("34-prompt ensemble equals mean of singles to 1e-12; identity bit-exact; sizes 70/34")


def test_copy_ngram_prefers_source_vocabulary():
    pairs = [
        ("the cat sat on the mat", "a cat sat there"),
        ("dogs bark at night", "the dogs bark"),
        ("rivers flow to the sea", "a river flows seaward"),
    ]
    backend = CopyNgramBackend.train(pairs)
    source = "the cat sat on the mat"
    inst_copy = TextInstance("i", source, outputs=(SystemOutput("s", "the cat sat"),))
    inst_disjoint = TextInstance("i", source, outputs=(SystemOutput("s", "rivers flow seaward"),))
    config = ScoreConfig(direction=Direction.FAITHFULNESS)
    runs = []
    for _ in range(3):
        copy_score = score_direction(backend, inst_copy, inst_copy.outputs[0], config)
        disjoint_score = score_direction(
            backend, inst_disjoint, inst_disjoint.outputs[0], config
        )
        assert copy_score > disjoint_score
        runs.append((copy_score, disjoint_score))
    assert len(set(runs)) == 1  # deterministic
    report("copy-aware backend strictly prefers source-vocabulary hypotheses, deterministically")


def test_analyses():
    # top-k with k = all equals the unrestricted correlation
    rng = np.random.default_rng(77)
    corpus, scores = [], {}
    quality = {"s1": 5.0, "s2": 4.0, "s3": 3.0, "s4": 2.0, "s5": 1.0}
    for i in range(10):
        iid = f"i{i}"
        outs = []
        for sid, base in quality.items():
            outs.append(SystemOutput(sid, "h", {"Info": base + float(rng.normal(0, 0.1))}))
            scores[(iid, sid)] = base + float(rng.normal(0, 0.5))
        corpus.append(TextInstance(iid, "s", ("r",), tuple(outs)))
    table = MetricScoreTable("m", "d", scores)
    unrestricted = correlate(table, corpus, "Info", "pearson").value
    [(_, value)] = topk_analysis((corpus, table), "Info", [5], "pearson")
    assert value == pytest.approx(unrestricted, abs=1e-12)

    # bucket assignment against the hand partition
    hand = {14: None, 15: 0, 24: 0, 25: 1, 34: 1, 35: 2, 44: 2, 45: 3, 54: 3, 55: None}
    for length, bucket in hand.items():
        assert assign_bucket(length) == bucket

    # bias rank differences: 24-system full reversal, hand-ranked
    ids = [f"s{i:02d}" for i in range(24)]
    outs = tuple(SystemOutput(sid, "h", {"Info": 24.0 - i}) for i, sid in enumerate(ids))
    bias_corpus = [TextInstance("i1", "s", (), outs)]
    bias_table = MetricScoreTable(
        "m", "d", {("i1", sid): float(i) for i, sid in enumerate(ids)}
    )
    diffs = bias_rank_difference(bias_corpus, bias_table, "Info")
    assert diffs == {sid: 2 * i - 23 for i, sid in enumerate(ids)}
    assert sum(diffs.values()) == 0
    report("top-k(all) == unrestricted; buckets match hand partition; bias ranks sum to 0")


def test_baseline_fixtures():
    for text in ("the cat sat on the mat", "one two three"):
        assert baselines.bleu(text, [text]) == pytest.approx(1.0, abs=1e-6)
        assert baselines.rouge_n(text, text, 1)[2] == pytest.approx(1.0, abs=1e-6)
        assert baselines.rouge_l(text, text)[2] == pytest.approx(1.0, abs=1e-6)
        assert baselines.chrf(text, text) == pytest.approx(1.0, abs=1e-6)

    p, r, f = baselines.rouge_n("a b", "a b c", 1)
    assert (p, r, f) == pytest.approx((1.0, 2 / 3, 0.8), abs=1e-6)

    # hand-computed BLEU: p1=5/6, p2=3/5, p3=1/4, p4 smoothed to 1/4,
    # BP=1 -> (1/32)^(1/4) = 2^(-5/4)
    got = baselines.bleu("the cat sat on the mat", ["the cat is on the mat"])
    assert got == pytest.approx(2 ** -1.25, abs=1e-6)
    report("baseline identities = 1.0; ROUGE-1 (1.0, 2/3, 0.8) and BLEU fixtures to 1e-6")


def test_cli_determinism(tmp_path):
    config = {
        "vocabulary": ["a", "b"],
        "entries": [
            {"source": "x", "context": [], "dist": {"a": 0.5, "b": 0.25, EOS: 0.25}},
            {"source": "x", "context": ["a"], "dist": {EOS: 0.25, "a": 0.25, "b": 0.5}},
            {"source": "x", "context": ["b"], "dist": {EOS: 1.0}},
            {"source": "x", "context": ["a", "b"], "dist": {EOS: 1.0}},
        ],
    }
    backend_path = tmp_path / "table.json"
    backend_path.write_text(json.dumps(config))
    corpus = [
        TextInstance("i1", "x", ("a",), (SystemOutput("s1", "a"), SystemOutput("s2", "b"))),
        TextInstance("i2", "x", ("b",), (SystemOutput("s1", "a b"),)),
    ]
    corpus_path = tmp_path / "corpus.jsonl"
    save_corpus(corpus, corpus_path)

    runner = CliRunner()
    payloads, manifests = [], []
    for run, workers in (("r1", "1"), ("r2", "8"), ("r3", "8")):
        out = tmp_path / f"{run}.jsonl"
        result = runner.invoke(
            cli_main,
            ["score", str(corpus_path), "--backend", "table",
             "--backend-config", str(backend_path), "--direction", "faithfulness",
             "--workers", workers, "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        payloads.append(out.read_bytes())
        manifests.append((tmp_path / f"{run}.jsonl.manifest.json").read_bytes())
    assert len(set(manifests)) == 1  # equal manifests...
    assert len(set(payloads)) == 1   # ...mean byte-identical outputs, workers included
    report("CLI runs with equal manifests are byte-identical, including --workers 8")
