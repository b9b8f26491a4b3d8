"""End-to-end acceptance checks.

Each test covers one promised behavior and prints a single
[PASS]/[FAIL] line naming it, so the suite output doubles as a
checklist.  The corpus-structure check needs the published data and
skips, visibly, when $SHARC_DATA_DIR is not set.
"""
from __future__ import annotations

import itertools
import os
import random
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import sparse

from _helpers import (
    brute_force_irregularities,
    random_tree,
    root_leaf_paths,
)
from rulechat.core import (
    HistoryTurn,
    make_utterance,
    tree_irregularities,
)
from rulechat.corpus import (
    Dataset,
    Scenario,
    load_dataset,
    sample_negative_questions,
    sample_negative_scenarios,
)
from rulechat.linear import lr_gradient, lr_loss, predict_probabilities, train_multinomial
from rulechat.metrics import (
    bleu,
    cohens_kappa,
    corpus_bleu,
    fleiss_kappa,
    micro_macro_accuracy,
)
from rulechat.pipeline import (
    ScriptedOracle,
    evaluate_pipeline,
    gold_components,
    heuristic_components,
    run_dialog,
)
from rulechat.text import normalize_question
from rulechat.vectors import cosine, fit_tfidf, tfidf_vectorize


def checklist(name):
    """Print one [PASS]/[FAIL] line for the criterion, then re-raise."""

    class _Reporter:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            verdict = "PASS" if exc_type is None else "FAIL"
            print(f"[{verdict}] {name}")
            return False

    return _Reporter()


# -- 1. corpus structural reproduction -----------------------------------------


EXPECTED_SPLITS = {"train": 21890, "dev": 2270, "test": 8276}
EXPECTED_ENTAILMENT_SPLITS = {
    "train": (2373, 2296, 10912),
    "dev": (271, 253, 1098),
    "test": (919, 944, 4003),
}


def _find_split_file(root: Path, split: str) -> Path | None:
    for candidate in sorted(root.rglob("*.json*")):
        if split in candidate.name.lower() and "negative" not in candidate.name.lower():
            return candidate
    return None


def test_published_corpus_reproduces_exactly():
    data_dir = os.environ.get("SHARC_DATA_DIR")
    if not data_dir:
        print("[SKIP] corpus structural reproduction (set $SHARC_DATA_DIR to run)")
        pytest.skip("published corpus not available")
    with checklist("corpus structural reproduction"):
        started = time.perf_counter()
        sizes = {}
        provenance_seen = False
        for split, expected in EXPECTED_SPLITS.items():
            path = _find_split_file(Path(data_dir), split)
            assert path is not None, f"no {split} file under {data_dir}"
            ds = load_dataset(path, build_trees=False)
            sizes[split] = len(ds)
            assert len(ds) == expected, f"{split}: {len(ds)} != {expected}"
            if ds.provenance_map():
                provenance_seen = True
                from rulechat.entailment import derive_entailment_corpus

                instances = derive_entailment_corpus(
                    ds.utterances, ds.provenance_map()
                )
                by_label = {
                    label: sum(1 for i in instances if i.label == label)
                    for label in ("Entailment", "Contradiction", "Neutral")
                }
                expected_e = EXPECTED_ENTAILMENT_SPLITS[split]
                assert (
                    by_label["Entailment"],
                    by_label["Contradiction"],
                    by_label["Neutral"],
                ) == expected_e
        assert sum(sizes.values()) == 32436
        assert time.perf_counter() - started < 60.0
        if not provenance_seen:
            print("(corpus carries no scenario provenance; entailment-split "
                  "check not applicable)")


# -- 2. metric correctness ------------------------------------------------------


BLEU_FIXTURES = [
    # (candidate, reference, order, expected)
    ("a b c d e", "a b c d e f g h i", 1, 0.44932896411722156),  # exp(1 - 9/5)
    ("a b c", "a b d", 1, 2 / 3),
    ("a b c", "a b d", 2, 0.5773502691896257),  # sqrt(1/3)
    ("a b", "b a", 2, 3.16227766016838e-05),  # sqrt(epsilon) smoothing
    ("the cat sat on the mat", "the cat sat on the mat", 4, 1.0),
    ("x y z", "a b c", 4, 0.0),
]

ACCURACY_FIXTURES = [
    # (golds, preds, micro, macro)
    (list("aabb"), list("aaba"), 3 / 4, 3 / 4),
    (list("abab"), list("abab"), 1.0, 1.0),
    (list("abab"), list("baba"), 0.0, 0.0),
    (list("aaab"), list("aaaa"), 3 / 4, 1 / 2),
    (list("xxyzzz"), list("xyyzzx"), 2 / 3, 13 / 18),
]

COHEN_FIXTURES = [
    (list("YYYNNNII"), list("YYNNNIII"), 27 / 43),
    (["y"] * 25 + ["n"] * 25, ["y"] * 20 + ["n"] * 5 + ["y"] * 10 + ["n"] * 15, 0.4),
    ([1, 1, 1, 2, 2, 2, 3, 3, 3, 1], [1, 1, 2, 2, 2, 3, 3, 3, 3, 1], 47 / 67),
    (list("abab"), list("abab"), 1.0),
    (list("aabb"), list("abab"), 0.0),
]

# the worked 10-item, 14-rater, 5-category agreement table
FLEISS_PUBLISHED = [
    [0, 0, 0, 0, 14],
    [0, 2, 6, 4, 2],
    [0, 0, 3, 5, 6],
    [0, 3, 9, 2, 0],
    [2, 2, 8, 1, 1],
    [7, 7, 0, 0, 0],
    [3, 2, 6, 3, 0],
    [2, 5, 3, 2, 2],
    [6, 5, 2, 1, 0],
    [0, 2, 2, 3, 7],
]

FLEISS_FIXTURES = [
    (FLEISS_PUBLISHED, 0.20993070442195522),
    ([[3, 0], [2, 1], [1, 2], [0, 3]], 1 / 3),
    ([[1, 1], [1, 1]], -1.0),
    ([[2, 0, 0], [0, 2, 0], [0, 0, 2], [2, 0, 0]], 1.0),
    ([[5, 0], [5, 0], [0, 5]], 1.0),
]


def test_metrics_match_hand_computed_oracles():
    with checklist("metric correctness vs hand-computed oracles"):
        for candidate, reference, order, expected in BLEU_FIXTURES:
            assert bleu(candidate, reference, order) == pytest.approx(
                expected, abs=1e-6
            )
        identical = "the very same answer text as the reference"
        assert bleu(identical, identical) == 1.0
        assert corpus_bleu([("a", "a"), ("b c", "b c")], 1) == 1.0

        for golds, preds, micro, macro in ACCURACY_FIXTURES:
            got = micro_macro_accuracy(preds, golds)
            assert got[0] == pytest.approx(micro, abs=1e-6)
            assert got[1] == pytest.approx(macro, abs=1e-6)

        for a, b, expected in COHEN_FIXTURES:
            assert cohens_kappa(a, b) == pytest.approx(expected, abs=1e-6)
        assert cohens_kappa(list("abcd"), list("abcd")) == 1.0

        for table, expected in FLEISS_FIXTURES:
            assert fleiss_kappa(table) == pytest.approx(expected, abs=1e-6)

        # balanced 4-class golds, uniform random predictions
        rng = random.Random(97)
        classes = ["Yes", "No", "Irrelevant", "More"]
        golds = [classes[i % 4] for i in range(10_000)]
        preds = [rng.choice(classes) for _ in range(10_000)]
        micro, _ = micro_macro_accuracy(preds, golds)
        assert abs(micro - 0.25) <= 0.03


# -- 3. oracle equivalence -------------------------------------------------------


def test_gold_dialogs_equal_tree_traversal_exhaustively(random_trees):
    with checklist("oracle equivalence: dialogs replay every tree path"):
        started = time.perf_counter()
        assert len(random_trees) >= 20
        checked = 0
        for tree in random_trees:
            components = gold_components(tree)
            utterance = make_utterance(
                snippet="You qualify if you meet the requirements.",
                question="Do I qualify?",
                answer="",
                tree_id=tree.tree_id,
            )
            for turns, leaf_answer in root_leaf_paths(tree):
                oracle = ScriptedOracle(tree, [t.answer for t in turns])
                transcript = run_dialog(
                    utterance, oracle, components, max_steps=64
                )
                assert transcript.final.is_terminal
                assert transcript.final.text == leaf_answer
                checked += 1
        assert checked >= len(random_trees)
        assert time.perf_counter() - started < 5.0


# -- 4. heuristic quality floor ---------------------------------------------------


def test_heuristic_floor_on_the_labeled_suite(suite40):
    with checklist("heuristic floor: micro >= 0.85, BLEU-1 >= 0.5 on the suite"):
        report = evaluate_pipeline(suite40, heuristic_components())
        assert report.meta["size"] == 40
        assert report.micro_acc >= 0.85
        assert report.bleu[1] >= 0.5


# -- 5. sampler properties ---------------------------------------------------------


def _scenario_dataset() -> Dataset:
    utts = []
    specs = [
        ("Can I apply for the grant?", "You get the grant if you own the home.",
         "https://one.example/grant", "Do you own the home?"),
        ("Do I get the discount?", "Members get the discount on weekdays.",
         "https://two.example/discount", "Are you a member?"),
        ("Can I park here overnight?", "Permit holders may park overnight.",
         "https://three.example/parking", "Do you hold a permit?"),
        ("Is the course free for me?", "The course is free if you claim benefits.",
         "https://four.example/course", "Do you claim benefits?"),
    ]
    for i, (q, snippet, src, followup) in enumerate(specs):
        utts.append(
            make_utterance(
                snippet=snippet, question=q, answer=followup,
                source_url=src, tree_id=f"t{i}", utterance_id=f"p{i}a",
            )
        )
        utts.append(
            make_utterance(
                snippet=snippet, question=q, answer="Yes",
                history=(HistoryTurn(followup, "Yes"),),
                source_url=src, tree_id=f"t{i}", utterance_id=f"p{i}b",
            )
        )
    scenarios = (
        Scenario("I own my home outright.", (("Do you own the home?", "Yes"),)),
        Scenario("The moon was full last night.",
                 (("Was the moon full last night?", "No"),)),
        Scenario("My cousin plays the violin.",
                 (("Does your cousin play the violin?", "Yes"),)),
        Scenario("It rained on Tuesday.", (("Did it rain on Tuesday?", "Yes"),)),
    )
    return Dataset(utterances=tuple(utts), scenarios=scenarios)


def test_sampler_properties(suite40, fixtures_dir):
    with checklist("sampler properties: source disjointness, cosine bound, determinism"):
        ds = load_dataset(fixtures_dir / "suite40.jsonl", build_trees=False)
        negatives = sample_negative_questions(ds, seed=11)
        assert negatives
        question_sources: dict[str, set[str]] = {}
        for u in ds.utterances:
            question_sources.setdefault(u.question, set()).add(u.source_url)
        shared = [
            n for n in negatives if n.source_url in question_sources[n.question]
        ]
        assert shared == []
        assert sample_negative_questions(ds, seed=11) == negatives

        scen_ds = _scenario_dataset()
        threshold = 0.5
        accepted = sample_negative_scenarios(scen_ds, seed=2, threshold=threshold)
        assert accepted

        # brute-force all-pairs oracle over the same vector space
        provenance = {s.text: s.provenance for s in scen_ds.scenarios}
        own_followups: dict[tuple, list[str]] = {}
        for u in scen_ds.utterances:
            key = (normalize_question(u.question), u.snippet)
            bucket = own_followups.setdefault(key, [])
            for turn in u.history:
                if turn.followup not in bucket:
                    bucket.append(turn.followup)
            if u.answer not in ("Yes", "No", "Irrelevant") and u.answer not in bucket:
                bucket.append(u.answer)
        vocabulary = [f for fs in own_followups.values() for f in fs]
        for s in scen_ds.scenarios:
            vocabulary.extend(q for q, _ in s.provenance)
        model = fit_tfidf(vocabulary)
        for neg in accepted:
            key = (normalize_question(neg.question), neg.snippet)
            theirs = [q for q, _ in provenance[neg.scenario]]
            sims = [
                cosine(tfidf_vectorize(model, a), tfidf_vectorize(model, b))
                for a, b in itertools.product(own_followups[key], theirs)
            ]
            assert max(sims) < threshold

        again = sample_negative_scenarios(scen_ds, seed=2, threshold=threshold)
        assert again == accepted


# -- 6. numerical checks -------------------------------------------------------------


def test_gradients_and_probability_mass():
    with checklist("numerical checks: analytic gradients, probability mass"):
        rng = np.random.default_rng(5)
        n, d, k = 12, 7, 4
        x = sparse.csr_matrix(rng.normal(size=(n, d)))
        y = np.array([i % k for i in range(n)])
        weights = rng.normal(scale=0.1, size=(k, d))
        l2 = 1e-4

        analytic = lr_gradient(weights, x, y, l2)
        eps = 1e-6
        for i in range(k):
            for j in range(d):
                bump = np.zeros_like(weights)
                bump[i, j] = eps
                hi = lr_loss(weights + bump, x, y, l2)
                lo = lr_loss(weights - bump, x, y, l2)
                numeric = (hi - lo) / (2 * eps)
                denom = max(abs(numeric), abs(analytic[i, j]), 1e-8)
                assert abs(analytic[i, j] - numeric) / denom < 1e-5

        model = train_multinomial(x, y, ("w", "x", "y", "z"), epochs=50)
        probabilities = predict_probabilities(model, x)
        row_sums = probabilities.sum(axis=1)
        assert np.all(np.abs(row_sums - 1.0) < 1e-9)


# -- 7. irregularity detection ---------------------------------------------------------


def test_irregularity_scan_matches_brute_force():
    with checklist("irregularity detection equals brute-force scan on 100 trees"):
        flagged_total = 0
        for seed in range(100):
            tree = random_tree(seed)
            fast = sorted(tree_irregularities(tree))
            slow = sorted(brute_force_irregularities(tree))
            assert fast == slow
            flagged_total += len(fast)
        # the random generator leaves sibling-identical leaves often
        # enough that the comparison is not vacuous
        assert flagged_total > 0
