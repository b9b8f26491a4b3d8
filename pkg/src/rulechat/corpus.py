"""Dataset loading, dialog-tree assembly, negative sampling, and splits.

The canonical record format is the utterance JSONL from the core
module; the loader accepts a key-mapping adapter for externally named
fields and tolerates a bounded fraction of malformed records.  All
sampling here is a pure function of (dataset, seed, parameters).
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence
from urllib.parse import urlparse

from .core import (
    CorpusError,
    DialogTree,
    HistoryTurn,
    Internal,
    Leaf,
    NO,
    TreeNode,
    Utterance,
    ValidationError,
    YES,
    decision_of,
    DecisionClass,
    make_utterance,
    utterance_from_dict,
)
from .text import normalize_question
from .vectors import cosine, fit_tfidf, tfidf_vectorize

log = logging.getLogger(__name__)

CANONICAL_KEYS = (
    "utterance_id",
    "tree_id",
    "source_url",
    "snippet",
    "question",
    "scenario",
    "history",
    "answer",
)


@dataclass(frozen=True)
class Scenario:
    """Scenario text with the dialog questions it was written from."""

    text: str
    provenance: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class Dataset:
    utterances: tuple[Utterance, ...]
    trees: dict[str, DialogTree] = field(default_factory=dict)
    scenarios: tuple[Scenario, ...] = ()
    sources: tuple[str, ...] = ()
    load_errors: tuple[tuple[int, str], ...] = ()

    def __post_init__(self) -> None:
        seen = set()
        for u in self.utterances:
            if u.utterance_id in seen:
                raise CorpusError(f"duplicate utterance id {u.utterance_id}")
            seen.add(u.utterance_id)

    def __len__(self) -> int:
        return len(self.utterances)

    def provenance_map(self) -> dict[str, tuple[tuple[str, str], ...]]:
        return {s.text: s.provenance for s in self.scenarios if s.provenance}


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)
    unit: str = "source"

    def __post_init__(self) -> None:
        if any(r <= 0 for r in self.ratios):
            raise ValidationError("split fractions must be positive")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValidationError("split fractions must sum to 1")
        if self.unit not in ("source", "tree"):
            raise ValidationError(f"unknown split unit {self.unit!r}")


def domain_of(source_url: str) -> str:
    """Registered host of a source URL, with any www. prefix dropped."""
    host = urlparse(source_url).hostname or ""
    if host.startswith("www."):
        host = host[4:]
    return host


def _apply_adapter(record: dict, adapter: Mapping[str, str] | None) -> dict:
    if not adapter:
        return record
    mapped = dict(record)
    for canonical, external in adapter.items():
        if external in record:
            mapped[canonical] = record[external]
    return mapped


def _iter_records(path: Path) -> Iterator[tuple[int, dict]]:
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        raise CorpusError(f"{path}: empty dataset file")
    if text.lstrip().startswith("["):
        records = json.loads(text)
        if not isinstance(records, list):
            raise CorpusError(f"{path}: expected a JSON array or JSON lines")
        for index, record in enumerate(records, start=1):
            yield index, record
    else:
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError:
                yield lineno, {"__parse_error__": True}


def load_dataset(
    path: str | Path,
    adapter: Mapping[str, str] | None = None,
    build_trees: bool = True,
    reject_fraction: float = 0.1,
) -> Dataset:
    """Load and validate a dataset file (JSON array or JSON lines).

    Per-record failures are collected with their line numbers rather
    than aborting, but a file where more than ``reject_fraction`` of
    records fail is rejected outright.  Dialog trees are assembled
    best-effort from tree_id groups; groups that do not form a
    well-formed tree are reported, not fatal.
    """
    path = Path(path)
    try:
        record_stream = list(_iter_records(path))
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: invalid JSON: {exc}") from exc

    utterances: list[Utterance] = []
    errors: list[tuple[int, str]] = []
    scenario_provenance: dict[str, tuple[tuple[str, str], ...]] = {}
    for lineno, record in record_stream:
        if not isinstance(record, dict) or record.get("__parse_error__"):
            errors.append((lineno, "invalid JSON"))
            continue
        mapped = _apply_adapter(record, adapter)
        try:
            utt = utterance_from_dict(mapped)
            if not utt.snippet.strip() or not utt.question.strip():
                raise ValidationError("empty snippet or question")
            if not utt.answer.strip():
                raise ValidationError("empty answer")
        except ValidationError as exc:
            errors.append((lineno, str(exc)))
            continue
        utterances.append(utt)
        prov = mapped.get("scenario_provenance")
        if utt.scenario and isinstance(prov, list):
            scenario_provenance[utt.scenario] = tuple(
                (str(q), str(a)) for q, a in prov
            )

    total = len(utterances) + len(errors)
    if total == 0:
        raise CorpusError(f"{path}: no records")
    if len(errors) > reject_fraction * total:
        raise CorpusError(
            f"corpus rejected: {len(errors)} of {total} records invalid"
        )
    for lineno, message in errors:
        log.warning("%s:%d: %s", path, lineno, message)

    trees: dict[str, DialogTree] = {}
    if build_trees:
        groups: dict[str, list[Utterance]] = {}
        for u in utterances:
            if u.tree_id:
                groups.setdefault(u.tree_id, []).append(u)
        for tree_id, group in groups.items():
            try:
                trees[tree_id] = build_tree(group)
            except CorpusError as exc:
                log.warning("tree %s not reconstructed: %s", tree_id, exc)

    scenario_texts = []
    seen_scenarios = set()
    for u in utterances:
        if u.scenario.strip() and u.scenario not in seen_scenarios:
            seen_scenarios.add(u.scenario)
            scenario_texts.append(u.scenario)
    scenarios = tuple(
        Scenario(text, scenario_provenance.get(text, ())) for text in scenario_texts
    )
    sources = tuple(dict.fromkeys(u.source_url for u in utterances if u.source_url))
    return Dataset(
        utterances=tuple(utterances),
        trees=trees,
        scenarios=scenarios,
        sources=sources,
        load_errors=tuple(errors),
    )


def build_tree(utterances: Sequence[Utterance]) -> DialogTree:
    """Reassemble one dialog tree from the utterances it unrolled into.

    Every utterance addresses the node at the end of its history path;
    internal nodes carry follow-up golds and leaves carry terminal
    golds.  Conflicting golds at one path, or a path with a missing
    sibling branch, are errors.
    """
    if not utterances:
        raise CorpusError("no utterances to build a tree from")
    tree_ids = {u.tree_id for u in utterances}
    if len(tree_ids) != 1:
        raise CorpusError(f"utterances span multiple tree ids: {sorted(tree_ids)}")

    by_path: dict[tuple, str] = {}
    for u in utterances:
        path = tuple((normalize_question(t.followup), t.answer) for t in u.history)
        existing = by_path.get(path)
        if existing is not None and existing != u.answer:
            raise CorpusError(
                f"conflicting golds at path {list(path)}: "
                f"{existing!r} vs {u.answer!r}"
            )
        by_path[path] = u.answer

    visited = set()

    def assemble(path: tuple) -> TreeNode:
        answer = by_path.get(path)
        if answer is None:
            raise CorpusError(f"incomplete tree: no utterance at path {list(path)}")
        visited.add(path)
        if decision_of(answer) is not DecisionClass.MORE:
            return Leaf(answer)
        followup = answer
        key = normalize_question(followup)
        return Internal(
            followup=followup,
            yes_child=assemble(path + ((key, YES),)),
            no_child=assemble(path + ((key, NO),)),
        )

    root = assemble(())
    stray = set(by_path) - visited
    if stray:
        raise CorpusError(
            f"inconsistent histories: {len(stray)} paths unreachable from the root"
        )
    first = utterances[0]
    return DialogTree(
        root=root,
        question=first.question,
        rule_text=first.snippet,
        tree_id=first.tree_id,
        source_url=first.source_url,
    )


def _distinct_pairs(
    utterances: Sequence[Utterance],
) -> list[tuple[str, str, Utterance]]:
    """Distinct (question, snippet) pairs in first-occurrence order, with
    a representative utterance each."""
    seen = set()
    pairs = []
    for u in utterances:
        key = (normalize_question(u.question), u.snippet)
        if key not in seen:
            seen.add(key)
            pairs.append((u.question, u.snippet, u))
    return pairs


def sample_negative_questions(ds: Dataset, seed: int = 0) -> list[Utterance]:
    """One distractor utterance per (question, rule) pair.

    The distractor question is drawn uniformly from questions whose
    source documents never include the rule's own, labeled Irrelevant,
    with an empty history and scenario.
    """
    question_sources: dict[str, set[str]] = {}
    question_order: list[str] = []
    for u in ds.utterances:
        if u.question not in question_sources:
            question_sources[u.question] = set()
            question_order.append(u.question)
        question_sources[u.question].add(u.source_url)
    all_sources = {s for sources in question_sources.values() for s in sources}
    if len(all_sources) < 2:
        raise CorpusError("no negative candidates: need at least two source documents")

    rng = random.Random(seed)
    negatives = []
    for _, snippet, rep in _distinct_pairs(ds.utterances):
        candidates = [
            q for q in question_order if rep.source_url not in question_sources[q]
        ]
        if not candidates:
            continue
        sampled = rng.choice(candidates)
        negatives.append(
            make_utterance(
                snippet=snippet,
                question=sampled,
                answer="Irrelevant",
                history=(),
                scenario="",
                tree_id=rep.tree_id,
                source_url=rep.source_url,
            )
        )
    return negatives


def _pair_followups(utterances: Sequence[Utterance]) -> dict[tuple, list[str]]:
    """Follow-up questions seen for each (question, snippet) pair, from
    history turns and follow-up golds."""
    followups: dict[tuple, list[str]] = {}
    for u in utterances:
        key = (normalize_question(u.question), u.snippet)
        bucket = followups.setdefault(key, [])
        for turn in u.history:
            if turn.followup not in bucket:
                bucket.append(turn.followup)
        if decision_of(u.answer) is DecisionClass.MORE and u.answer not in bucket:
            bucket.append(u.answer)
    return followups


def sample_negative_scenarios(
    ds: Dataset,
    seed: int = 0,
    threshold: float = 0.5,
    max_draws: int = 1000,
) -> list[Utterance]:
    """Attach information-free scenarios to empty-scenario utterances.

    For each (question, rule) pair, candidate scenarios are rejection
    sampled until one's provenance questions are all dissimilar to the
    pair's own dialog questions (every pairwise tf-idf cosine below the
    threshold).  The accepted scenario is attached to copies of the
    pair's empty-scenario utterances; labels are preserved.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError("threshold must lie in [0, 1]")
    candidates = [s for s in ds.scenarios if s.provenance]
    pair_followups = _pair_followups(ds.utterances)
    pairs = _distinct_pairs(ds.utterances)
    if len(pairs) < 2:
        raise CorpusError("need at least two (question, rule) pairs")

    all_questions = [f for fs in pair_followups.values() for f in fs]
    for s in candidates:
        all_questions.extend(q for q, _ in s.provenance)
    if not candidates or not any(all_questions):
        raise CorpusError("no scenario candidates carry provenance")
    tfidf = fit_tfidf(all_questions)
    vector_cache = {q: tfidf_vectorize(tfidf, q) for q in set(all_questions)}

    rng = random.Random(seed)
    negatives = []
    for question, snippet, _ in pairs:
        key = (normalize_question(question), snippet)
        own = [vector_cache[f] for f in pair_followups.get(key, [])]
        targets = [
            u
            for u in ds.utterances
            if (normalize_question(u.question), u.snippet) == key
            and not u.scenario.strip()
        ]
        if not targets:
            continue
        accepted = None
        for _ in range(max_draws):
            candidate = rng.choice(candidates)
            theirs = [vector_cache[q] for q, _ in candidate.provenance]
            worst = max(
                (cosine(a, b) for a in own for b in theirs),
                default=0.0,
            )
            if worst < threshold:
                accepted = candidate
                break
        if accepted is None:
            log.warning(
                "no acceptable negative scenario for %r after %d draws",
                question,
                max_draws,
            )
            continue
        for u in targets:
            negatives.append(
                make_utterance(
                    snippet=u.snippet,
                    question=u.question,
                    answer=u.answer,
                    history=u.history,
                    scenario=accepted.text,
                    tree_id=u.tree_id,
                    source_url=u.source_url,
                )
            )
    return negatives


def split_dataset(
    ds: Dataset, spec: SplitSpec | None = None, seed: int = 0
) -> tuple[Dataset, Dataset, Dataset]:
    """Three-way split at unit granularity, stratified by domain.

    Units (sources by default, trees otherwise) are shuffled per domain
    and allocated to train/dev/test by largest remainder, so every
    utterance of a unit lands in exactly one split.
    """
    spec = spec or SplitSpec()

    def unit_of(u: Utterance) -> str:
        return u.source_url if spec.unit == "source" else u.tree_id

    units: list[str] = list(dict.fromkeys(unit_of(u) for u in ds.utterances))
    if len(units) < 3:
        raise CorpusError("fewer units than splits")

    unit_domain: dict[str, str] = {}
    for u in ds.utterances:
        unit_domain.setdefault(unit_of(u), domain_of(u.source_url))
    by_domain: dict[str, list[str]] = {}
    for unit in units:
        by_domain.setdefault(unit_domain[unit], []).append(unit)

    rng = random.Random(seed)
    assignment: dict[str, int] = {}
    for domain in sorted(by_domain):
        members = sorted(by_domain[domain])
        rng.shuffle(members)
        n = len(members)
        exact = [r * n for r in spec.ratios]
        counts = [int(e) for e in exact]
        remainders = sorted(
            range(3), key=lambda i: (exact[i] - counts[i], -i), reverse=True
        )
        for i in remainders:
            if sum(counts) == n:
                break
            counts[i] += 1
        cursor = 0
        for split_index, count in enumerate(counts):
            for unit in members[cursor : cursor + count]:
                assignment[unit] = split_index
            cursor += count

    def subset(split_index: int) -> Dataset:
        kept = tuple(
            u for u in ds.utterances if assignment[unit_of(u)] == split_index
        )
        kept_tree_ids = {u.tree_id for u in kept}
        kept_scenarios = {u.scenario for u in kept}
        return Dataset(
            utterances=kept,
            trees={k: v for k, v in ds.trees.items() if k in kept_tree_ids},
            scenarios=tuple(s for s in ds.scenarios if s.text in kept_scenarios),
            sources=tuple(
                dict.fromkeys(u.source_url for u in kept if u.source_url)
            ),
        )

    return subset(0), subset(1), subset(2)


def virtual_user(seed: int = 0) -> Iterator[str]:
    """Endless stream of uniformly random Yes/No replies."""
    rng = random.Random(seed)
    while True:
        yield YES if rng.random() < 0.5 else NO


def dataset_stats(ds: Dataset) -> dict:
    """Summary counts for reporting."""
    by_class: dict[str, int] = {}
    for u in ds.utterances:
        label = u.decision().value
        by_class[label] = by_class.get(label, 0) + 1
    domains = sorted({domain_of(s) for s in ds.sources if s})
    return {
        "utterances": len(ds.utterances),
        "trees": len(ds.trees),
        "scenarios": len(ds.scenarios),
        "sources": len(ds.sources),
        "domains": domains,
        "by_class": dict(sorted(by_class.items())),
        "load_errors": len(ds.load_errors),
    }
