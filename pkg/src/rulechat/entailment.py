"""Scenario entailment: does the user's scenario answer a follow-up?

Labels are Entailment (the scenario implies Yes), Contradiction (it
implies No), and Neutral (it says nothing about the question).  A
lexical heuristic and a trained linear model share the interface, and
the corpus derivation turns dialog provenance into labeled pairs.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

from .classify import _parse_payload, dataset_fingerprint, _model_payload
from .core import (
    NO,
    TrainingError,
    Utterance,
    ValidationError,
    YES,
    decision_of,
    DecisionClass,
)
from .linear import LinearClassifier, predict_probabilities, train_multinomial
from .parsing import detect_negation
from .text import containment, content_words, normalize_question, tokenize
from .vectors import TfidfModel, fit_tfidf, stack_blocks, tfidf_vectorize

ENTAILMENT = "Entailment"
CONTRADICTION = "Contradiction"
NEUTRAL = "Neutral"
ENTAILMENT_LABELS = (ENTAILMENT, CONTRADICTION, NEUTRAL)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EntailmentInstance:
    premise: str
    hypothesis: str
    label: str

    def __post_init__(self) -> None:
        if not self.premise.strip() or not self.hypothesis.strip():
            raise ValidationError("premise and hypothesis must be nonempty")
        if self.label not in ENTAILMENT_LABELS:
            raise ValidationError(f"unknown entailment label {self.label!r}")


@dataclass(frozen=True)
class EntailmentPrediction:
    label: str
    probabilities: tuple[tuple[str, float], ...] | None = None


@lru_cache(maxsize=1)
def _antonym_pairs() -> tuple[tuple[str, str], ...]:
    raw = resources.files("rulechat.data").joinpath("antonyms.txt").read_text()
    pairs = []
    for line in raw.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        left, _, right = line.partition("\t")
        if not right:
            continue
        pairs.append((" ".join(tokenize(left)), " ".join(tokenize(right))))
    return tuple(pairs)


def _contains_phrase(padded: str, phrase: str) -> bool:
    return f" {phrase} " in padded


def antonym_cue_fires(premise: str, hypothesis: str) -> bool:
    """True when one text holds a term and the other its opposite."""
    p = " " + " ".join(tokenize(premise)) + " "
    h = " " + " ".join(tokenize(hypothesis)) + " "
    for left, right in _antonym_pairs():
        if _contains_phrase(p, left) and _contains_phrase(h, right):
            return True
        if _contains_phrase(p, right) and _contains_phrase(h, left):
            return True
    return False


def entail_heuristic(
    premise: str,
    hypothesis: str,
    overlap_floor: float = 0.15,
    stopwords: frozenset[str] | None = None,
) -> str:
    """Lexical three-way entailment.

    The scenario must cover enough of the question's content words to
    count as being about it at all; below the floor the pair is
    Neutral.  Above it, a negation on exactly one side or an antonym
    pair firing means Contradiction, anything else Entailment.
    """
    h_content = content_words(hypothesis, stopwords)
    p_content = content_words(premise, stopwords)
    if containment(h_content, p_content) < overlap_floor:
        return NEUTRAL
    if detect_negation(premise) != detect_negation(hypothesis):
        return CONTRADICTION
    if antonym_cue_fires(premise, hypothesis):
        return CONTRADICTION
    return ENTAILMENT


# --- trained model -----------------------------------------------------------


@dataclass(frozen=True)
class EntailmentModel:
    linear: LinearClassifier
    tfidf: TfidfModel


def _lexical_features(premise: str, hypothesis: str) -> sparse.csr_matrix:
    overlap = containment(content_words(hypothesis), content_words(premise))
    neg_mismatch = float(detect_negation(premise) != detect_negation(hypothesis))
    antonym = float(antonym_cue_fires(premise, hypothesis))
    return sparse.csr_matrix(np.array([[overlap, neg_mismatch, antonym]]))


def featurize_pair(
    model: TfidfModel, premise: str, hypothesis: str
) -> sparse.csr_matrix:
    blocks = [
        tfidf_vectorize(model, premise),
        tfidf_vectorize(model, hypothesis),
        _lexical_features(premise, hypothesis),
    ]
    return stack_blocks(blocks)


def train_entailment(
    instances: Sequence[EntailmentInstance],
    seed: int = 0,
    epochs: int = 300,
    learning_rate: float = 1.0,
    l2: float = 1e-4,
) -> EntailmentModel:
    instances = list(instances)
    if not instances:
        raise TrainingError("no entailment instances")
    labels = {inst.label for inst in instances}
    missing = [c for c in ENTAILMENT_LABELS if c not in labels]
    if missing:
        raise TrainingError(f"missing training examples for classes: {missing}")
    documents: list[str] = []
    for inst in instances:
        documents.append(inst.premise)
        documents.append(inst.hypothesis)
    tfidf = fit_tfidf(documents)
    x = sparse.vstack(
        [featurize_pair(tfidf, i.premise, i.hypothesis) for i in instances]
    )
    y = np.array([ENTAILMENT_LABELS.index(i.label) for i in instances])
    fingerprint = dataset_fingerprint(
        [i.premise for i in instances]
        + [i.hypothesis for i in instances]
        + [f"seed={seed}", f"epochs={epochs}", f"lr={learning_rate}", f"l2={l2}"]
    )
    linear = train_multinomial(
        x,
        y,
        ENTAILMENT_LABELS,
        epochs=epochs,
        learning_rate=learning_rate,
        l2=l2,
        trained_on=fingerprint,
    )
    return EntailmentModel(linear=linear, tfidf=tfidf)


def entail(model: EntailmentModel, premise: str, hypothesis: str) -> EntailmentPrediction:
    x = featurize_pair(model.tfidf, premise, hypothesis)
    probs = predict_probabilities(model.linear, x)[0]
    best = int(np.argmax(probs))
    return EntailmentPrediction(
        label=model.linear.classes[best],
        probabilities=tuple(zip(model.linear.classes, (float(p) for p in probs))),
    )


def save_entailment_model(model: EntailmentModel, path: str | Path) -> None:
    payload = _model_payload("entailment", model.linear, model.tfidf)
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_entailment_model(path: str | Path) -> EntailmentModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    linear, tfidf = _parse_payload(payload, "entailment")
    return EntailmentModel(linear=linear, tfidf=tfidf)


# --- corpus derivation -------------------------------------------------------

Provenance = Mapping[str, Sequence[tuple[str, str]]]


def derive_entailment_corpus(
    utterances: Iterable[Utterance],
    provenance: Provenance | None = None,
) -> list[EntailmentInstance]:
    """Labeled (scenario, follow-up) pairs from gold dialog structure.

    Qualifying utterances have a nonempty scenario and a follow-up
    question as gold.  The scenario-determined answer is read from
    provenance (scenario text to its source question/answer pairs).
    Without provenance, the label is inferred from which branch the
    dialog continues along: when the dataset keeps exactly one
    continuation of the follow-up, the scenario fixed that answer;
    otherwise the pair is Neutral.
    """
    utterances = list(utterances)
    normalized_provenance: dict[str, dict[str, str]] = {}
    if provenance is not None:
        for scenario, qa_pairs in provenance.items():
            normalized_provenance[scenario] = {
                normalize_question(q): a for q, a in qa_pairs
            }

    continuations: dict[tuple, set[str]] = defaultdict(set)
    if provenance is None:
        for u in utterances:
            if not u.history:
                continue
            prior = u.history[:-1]
            last = u.history[-1]
            key = (
                u.tree_id,
                normalize_question(u.question),
                u.scenario,
                tuple((normalize_question(t.followup), t.answer) for t in prior),
                normalize_question(last.followup),
            )
            continuations[key].add(last.answer)

    instances: list[EntailmentInstance] = []
    skipped = 0
    for u in utterances:
        if not u.scenario.strip():
            continue
        if not u.answer.strip():
            skipped += 1
            continue
        if decision_of(u.answer) is not DecisionClass.MORE:
            continue
        followup = normalize_question(u.answer)
        label = NEUTRAL
        if provenance is not None:
            answer = normalized_provenance.get(u.scenario, {}).get(followup)
            if answer == YES:
                label = ENTAILMENT
            elif answer == NO:
                label = CONTRADICTION
        else:
            key = (
                u.tree_id,
                normalize_question(u.question),
                u.scenario,
                tuple((normalize_question(t.followup), t.answer) for t in u.history),
                followup,
            )
            kept = continuations.get(key, set())
            if kept == {YES}:
                label = ENTAILMENT
            elif kept == {NO}:
                label = CONTRADICTION
        instances.append(
            EntailmentInstance(premise=u.scenario, hypothesis=u.answer, label=label)
        )
    if skipped:
        log.warning("derive_entailment_corpus skipped %d utterances without gold", skipped)
    return instances


def read_entailment_jsonl(path: str | Path) -> list[EntailmentInstance]:
    instances = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                instances.append(
                    EntailmentInstance(
                        premise=str(record["premise"]),
                        hypothesis=str(record["hypothesis"]),
                        label=str(record.get("label", NEUTRAL)),
                    )
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad entailment record") from exc
    return instances


def write_entailment_jsonl(
    path: str | Path, instances: Iterable[EntailmentInstance]
) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for inst in instances:
            handle.write(
                json.dumps(
                    {
                        "premise": inst.premise,
                        "hypothesis": inst.hypothesis,
                        "label": inst.label,
                    },
                    ensure_ascii=False,
                )
            )
            handle.write("\n")
            count += 1
    return count
