"""Turn-level decision: Yes, No, Irrelevant, or More.

Two classifiers share the Decision contract.  The rule-based one
aligns the dialog history against parsed conditions and evaluates the
rule three-valued.  The trained one is a multinomial logistic
regression over tf-idf blocks of rule text, question, and history.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .core import (
    Decision,
    DecisionClass,
    TrainingError,
    Utterance,
    ValidationError,
)
from .linear import LinearClassifier, predict_probabilities, train_multinomial
from .logic import align_history, condition_values, eval_logic, next_unresolved
from .parsing import RuleLogic, detect_negation
from .text import containment, content_words, default_stopwords
from .vectors import TfidfModel, fit_tfidf, stack_blocks, tfidf_vectorize

DECISION_CLASSES = (
    DecisionClass.YES.value,
    DecisionClass.NO.value,
    DecisionClass.IRRELEVANT.value,
    DecisionClass.MORE.value,
)

MODEL_FORMAT = "rulechat-model"
MODEL_VERSION = 1

# Separates history turns when history is rendered as one text field.
HISTORY_DELIMITER = " || "


@dataclass(frozen=True)
class HeuristicConfig:
    relevance_threshold: float = 0.1
    stopwords: frozenset[str] | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.relevance_threshold <= 1.0:
            raise ValidationError("relevance_threshold must lie in [0, 1]")

    def stopword_set(self) -> frozenset[str]:
        return self.stopwords if self.stopwords is not None else default_stopwords()


def heuristic_classify(
    u: Utterance, logic: RuleLogic, cfg: HeuristicConfig | None = None
) -> Decision:
    """Rule-based turn decision.

    Relevance is judged first, on question and rule text alone: the
    fraction of the question's content words found in the rule text
    must reach the threshold.  Then the history is aligned onto the
    conditions and the rule evaluated three-valued; an undetermined
    outcome means More, and a determined one is flipped by outcome
    negation and by a polarity mismatch with the question.
    """
    cfg = cfg or HeuristicConfig()
    stopwords = cfg.stopword_set()
    overlap = containment(
        content_words(u.question, stopwords), content_words(u.snippet, stopwords)
    )
    if overlap < cfg.relevance_threshold:
        return Decision(DecisionClass.IRRELEVANT)
    literal = align_history(logic, u.history)
    values = condition_values(logic, literal)
    outcome = eval_logic(logic.structure, values)
    if outcome is None:
        return Decision(DecisionClass.MORE, condition=next_unresolved(logic, values))
    flipped = outcome ^ logic.outcome_negated ^ detect_negation(u.question)
    return Decision(DecisionClass.YES if flipped else DecisionClass.NO)


# --- trained classifier ------------------------------------------------------


@dataclass(frozen=True)
class SurfaceModel:
    """Linear classifier plus the tf-idf vocabulary it was fitted with."""

    linear: LinearClassifier
    tfidf: TfidfModel


def history_as_text(u: Utterance) -> str:
    return HISTORY_DELIMITER.join(
        f"{turn.followup} ? {turn.answer}" for turn in u.history
    )


def _utterance_blocks(u: Utterance) -> tuple[str, str, str]:
    return (u.snippet, u.question, history_as_text(u))


def featurize_utterance(model: TfidfModel, u: Utterance) -> sparse.csr_matrix:
    blocks = [tfidf_vectorize(model, text) for text in _utterance_blocks(u)]
    return stack_blocks(blocks)


def _label_of(item) -> str:
    if isinstance(item, Decision):
        return item.label.value
    if isinstance(item, DecisionClass):
        return item.value
    return str(item)


def dataset_fingerprint(parts: list[str]) -> str:
    digest = hashlib.sha1("\n".join(parts).encode("utf-8")).hexdigest()
    return digest[:16]


def train_surface_lr(
    examples,
    epochs: int = 300,
    learning_rate: float = 1.0,
    l2: float = 1e-4,
    seed: int = 0,
) -> SurfaceModel:
    """Train the 4-class turn classifier.

    ``examples`` pairs each Utterance with its Decision (or class
    label).  All four classes must be present.  Zero weights plus
    full-batch descent make the result a pure function of the data and
    hyperparameters; the seed only enters the fingerprint.
    """
    examples = list(examples)
    if not examples:
        raise TrainingError("no training examples")
    labels = [_label_of(d) for _, d in examples]
    missing = [c for c in DECISION_CLASSES if c not in labels]
    if missing:
        raise TrainingError(f"missing training examples for classes: {missing}")
    documents = []
    for u, _ in examples:
        documents.extend(_utterance_blocks(u))
    tfidf = fit_tfidf(documents)
    x = sparse.vstack([featurize_utterance(tfidf, u) for u, _ in examples])
    y = np.array([DECISION_CLASSES.index(label) for label in labels])
    fingerprint = dataset_fingerprint(
        [u.utterance_id for u, _ in examples]
        + [f"epochs={epochs}", f"lr={learning_rate}", f"l2={l2}", f"seed={seed}"]
    )
    linear = train_multinomial(
        x,
        y,
        DECISION_CLASSES,
        epochs=epochs,
        learning_rate=learning_rate,
        l2=l2,
        trained_on=fingerprint,
    )
    return SurfaceModel(linear=linear, tfidf=tfidf)


def lr_classify(model: SurfaceModel, u: Utterance) -> Decision:
    x = featurize_utterance(model.tfidf, u)
    probs = predict_probabilities(model.linear, x)[0]
    best = int(np.argmax(probs))
    return Decision(
        DecisionClass(model.linear.classes[best]),
        probabilities=tuple(zip(model.linear.classes, (float(p) for p in probs))),
    )


# --- model persistence -------------------------------------------------------


def _model_payload(kind: str, linear: LinearClassifier, tfidf: TfidfModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": kind,
        "classes": list(linear.classes),
        "weights": linear.weights.tolist(),
        "trained_on": linear.trained_on,
        "vocabulary": tfidf.vocabulary,
        "idf": tfidf.idf.tolist(),
        "document_count": tfidf.document_count,
    }


def _parse_payload(payload: dict, kind: str) -> tuple[LinearClassifier, TfidfModel]:
    if payload.get("format") != MODEL_FORMAT:
        raise ValidationError("not a model file")
    if payload.get("version") != MODEL_VERSION:
        raise ValidationError(f"unsupported model version {payload.get('version')}")
    if payload.get("kind") != kind:
        raise ValidationError(
            f"expected a {kind} model, found {payload.get('kind')!r}"
        )
    linear = LinearClassifier(
        weights=np.array(payload["weights"], dtype=float),
        classes=tuple(payload["classes"]),
        trained_on=str(payload.get("trained_on", "")),
    )
    tfidf = TfidfModel(
        vocabulary={str(k): int(v) for k, v in payload["vocabulary"].items()},
        idf=np.array(payload["idf"], dtype=float),
        document_count=int(payload["document_count"]),
    )
    return linear, tfidf


def save_surface_model(model: SurfaceModel, path: str | Path) -> None:
    payload = _model_payload("surface", model.linear, model.tfidf)
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_surface_model(path: str | Path) -> SurfaceModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    linear, tfidf = _parse_payload(payload, "surface")
    return SurfaceModel(linear=linear, tfidf=tfidf)
