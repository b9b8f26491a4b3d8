"""Core data model: answers, utterances, dialog trees, serialization.

Everything downstream (classifiers, generators, the pipeline, the
service) speaks in terms of these types.  An utterance is one snapshot
of a dialog: the rule snippet, the user's question and scenario, the
follow-up exchanges so far, and the correct next move.  A dialog tree
is the annotated decision structure a snippet unrolls into, and every
root-to-node walk of a tree is an utterance.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Union

from .text import normalize_question


class RulechatError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(RulechatError):
    """A value failed structural validation."""


class TreeError(RulechatError):
    """A dialog tree or a walk through one is inconsistent."""


class PipelineError(RulechatError):
    """The dialog pipeline cannot make progress."""


class CorpusError(RulechatError):
    """A dataset operation failed."""


class TrainingError(RulechatError):
    """Model training was given unusable inputs."""


YES = "Yes"
NO = "No"
IRRELEVANT = "Irrelevant"
TERMINAL_ANSWERS = (YES, NO, IRRELEVANT)


class AnswerKind(str, Enum):
    YES = "Yes"
    NO = "No"
    IRRELEVANT = "Irrelevant"
    FOLLOW_UP = "FollowUp"


class DecisionClass(str, Enum):
    """Coarse label for the next dialog move.

    Terminal answers keep their name; any follow-up question collapses
    to ``MORE`` (more information is needed before answering).
    """

    YES = "Yes"
    NO = "No"
    IRRELEVANT = "Irrelevant"
    MORE = "More"


@dataclass(frozen=True)
class Answer:
    """The system's reply at one dialog step.

    ``text`` equals ``kind.value`` for terminal answers and holds the
    follow-up question otherwise.
    """

    kind: AnswerKind
    text: str

    @staticmethod
    def terminal(text: str) -> "Answer":
        if text not in TERMINAL_ANSWERS:
            raise ValidationError(f"not a terminal answer: {text!r}")
        return Answer(AnswerKind(text), text)

    @staticmethod
    def follow_up(question: str) -> "Answer":
        if not question.strip():
            raise ValidationError("empty follow-up question")
        return Answer(AnswerKind.FOLLOW_UP, question)

    @staticmethod
    def from_text(text: str) -> "Answer":
        if text in TERMINAL_ANSWERS:
            return Answer.terminal(text)
        return Answer.follow_up(text)

    @property
    def is_terminal(self) -> bool:
        return self.kind is not AnswerKind.FOLLOW_UP

    def decision(self) -> DecisionClass:
        if self.kind is AnswerKind.FOLLOW_UP:
            return DecisionClass.MORE
        return DecisionClass(self.text)


def decision_of(answer_text: str) -> DecisionClass:
    """Collapse a stored answer string to its decision class."""
    if answer_text in TERMINAL_ANSWERS:
        return DecisionClass(answer_text)
    return DecisionClass.MORE


@dataclass(frozen=True)
class Decision:
    """A classifier verdict for one utterance.

    ``probabilities`` is present only for probabilistic models and maps
    class name to probability.  ``condition`` points at the rule
    condition a More verdict wants resolved, when the classifier knows.
    """

    label: DecisionClass
    probabilities: tuple[tuple[str, float], ...] | None = None
    condition: int | None = None

    def probability_of(self, label: str) -> float:
        if self.probabilities is None:
            raise ValidationError("decision carries no probabilities")
        for name, p in self.probabilities:
            if name == label:
                return p
        raise ValidationError(f"unknown class {label!r}")


@dataclass(frozen=True)
class HistoryTurn:
    """One completed follow-up exchange: the question and a Yes/No reply."""

    followup: str
    answer: str

    def __post_init__(self) -> None:
        if self.answer not in (YES, NO):
            raise ValidationError(
                f"history answers must be Yes or No, got {self.answer!r}"
            )
        if not self.followup.strip():
            raise ValidationError("empty follow-up question in history")


@dataclass(frozen=True)
class Utterance:
    utterance_id: str
    tree_id: str
    source_url: str
    snippet: str
    question: str
    scenario: str
    history: tuple[HistoryTurn, ...]
    answer: str

    def decision(self) -> DecisionClass:
        return decision_of(self.answer)


def _content_digest(
    tree_id: str,
    source_url: str,
    snippet: str,
    question: str,
    scenario: str,
    history: tuple[HistoryTurn, ...],
    answer: str,
) -> str:
    payload = json.dumps(
        [
            tree_id,
            source_url,
            snippet,
            question,
            scenario,
            [[t.followup, t.answer] for t in history],
            answer,
        ],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:16]


def make_utterance(
    snippet: str,
    question: str,
    answer: str,
    history: Iterable[HistoryTurn] = (),
    scenario: str = "",
    tree_id: str = "",
    source_url: str = "",
    utterance_id: str = "",
) -> Utterance:
    """Build an utterance, deriving a stable content id when none is given.

    The id is a digest of all content fields, so re-deriving the same
    utterance from the same tree always yields the same id.
    """
    if not snippet.strip():
        raise ValidationError("utterance needs a non-empty snippet")
    if not question.strip():
        raise ValidationError("utterance needs a non-empty question")
    hist = tuple(history)
    if not utterance_id:
        utterance_id = _content_digest(
            tree_id, source_url, snippet, question, scenario, hist, answer
        )
    return Utterance(
        utterance_id=utterance_id,
        tree_id=tree_id,
        source_url=source_url,
        snippet=snippet,
        question=question,
        scenario=scenario,
        history=hist,
        answer=answer,
    )


# --- dialog trees -----------------------------------------------------------


@dataclass(frozen=True)
class Leaf:
    answer: str

    def __post_init__(self) -> None:
        if self.answer not in TERMINAL_ANSWERS:
            raise ValidationError(f"leaf answer must be terminal, got {self.answer!r}")


@dataclass(frozen=True)
class Internal:
    followup: str
    yes_child: "TreeNode"
    no_child: "TreeNode"

    def __post_init__(self) -> None:
        if not self.followup.strip():
            raise ValidationError("internal node needs a follow-up question")


TreeNode = Union[Leaf, Internal]


@dataclass(frozen=True)
class DialogTree:
    """An annotated decision structure for one (snippet, question) pair."""

    root: TreeNode
    question: str
    rule_text: str
    tree_id: str = ""
    source_url: str = ""


def tree_traverse(tree: DialogTree, replies: Iterable[str]) -> Answer:
    """Walk the tree along a list of Yes/No replies.

    A reply list shorter than the path yields the pending follow-up
    question; one that runs past a leaf is an error.
    """
    node: TreeNode = tree.root
    used = 0
    replies = list(replies)
    for reply in replies:
        if isinstance(node, Leaf):
            raise TreeError("path exhausted: replies continue past a leaf")
        if reply not in (YES, NO):
            raise ValidationError(f"replies must be Yes or No, got {reply!r}")
        node = node.yes_child if reply == YES else node.no_child
        used += 1
    if isinstance(node, Internal):
        return Answer.follow_up(node.followup)
    return Answer.terminal(node.answer)


def tree_traverse_history(tree: DialogTree, history: Iterable[HistoryTurn]) -> Answer:
    """tree_traverse over history turns, checking each turn restates the
    follow-up question of the node it answers (after normalization)."""
    node: TreeNode = tree.root
    turns = list(history)
    used = 0
    while isinstance(node, Internal):
        if used >= len(turns):
            return Answer.follow_up(node.followup)
        turn = turns[used]
        if normalize_question(turn.followup) != normalize_question(node.followup):
            raise TreeError(
                "history does not follow the tree: expected "
                f"{node.followup!r}, got {turn.followup!r}"
            )
        node = node.yes_child if turn.answer == YES else node.no_child
        used += 1
    if used < len(turns):
        raise TreeError("path exhausted: history continues past a leaf")
    return Answer.terminal(node.answer)


def enumerate_utterances(tree: DialogTree, scenario: str = "") -> list[Utterance]:
    """Unroll a tree into one utterance per node.

    Internal nodes become follow-up utterances whose history is the
    path that reaches them; leaves become terminal utterances with the
    full path.  Order is a preorder walk, Yes branch first, so the
    empty-history utterance always comes first.
    """
    out: list[Utterance] = []

    def walk(node: TreeNode, path: tuple[HistoryTurn, ...]) -> None:
        if isinstance(node, Leaf):
            out.append(
                make_utterance(
                    snippet=tree.rule_text,
                    question=tree.question,
                    answer=node.answer,
                    history=path,
                    scenario=scenario,
                    tree_id=tree.tree_id,
                    source_url=tree.source_url,
                )
            )
            return
        out.append(
            make_utterance(
                snippet=tree.rule_text,
                question=tree.question,
                answer=node.followup,
                history=path,
                scenario=scenario,
                tree_id=tree.tree_id,
                source_url=tree.source_url,
            )
        )
        walk(node.yes_child, path + (HistoryTurn(node.followup, YES),))
        walk(node.no_child, path + (HistoryTurn(node.followup, NO),))

    walk(tree.root, ())
    return out


def tree_node_count(tree: DialogTree) -> int:
    def count(node: TreeNode) -> int:
        if isinstance(node, Leaf):
            return 1
        return 1 + count(node.yes_child) + count(node.no_child)

    return count(tree.root)


def tree_irregularities(tree: DialogTree) -> list[str]:
    """Paths of internal nodes whose branches cannot change the outcome.

    A node is flagged when both children are leaves carrying the same
    answer: asking its follow-up question is pointless because either
    reply ends the dialog identically.  Paths are strings over ``y``
    and ``n`` from the root (the root itself is the empty string).
    """
    flagged: list[str] = []

    def walk(node: TreeNode, path: str) -> None:
        if isinstance(node, Leaf):
            return
        if (
            isinstance(node.yes_child, Leaf)
            and isinstance(node.no_child, Leaf)
            and node.yes_child.answer == node.no_child.answer
        ):
            flagged.append(path)
        walk(node.yes_child, path + "y")
        walk(node.no_child, path + "n")

    walk(tree.root, "")
    return flagged


# --- serialization ----------------------------------------------------------


def utterance_to_dict(utt: Utterance) -> dict:
    return {
        "utterance_id": utt.utterance_id,
        "tree_id": utt.tree_id,
        "source_url": utt.source_url,
        "snippet": utt.snippet,
        "question": utt.question,
        "scenario": utt.scenario,
        "history": [
            {"follow_up_question": t.followup, "follow_up_answer": t.answer}
            for t in utt.history
        ],
        "answer": utt.answer,
    }


def utterance_from_dict(record: dict) -> Utterance:
    try:
        history = tuple(
            HistoryTurn(t["follow_up_question"], t["follow_up_answer"])
            for t in record.get("history", [])
        )
        return Utterance(
            utterance_id=str(record["utterance_id"]),
            tree_id=str(record.get("tree_id", "")),
            source_url=str(record.get("source_url", "")),
            snippet=str(record["snippet"]),
            question=str(record["question"]),
            scenario=str(record.get("scenario", "")),
            history=history,
            answer=str(record["answer"]),
        )
    except KeyError as exc:
        raise ValidationError(f"utterance record missing field {exc}") from exc


def write_utterances_jsonl(path: str | Path, utterances: Iterable[Utterance]) -> int:
    """Write utterances as JSON lines; returns the number written."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for utt in utterances:
            handle.write(json.dumps(utterance_to_dict(utt), ensure_ascii=False))
            handle.write("\n")
            count += 1
    return count


def read_utterances_jsonl(path: str | Path) -> Iterator[Utterance]:
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: invalid JSON") from exc
            yield utterance_from_dict(record)


def _node_to_dict(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {"kind": "leaf", "answer": node.answer}
    return {
        "kind": "internal",
        "follow_up_question": node.followup,
        "yes": _node_to_dict(node.yes_child),
        "no": _node_to_dict(node.no_child),
    }


def _node_from_dict(record: dict) -> TreeNode:
    kind = record.get("kind")
    if kind == "leaf":
        return Leaf(str(record["answer"]))
    if kind == "internal":
        return Internal(
            followup=str(record["follow_up_question"]),
            yes_child=_node_from_dict(record["yes"]),
            no_child=_node_from_dict(record["no"]),
        )
    raise ValidationError(f"unknown tree node kind: {kind!r}")


def tree_to_dict(tree: DialogTree) -> dict:
    return {
        "tree_id": tree.tree_id,
        "source_url": tree.source_url,
        "question": tree.question,
        "snippet": tree.rule_text,
        "root": _node_to_dict(tree.root),
    }


def tree_from_dict(record: dict) -> DialogTree:
    try:
        return DialogTree(
            root=_node_from_dict(record["root"]),
            question=str(record["question"]),
            rule_text=str(record["snippet"]),
            tree_id=str(record.get("tree_id", "")),
            source_url=str(record.get("source_url", "")),
        )
    except KeyError as exc:
        raise ValidationError(f"tree record missing field {exc}") from exc


def save_trees(path: str | Path, trees: Iterable[DialogTree]) -> int:
    trees = list(trees)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump([tree_to_dict(t) for t in trees], handle, ensure_ascii=False, indent=2)
        handle.write("\n")
    return len(trees)


def load_trees(path: str | Path) -> list[DialogTree]:
    with open(path, "r", encoding="utf-8") as handle:
        records = json.load(handle)
    if not isinstance(records, list):
        raise ValidationError("tree file must hold a JSON array")
    return [tree_from_dict(r) for r in records]
