"""Three-valued rule evaluation and history-to-condition alignment.

Condition truth values are True, False, or None for "not yet known".
Alignment decides which conditions the dialog history has already
answered; evaluation then tells whether the rule outcome is determined
and, when it is not, which condition to ask about next.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Optional, Sequence

from .core import HistoryTurn, YES
from .parsing import Logic, RuleLogic
from .text import jaccard, normalize_question, tokenize

TruthValue = Optional[bool]


def eval_logic(structure: Logic | None, values: Sequence[TruthValue]) -> TruthValue:
    """Kleene evaluation: an AND with a False child is False even when
    other children are unknown, dually for OR.  No structure means no
    conditions, which evaluates as vacuously True."""
    if structure is None:
        return True
    if structure.op == "cond":
        return values[structure.index]
    child_values = [eval_logic(c, values) for c in structure.children]
    if structure.op == "and":
        if any(v is False for v in child_values):
            return False
        if any(v is None for v in child_values):
            return None
        return True
    if any(v is True for v in child_values):
        return True
    if any(v is None for v in child_values):
        return None
    return False


def condition_values(
    logic: RuleLogic, literal: Mapping[int, bool]
) -> list[TruthValue]:
    """Turn literal Yes/No answers into condition truth values.

    A condition carrying the negated flag ("unless" clauses) counts as
    satisfied exactly when its literal answer is No.
    """
    values: list[TruthValue] = []
    for i, cond in enumerate(logic.conditions):
        if i in literal:
            values.append(literal[i] != cond.negated)
        else:
            values.append(None)
    return values


def _as_turns(history: Iterable) -> list[HistoryTurn]:
    turns = []
    for item in history:
        if isinstance(item, HistoryTurn):
            turns.append(item)
        else:
            followup, answer = item
            turns.append(HistoryTurn(followup, answer))
    return turns


def align_history(
    logic: RuleLogic, history: Iterable, min_jaccard: float = 0.3
) -> dict[int, bool]:
    """Match history turns to conditions by token overlap.

    Greedy one-to-one: each turn in order claims its best-scoring
    unclaimed condition, provided the Jaccard overlap reaches the floor;
    ties break toward rule-text order.  Turns that match nothing are
    ignored.  An aligned value is copied to any other condition with
    identical normalized text, so restated conditions are not re-asked.
    Values returned are literal (negation flags not applied).
    """
    cond_tokens = [set(tokenize(c.text)) for c in logic.conditions]
    assigned: dict[int, bool] = {}
    for turn in _as_turns(history):
        turn_tokens = set(tokenize(turn.followup))
        best_index = None
        best_score = 0.0
        for i, tokens in enumerate(cond_tokens):
            if i in assigned:
                continue
            score = jaccard(turn_tokens, tokens)
            if score > best_score:
                best_index, best_score = i, score
        if best_index is not None and best_score >= min_jaccard:
            assigned[best_index] = turn.answer == YES
    for i in list(assigned):
        norm = normalize_question(logic.conditions[i].text)
        for j, cond in enumerate(logic.conditions):
            if j not in assigned and normalize_question(cond.text) == norm:
                assigned[j] = assigned[i]
    return assigned


def next_unresolved(logic: RuleLogic, values: Sequence[TruthValue]) -> int | None:
    """Index of the next condition worth asking about, or None when the
    outcome is already determined.

    Walks the structure in rule order, descending only into subtrees
    whose own value is still unknown, and returns the first unknown
    leaf found there.  Subtrees that are already decided cannot change
    the outcome, so their unknown leaves are never proposed.
    """
    if eval_logic(logic.structure, values) is not None:
        return None

    def walk(node: Logic) -> int | None:
        if node.op == "cond":
            return node.index if values[node.index] is None else None
        for child in node.children:
            if eval_logic(child, values) is None:
                found = walk(child)
                if found is not None:
                    return found
        return None

    assert logic.structure is not None
    return walk(logic.structure)


def evaluate_rule(logic: RuleLogic, history: Iterable) -> TruthValue:
    """Alignment plus evaluation in one step."""
    literal = align_history(logic, history)
    return eval_logic(logic.structure, condition_values(logic, literal))
