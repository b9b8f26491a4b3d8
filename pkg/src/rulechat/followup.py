"""Follow-up question generation and span mapping.

The generator turns the next unresolved condition into a polar
question with auxiliary-fronting templates.  Span mapping aligns a
question back onto the rule text through a token-level longest common
subsequence, widening the matched run to the question's length.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from typing import Iterable

from .core import PipelineError, Utterance, ValidationError
from .kernels import lcs_token_pairs
from .logic import align_history, condition_values, next_unresolved
from .parsing import Condition, RuleLogic, Span
from .text import split_sentences, straighten, tokenize, tokenize_with_spans


@dataclass(frozen=True)
class GeneratedQuestion:
    text: str
    source_condition: int | None = None
    source_span: Span | None = None

    def __post_init__(self) -> None:
        if not self.text.strip() or not self.text.rstrip().endswith("?"):
            raise ValidationError("generated questions must end with '?'")


@dataclass(frozen=True)
class SpanMapping:
    span: Span
    lcs_length: int
    threshold: int


def next_unresolved_condition(logic: RuleLogic, history: Iterable) -> int | None:
    """First condition, in rule-text order, that is unanswered by the
    history and can still change the outcome; None once determined."""
    literal = align_history(logic, history)
    return next_unresolved(logic, condition_values(logic, literal))


_MODAL_RE = re.compile(
    r"^you (must|can|could|should|shall|may|might|will|would)\s+(.+)$"
)
_YOUR_NP_RE = re.compile(r"^your\s+(.+?)\s+(is|are|was|were|has|have)\s+(.+)$")
_BARE_VERBS = frozenset(
    (
        "own live work have give get receive hold earn pay meet owe possess "
        "rent claim apply care suffer qualify intend expect provide run keep "
        "look stay reside study attend need want use belong"
    ).split()
)


def _capitalize(text: str) -> str:
    return text[:1].upper() + text[1:] if text else text


def condition_to_question(c: Condition) -> GeneratedQuestion:
    """Second-person declarative to polar question by template.

    The negation flag never changes the wording: an "unless" condition
    is still asked positively and inverted at evaluation time.  Text
    that is already a question passes through unchanged.
    """
    raw = c.text.strip()
    if raw.endswith("?"):
        return GeneratedQuestion(raw)
    body = straighten(raw).rstrip(" .,;:")
    lowered = body.lower()

    def build(question: str) -> GeneratedQuestion:
        return GeneratedQuestion(_capitalize(question) + "?")

    for prefix, fronted in (
        ("you're ", "Are you "),
        ("you are ", "Are you "),
        ("you've been ", "Have you been "),
        ("you have been ", "Have you been "),
        ("you've ", "Have you "),
        ("you'll ", "Will you "),
    ):
        if lowered.startswith(prefix):
            return build(fronted + body[len(prefix) :])
    m = _MODAL_RE.match(lowered)
    if m:
        modal = m.group(1)
        rest = body[len(f"you {modal} ") :]
        return build(f"{_capitalize(modal)} you {rest}")
    if lowered.startswith("you have "):
        return build("Do you have " + body[len("you have ") :])
    m = _YOUR_NP_RE.match(lowered)
    if m:
        noun = body[len("your ") : len("your ") + len(m.group(1))]
        rest = body[m.end(2) + 1 :]
        verb = m.group(2)
        if verb in ("is", "are", "was", "were"):
            return build(f"{_capitalize(verb)} your {noun} {rest}")
        aux = "Does" if verb == "has" else "Do"
        return build(f"{aux} your {noun} have {rest}")
    if lowered.startswith("you "):
        return build("Do you " + body[len("you ") :])
    if lowered.startswith("have been "):
        return build("Have you been " + body[len("have been ") :])
    if lowered.startswith("be "):
        return build("Are you " + body[len("be ") :])
    first = lowered.split(" ", 1)[0]
    if first in _BARE_VERBS:
        return build("Do you " + body)
    return GeneratedQuestion(f"Is the following true: {body}?")


def generate_followup(u: Utterance, logic: RuleLogic) -> GeneratedQuestion:
    """Question for the next unresolved condition, carrying its span."""
    index = next_unresolved_condition(logic, u.history)
    if index is None:
        raise PipelineError("nothing to ask: rule outcome already determined")
    cond = logic.conditions[index]
    question = condition_to_question(cond)
    return GeneratedQuestion(
        text=question.text, source_condition=index, source_span=cond.char_span
    )


def baseline_sentence(rule_text: str, strategy: str = "last", seed: int = 0) -> str:
    """Sentence-return baseline: first, last, or a seeded random sentence."""
    sentences = [s for s, _, _ in split_sentences(rule_text)]
    if not sentences:
        raise ValidationError("empty rule text")
    if strategy == "first":
        return sentences[0]
    if strategy == "last":
        return sentences[-1]
    if strategy == "random":
        return random.Random(seed).choice(sentences)
    raise ValidationError(f"unknown strategy {strategy!r}")


def map_question_to_span(
    rule_text: str, followup: str, threshold: int = 3
) -> SpanMapping | None:
    """Locate a follow-up question inside the rule text.

    Computes the token LCS between question and rule text; when it is
    longer than the threshold, the matched token run is widened
    symmetrically (left-biased, clipped at the text bounds) until it
    spans as many tokens as the question, and the covered character
    span is returned.
    """
    if threshold < 1:
        raise ValidationError("threshold must be at least 1")
    rule_tokens = tokenize_with_spans(rule_text)
    followup_tokens = tokenize(followup)
    if not rule_tokens or not followup_tokens:
        return None
    pairs = lcs_token_pairs(followup_tokens, [t for t, _, _ in rule_tokens])
    if len(pairs) <= threshold:
        return None
    matched = [j for _, j in pairs]
    lo, hi = min(matched), max(matched)
    extra = len(followup_tokens) - (hi - lo + 1)
    if extra > 0:
        lo -= (extra + 1) // 2
        hi += extra // 2
        if lo < 0:
            hi += -lo
            lo = 0
        if hi > len(rule_tokens) - 1:
            lo -= hi - (len(rule_tokens) - 1)
            hi = len(rule_tokens) - 1
            lo = max(lo, 0)
    span = (rule_tokens[lo][1], rule_tokens[hi][2])
    return SpanMapping(span=span, lcs_length=len(pairs), threshold=threshold)
