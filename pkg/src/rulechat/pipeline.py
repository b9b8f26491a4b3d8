"""Dialog orchestration: one decision step, full dialogs, evaluation.

A step classifies the current utterance, and on a More verdict
generates the next follow-up.  When the utterance carries a scenario,
the follow-up is first checked against it; an entailed or contradicted
question is answered silently and the step continues, so the user is
never asked something their own description already settles.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Protocol

from .classify import HeuristicConfig, heuristic_classify, lr_classify
from .core import (
    Answer,
    Decision,
    DecisionClass,
    DialogTree,
    HistoryTurn,
    Internal,
    NO,
    PipelineError,
    Utterance,
    ValidationError,
    YES,
    tree_traverse_history,
)
from .entailment import (
    CONTRADICTION,
    ENTAILMENT,
    NEUTRAL,
    EntailmentModel,
    entail,
    entail_heuristic,
)
from .followup import GeneratedQuestion, generate_followup
from .metrics import MetricReport, confusion_counts, corpus_bleu, micro_macro_accuracy
from .parsing import RuleLogic, parse_rule
from .text import normalize_question

Classifier = Callable[[Utterance, RuleLogic], Decision]
Generator = Callable[[Utterance, RuleLogic], GeneratedQuestion]
Entailer = Callable[[str, str], str]


@dataclass(frozen=True)
class TraceStep:
    """One stage of a step, for transcripts and debugging."""

    stage: str  # classify | generate | entail
    detail: str


@dataclass(frozen=True)
class AgentResponse:
    answer: Answer
    trace: tuple[TraceStep, ...] = ()


@dataclass(frozen=True)
class Components:
    """The three pluggable models a dialog runs on.

    ``entail`` may be None, in which case scenarios are ignored.
    """

    classify: Classifier
    generate: Generator
    entail: Entailer | None = None
    name: str = "custom"


def heuristic_components(config: HeuristicConfig | None = None) -> Components:
    cfg = config or HeuristicConfig()

    def classify(u: Utterance, logic: RuleLogic) -> Decision:
        return heuristic_classify(u, logic, cfg)

    return Components(
        classify=classify,
        generate=generate_followup,
        entail=entail_heuristic,
        name="heuristic",
    )


def model_components(surface_model, entailment_model: EntailmentModel | None = None) -> Components:
    """Trained surface classifier plus the rule-based generator."""

    def classify(u: Utterance, logic: RuleLogic) -> Decision:
        return lr_classify(surface_model, u)

    entailer = None
    if entailment_model is not None:
        def entailer(premise: str, hypothesis: str) -> str:
            return entail(entailment_model, premise, hypothesis).label

    return Components(
        classify=classify,
        generate=generate_followup,
        entail=entailer,
        name="trained",
    )


def gold_components(
    tree: DialogTree,
    provenance: dict[str, dict[str, str]] | None = None,
) -> Components:
    """Oracle components that read answers straight off a dialog tree.

    ``provenance`` maps scenario text to {normalized follow-up: Yes/No}
    and backs the oracle entailer; without it scenarios are Neutral.
    """

    def gold_answer(u: Utterance) -> str:
        return tree_traverse_history(tree, u.history).text

    def classify(u: Utterance, logic: RuleLogic) -> Decision:
        answer = gold_answer(u)
        if answer in (YES, NO):
            return Decision(DecisionClass(answer))
        return Decision(DecisionClass.MORE)

    def generate(u: Utterance, logic: RuleLogic) -> GeneratedQuestion:
        answer = gold_answer(u)
        if answer in (YES, NO):
            raise PipelineError("nothing to ask: rule outcome already determined")
        text = answer if answer.endswith("?") else answer + "?"
        return GeneratedQuestion(text)

    entailer = None
    if provenance is not None:
        def entailer(premise: str, hypothesis: str) -> str:
            known = provenance.get(premise, {})
            reply = known.get(normalize_question(hypothesis))
            if reply == YES:
                return ENTAILMENT
            if reply == NO:
                return CONTRADICTION
            return NEUTRAL

    return Components(
        classify=classify, generate=generate, entail=entailer, name="gold"
    )


# --- session state ------------------------------------------------------------


@dataclass(frozen=True)
class SessionState:
    """Everything a dialog needs to take its next step."""

    utterance: Utterance
    logic: RuleLogic
    step_count: int = 0
    max_steps: int = 0

    def __post_init__(self) -> None:
        if self.max_steps <= 0:
            raise ValidationError("max_steps must be positive")


def default_max_steps(logic: RuleLogic) -> int:
    return 2 * len(logic.conditions) + 2


def initial_state(
    utterance: Utterance,
    logic: RuleLogic | None = None,
    max_steps: int | None = None,
) -> SessionState:
    logic = logic if logic is not None else parse_rule(utterance.snippet)
    return SessionState(
        utterance=utterance,
        logic=logic,
        step_count=0,
        max_steps=max_steps if max_steps is not None else default_max_steps(logic),
    )


def with_history_turn(state: SessionState, followup: str, answer: str) -> SessionState:
    turn = HistoryTurn(followup, answer)
    utterance = replace(state.utterance, history=state.utterance.history + (turn,))
    return replace(state, utterance=utterance)


def step(state: SessionState, components: Components) -> tuple[AgentResponse, SessionState]:
    """Advance the dialog by one agent response.

    Scenario-answerable follow-ups are resolved internally, so a single
    call may consume several classification passes; the returned state
    accounts for all of them.  Raises when the step budget runs out or
    the generator repeats a question that was already answered.
    """
    trace: list[TraceStep] = []
    current = state
    while True:
        if current.step_count >= current.max_steps:
            raise PipelineError(
                f"dialog exceeded its step budget of {current.max_steps}"
            )
        current = replace(current, step_count=current.step_count + 1)

        decision = components.classify(current.utterance, current.logic)
        trace.append(TraceStep("classify", decision.label.value))
        if decision.label is not DecisionClass.MORE:
            answer = Answer.terminal(decision.label.value)
            return AgentResponse(answer, tuple(trace)), current

        generated = components.generate(current.utterance, current.logic)
        trace.append(TraceStep("generate", generated.text))
        key = normalize_question(generated.text)
        for turn in current.utterance.history:
            if normalize_question(turn.followup) == key:
                raise PipelineError(
                    f"follow-up repeats an answered question: {generated.text!r}"
                )

        if components.entail is not None and current.utterance.scenario.strip():
            verdict = components.entail(current.utterance.scenario, generated.text)
            trace.append(TraceStep("entail", verdict))
            if verdict == ENTAILMENT:
                current = with_history_turn(current, generated.text, YES)
                continue
            if verdict == CONTRADICTION:
                current = with_history_turn(current, generated.text, NO)
                continue

        return AgentResponse(Answer.follow_up(generated.text), tuple(trace)), current


# --- oracles (simulated users) -------------------------------------------------


class Oracle(Protocol):
    def reply(self, question: str) -> str | None:
        """Yes/No for the asked follow-up, or None to leave it unanswered."""


class RandomOracle:
    def __init__(self, seed: int = 0) -> None:
        self._rng = random.Random(seed)

    def reply(self, question: str) -> str | None:
        return YES if self._rng.random() < 0.5 else NO


class FixedOracle:
    """Replays a fixed reply list regardless of what is asked."""

    def __init__(self, replies: Iterable[str]) -> None:
        self._replies = list(replies)
        for r in self._replies:
            if r not in (YES, NO):
                raise ValidationError(f"oracle replies must be Yes or No, got {r!r}")
        self._cursor = 0

    def reply(self, question: str) -> str | None:
        if self._cursor >= len(self._replies):
            raise PipelineError("fixed oracle ran out of replies")
        reply = self._replies[self._cursor]
        self._cursor += 1
        return reply


class ScriptedOracle:
    """Walks a dialog tree alongside the agent, answering from a script.

    Refuses questions that stray from the tree path; an exhausted script
    leaves the question unanswered, ending the dialog at that point.
    """

    def __init__(self, tree: DialogTree, replies: Iterable[str]) -> None:
        self._node = tree.root
        self._replies = list(replies)
        self._cursor = 0

    def reply(self, question: str) -> str | None:
        if self._cursor >= len(self._replies):
            return None
        if not isinstance(self._node, Internal):
            raise PipelineError("oracle cannot answer: dialog walked past a leaf")
        expected = self._node.followup
        if normalize_question(question) != normalize_question(expected):
            raise PipelineError(
                f"oracle cannot answer {question!r}; the rule asks {expected!r} here"
            )
        reply = self._replies[self._cursor]
        self._cursor += 1
        self._node = self._node.yes_child if reply == YES else self._node.no_child
        return reply


# --- full dialogs ---------------------------------------------------------------


@dataclass(frozen=True)
class DialogTurn:
    response: AgentResponse
    user_reply: str | None
    elapsed_ms: float


@dataclass(frozen=True)
class Transcript:
    turns: tuple[DialogTurn, ...]
    final: Answer

    @property
    def questions_asked(self) -> int:
        return sum(1 for t in self.turns if not t.response.answer.is_terminal)


def run_dialog(
    utterance: Utterance,
    oracle: Oracle,
    components: Components | None = None,
    logic: RuleLogic | None = None,
    max_steps: int | None = None,
) -> Transcript:
    """Drive a dialog from an opening utterance to a final answer.

    The dialog also ends, with the pending question as its final
    answer, when the oracle declines to reply.
    """
    components = components or heuristic_components()
    state = initial_state(utterance, logic=logic, max_steps=max_steps)
    turns: list[DialogTurn] = []
    while True:
        started = time.perf_counter()
        response, state = step(state, components)
        elapsed = max((time.perf_counter() - started) * 1000.0, 0.0)
        if response.answer.is_terminal:
            turns.append(DialogTurn(response, None, elapsed))
            return Transcript(tuple(turns), response.answer)
        reply = oracle.reply(response.answer.text)
        turns.append(DialogTurn(response, reply, elapsed))
        if reply is None:
            return Transcript(tuple(turns), response.answer)
        state = with_history_turn(state, response.answer.text, reply)


# --- evaluation -----------------------------------------------------------------


def evaluate_pipeline(
    utterances: Iterable[Utterance],
    components: Components | None = None,
    max_steps: int | None = None,
) -> MetricReport:
    """Score single-step predictions against stored gold answers.

    Accuracy is over the four decision classes.  BLEU is computed on
    the subset where both the gold answer and the prediction are
    follow-up questions.  A step that fails outright falls back to the
    bare classifier verdict, which keeps the example scored instead of
    aborting the run.
    """
    components = components or heuristic_components()
    pool = list(utterances)
    if not pool:
        raise ValidationError("nothing to evaluate")

    logic_cache: dict[str, RuleLogic] = {}
    golds: list[str] = []
    predictions: list[str] = []
    bleu_pairs: list[tuple[str, str]] = []
    fallbacks = 0
    for u in pool:
        logic = logic_cache.get(u.snippet)
        if logic is None:
            logic = parse_rule(u.snippet)
            logic_cache[u.snippet] = logic
        state = initial_state(u, logic=logic, max_steps=max_steps)
        try:
            response, _ = step(state, components)
            predicted = response.answer
        except PipelineError:
            fallbacks += 1
            predicted = None
        gold_label = u.decision()
        golds.append(gold_label.value)
        if predicted is None:
            predictions.append(components.classify(u, logic).label.value)
            continue
        predictions.append(predicted.decision().value)
        if gold_label is DecisionClass.MORE and not predicted.is_terminal:
            bleu_pairs.append((predicted.text, u.answer))

    micro, macro = micro_macro_accuracy(predictions, golds)
    bleu_scores = {}
    if bleu_pairs:
        for order in (1, 2, 3, 4):
            bleu_scores[order] = corpus_bleu(bleu_pairs, order)
    return MetricReport(
        micro_acc=micro,
        macro_acc=macro,
        bleu=bleu_scores,
        counts=confusion_counts(predictions, golds),
        meta={
            "size": len(pool),
            "components": components.name,
            "followup_pairs": len(bleu_pairs),
            "fallbacks": fallbacks,
        },
    )
