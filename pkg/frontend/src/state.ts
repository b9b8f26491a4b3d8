/**
 * The view state machine.
 *
 * All transitions are pure functions from state to state; main.ts owns
 * the single mutable reference and repaints after every change. The
 * server transcript is the source of truth: stateFromTranscript()
 * rebuilds the exact same state a session reached incrementally, which
 * is what makes a page reload (and conflict recovery) safe.
 */

import type {
  AgentTurn,
  ConclusionResult,
  Mode,
  Reply,
  RuleInfo,
  SessionStatus,
  TerminalAnswer,
  Transcript,
} from "./api";

export type Phase =
  | "selecting_rule"
  | "entering_question"
  | "answering_followup"
  | "showing_result"
  | "reading_rule";

export interface ViewTurn {
  speaker: "agent" | "user";
  text: string;
}

export interface ConclusionView {
  answer: string;
  correct: boolean | null;
  elapsedMs: number;
}

export interface DialogViewState {
  phase: Phase;
  sessionId: string | null;
  mode: Mode;
  ruleId: string;
  ruleTitle: string;
  ruleText: string;
  question: string;
  scenario: string;
  transcript: ViewTurn[];
  currentFollowup: string | null;
  finalAnswer: string | null;
  conclusion: ConclusionView | null;
  status: SessionStatus | null;
  /** A request is in flight; inputs are disabled but nothing is lost. */
  busy: boolean;
  /** A failed request the user may retry; the rest of the state is untouched. */
  error: string | null;
}

export function initialState(): DialogViewState {
  return {
    phase: "selecting_rule",
    sessionId: null,
    mode: "agent",
    ruleId: "",
    ruleTitle: "",
    ruleText: "",
    question: "",
    scenario: "",
    transcript: [],
    currentFollowup: null,
    finalAnswer: null,
    conclusion: null,
    status: null,
    busy: false,
    error: null,
  };
}

export function ruleChosen(state: DialogViewState, rule: RuleInfo): DialogViewState {
  return {
    ...initialState(),
    phase: "entering_question",
    ruleId: rule.rule_id,
    ruleTitle: rule.title,
    ruleText: rule.rule_text,
    question: rule.question || state.question,
  };
}

export function questionEdited(state: DialogViewState, question: string): DialogViewState {
  return { ...state, question };
}

export function scenarioEdited(state: DialogViewState, scenario: string): DialogViewState {
  return { ...state, scenario };
}

export function markBusy(state: DialogViewState): DialogViewState {
  return { ...state, busy: true, error: null };
}

export function markError(state: DialogViewState, message: string): DialogViewState {
  return { ...state, busy: false, error: message };
}

export function sessionStarted(
  state: DialogViewState,
  sessionId: string,
  mode: Mode,
  turn: AgentTurn,
): DialogViewState {
  return applyAgentTurn({ ...state, sessionId, mode }, turn);
}

/**
 * Fold one service response into the view. Terminal kinds end the
 * dialog; "FollowUp" keeps it open; "RuleText" is the reading-arm
 * opening and carries the text to display rather than a turn.
 */
export function applyAgentTurn(state: DialogViewState, turn: AgentTurn): DialogViewState {
  const next: DialogViewState = {
    ...state,
    transcript: state.transcript.slice(),
    status: turn.status,
    busy: false,
    error: null,
  };
  if (turn.kind === "RuleText") {
    next.phase = "reading_rule";
    next.ruleText = turn.text;
    next.currentFollowup = null;
    return next;
  }
  next.transcript.push({ speaker: "agent", text: turn.text });
  if (turn.kind === "FollowUp") {
    next.phase = "answering_followup";
    next.currentFollowup = turn.text;
  } else {
    next.phase = "showing_result";
    next.currentFollowup = null;
    next.finalAnswer = turn.text;
  }
  return next;
}

/** The user's reply plus the agent turn it provoked, in one step. */
export function applyReply(
  state: DialogViewState,
  reply: Reply,
  turn: AgentTurn,
): DialogViewState {
  const withReply: DialogViewState = {
    ...state,
    transcript: [...state.transcript, { speaker: "user", text: reply }],
    currentFollowup: null,
  };
  return applyAgentTurn(withReply, turn);
}

export function applyConclusion(
  state: DialogViewState,
  result: ConclusionResult,
): DialogViewState {
  return {
    ...state,
    phase: "showing_result",
    conclusion: {
      answer: result.answer,
      correct: result.correct,
      elapsedMs: result.elapsed_ms,
    },
    status: result.status,
    currentFollowup: null,
    busy: false,
    error: null,
  };
}

/**
 * Rebuild the view from GET /transcript. Used on page load when a
 * session token is present, and to resynchronize after a conflict.
 */
export function stateFromTranscript(t: Transcript): DialogViewState {
  const transcript: ViewTurn[] = t.turns.map((turn) =>
    turn.speaker === "user"
      ? { speaker: "user", text: turn.reply ?? "" }
      : { speaker: "agent", text: turn.text ?? "" },
  );
  let phase: Phase;
  if (t.mode === "reading") {
    phase = t.status === "awaiting_user" ? "reading_rule" : "showing_result";
  } else if (t.status === "awaiting_user" && t.pending_followup !== null) {
    phase = "answering_followup";
  } else {
    phase = "showing_result";
  }
  return {
    phase,
    sessionId: t.session_id,
    mode: t.mode,
    ruleId: t.rule_id,
    ruleTitle: t.rule_title,
    ruleText: t.rule_text,
    question: t.question,
    scenario: t.scenario,
    transcript,
    currentFollowup: t.status === "awaiting_user" ? t.pending_followup : null,
    finalAnswer: t.final_answer,
    conclusion: t.conclusion
      ? {
          answer: t.conclusion.answer,
          correct: t.conclusion.correct,
          elapsedMs: t.conclusion.elapsed_ms,
        }
      : null,
    status: t.status,
    busy: false,
    error: null,
  };
}

/** Which conclusions the result screen should offer. */
export const CONCLUSION_CHOICES: readonly TerminalAnswer[] = ["Yes", "No"];

/**
 * Structural checks the view must satisfy in every reachable state.
 * Returns human-readable violations; empty means healthy.
 */
export function viewInvariantViolations(state: DialogViewState): string[] {
  const problems: string[] = [];
  const pending = state.currentFollowup !== null;
  if (state.phase === "answering_followup" && !pending) {
    problems.push("answering_followup phase without a pending follow-up");
  }
  if (pending && state.phase !== "answering_followup") {
    problems.push(`pending follow-up while in phase ${state.phase}`);
  }
  if (state.phase === "reading_rule" && state.mode !== "reading") {
    problems.push("reading_rule phase outside the reading arm");
  }
  if (pending && state.finalAnswer !== null) {
    problems.push("pending follow-up after a final answer");
  }
  if (state.sessionId === null && pending) {
    problems.push("pending follow-up without a session");
  }
  return problems;
}
