/**
 * Browser entry. Owns the one mutable state reference, the phase
 * timer, and the session token in sessionStorage (the only thing kept
 * client-side; everything else is refetchable from the service).
 */

import { ApiError, RuleChatClient, isConflict } from "./api";
import type { Mode, Reply, RuleInfo, TerminalAnswer } from "./api";
import type { Handlers } from "./render";
import { render } from "./render";
import type { DialogViewState } from "./state";
import {
  applyConclusion,
  applyReply,
  initialState,
  markBusy,
  markError,
  questionEdited,
  ruleChosen,
  scenarioEdited,
  sessionStarted,
  stateFromTranscript,
  viewInvariantViolations,
} from "./state";
import { PhaseTimer } from "./timer";

const SESSION_KEY = "rulechat.session";

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app mount point");
}

const client = new RuleChatClient("");
const timer = new PhaseTimer();

let current: DialogViewState = initialState();
let rules: RuleInfo[] = [];
let pendingRetry: (() => Promise<void>) | null = null;

function paint(): void {
  for (const problem of viewInvariantViolations(current)) {
    console.warn("view invariant violated:", problem);
  }
  timer.enter(current.phase);
  root!.replaceChildren(render(current, rules, handlers, timer));
}

function update(next: DialogViewState): void {
  current = next;
  paint();
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    return err.detail;
  }
  return "The service could not be reached.";
}

/**
 * Run one service call with the busy flag up. On a conflict the server
 * has moved past us, so the view is rebuilt from the transcript; on
 * anything else the state is left as it was, plus a retry affordance
 * for transport failures.
 */
async function guarded(action: () => Promise<void>): Promise<void> {
  const before = current;
  update(markBusy(current));
  try {
    await action();
    pendingRetry = null;
  } catch (err) {
    if (isConflict(err) && before.sessionId !== null) {
      try {
        update(stateFromTranscript(await client.transcript(before.sessionId)));
        return;
      } catch {
        // fall through to the plain error path
      }
    }
    if (!(err instanceof ApiError)) {
      pendingRetry = action;
    }
    update(markError(before, describeError(err)));
  }
}

const handlers: Handlers = {
  chooseRule(rule: RuleInfo): void {
    update(ruleChosen(current, rule));
  },

  // Text edits update state without a repaint; the input already shows
  // the text, and replacing it mid-keystroke would drop focus.
  updateQuestion(text: string): void {
    current = questionEdited(current, text);
  },
  updateScenario(text: string): void {
    current = scenarioEdited(current, text);
  },

  startDialog(mode: Mode): void {
    if (current.phase !== "entering_question" || current.busy) {
      return;
    }
    if (current.question.trim() === "") {
      update(markError(current, "Type a question first."));
      return;
    }
    void guarded(async () => {
      const started = await client.startSession({
        rule_id: current.ruleId,
        question: current.question,
        scenario: current.scenario,
        mode,
      });
      sessionStorage.setItem(SESSION_KEY, started.session_id);
      update(sessionStarted(current, started.session_id, mode, started.response));
    });
  },

  sendReply(reply: Reply): void {
    const sessionId = current.sessionId;
    if (current.phase !== "answering_followup" || current.busy || sessionId === null) {
      return;
    }
    void guarded(async () => {
      const turn = await client.sendReply(sessionId, reply);
      update(applyReply(current, reply, turn));
    });
  },

  submitConclusion(answer: TerminalAnswer): void {
    const sessionId = current.sessionId;
    const canConclude =
      (current.phase === "showing_result" || current.phase === "reading_rule") &&
      current.conclusion === null;
    if (!canConclude || current.busy || sessionId === null) {
      return;
    }
    void guarded(async () => {
      const result = await client.conclude(sessionId, answer);
      update(applyConclusion(current, result));
    });
  },

  retry(): void {
    const action = pendingRetry;
    pendingRetry = null;
    if (action !== null) {
      void guarded(action);
    } else {
      update({ ...current, error: null });
    }
  },

  reset(): void {
    sessionStorage.removeItem(SESSION_KEY);
    pendingRetry = null;
    update(initialState());
  },
};

async function boot(): Promise<void> {
  const saved = sessionStorage.getItem(SESSION_KEY);
  if (saved !== null) {
    try {
      current = stateFromTranscript(await client.transcript(saved));
    } catch {
      sessionStorage.removeItem(SESSION_KEY);
    }
  }
  try {
    rules = await client.rules();
  } catch (err) {
    current = markError(current, describeError(err));
  }
  paint();
}

void boot();
