/**
 * Timed study runner.
 *
 * Items are presented one at a time. Each item becomes one service
 * session in its assigned arm, so the server's event log doubles as
 * the uploaded study record; GET /study/export aggregates the same
 * sessions this runner created. Client-side timing runs from the
 * moment the opening response lands (the first render a participant
 * would see) to the conclusion submission.
 */

import type {
  AgentTurn,
  ConclusionResult,
  Mode,
  Reply,
  StartSessionRequest,
  StartSessionResponse,
  TerminalAnswer,
} from "./api";

export interface StudyItem {
  itemId: string;
  ruleId: string;
  question: string;
  scenario: string;
  /** The correct conclusion, used by the service to grade sessions. */
  gold: TerminalAnswer;
}

export interface ConcludeContext {
  arm: Mode;
  /** The rule text shown in the reading arm; empty in the agent arm. */
  ruleText: string;
  /** The dialog's final answer in the agent arm; null in the reading arm. */
  finalAnswer: string | null;
}

export interface Participant {
  answerFollowup(item: StudyItem, question: string): Reply | Promise<Reply>;
  /** Return null to abandon the item. */
  conclude(
    item: StudyItem,
    context: ConcludeContext,
  ): TerminalAnswer | null | Promise<TerminalAnswer | null>;
}

export interface StudyRecord {
  arm: Mode;
  itemId: string;
  elapsedMs: number;
  userAnswer: TerminalAnswer | null;
  correct: boolean | null;
  aborted: boolean;
  /** Why the item aborted; empty for completed items. */
  note: string;
  /** The dialog's terminal answer (agent arm only). */
  agentAnswer: string | null;
  questionsAnswered: number;
}

export type ArmAssignment = (item: StudyItem, index: number) => Mode;

/** The slice of the client the runner needs; structural, so tests can fake it. */
export interface DialogService {
  startSession(body: StartSessionRequest): Promise<StartSessionResponse>;
  sendReply(sessionId: string, reply: Reply): Promise<AgentTurn>;
  conclude(sessionId: string, answer: TerminalAnswer): Promise<ConclusionResult>;
}

export interface StudyOptions {
  clock?: () => number;
  /** Hard cap on follow-ups per item, against runaway dialogs. */
  maxFollowups?: number;
}

export async function runStudy(
  service: DialogService,
  items: StudyItem[],
  assignArm: ArmAssignment,
  participant: Participant,
  options: StudyOptions = {},
): Promise<StudyRecord[]> {
  if (items.length === 0) {
    throw new Error("a study needs at least one item");
  }
  const clock = options.clock ?? (() => performance.now());
  const maxFollowups = options.maxFollowups ?? 16;
  const records: StudyRecord[] = [];

  for (let index = 0; index < items.length; index++) {
    const item = items[index];
    const arm = assignArm(item, index);
    records.push(
      await runItem(service, item, arm, participant, clock, maxFollowups),
    );
  }
  return records;
}

async function runItem(
  service: DialogService,
  item: StudyItem,
  arm: Mode,
  participant: Participant,
  clock: () => number,
  maxFollowups: number,
): Promise<StudyRecord> {
  const record: StudyRecord = {
    arm,
    itemId: item.itemId,
    elapsedMs: 0,
    userAnswer: null,
    correct: null,
    aborted: false,
    note: "",
    agentAnswer: null,
    questionsAnswered: 0,
  };

  let startedAt = clock();
  try {
    const started = await service.startSession({
      rule_id: item.ruleId,
      question: item.question,
      scenario: item.scenario,
      mode: arm,
      gold_answer: item.gold,
      item_id: item.itemId,
    });
    startedAt = clock();

    let turn = started.response;
    let ruleText = "";
    if (turn.kind === "RuleText") {
      ruleText = turn.text;
    }
    while (turn.kind === "FollowUp") {
      if (record.questionsAnswered >= maxFollowups) {
        throw new Error(`more than ${maxFollowups} follow-ups`);
      }
      const reply = await participant.answerFollowup(item, turn.text);
      turn = await service.sendReply(started.session_id, reply);
      record.questionsAnswered += 1;
    }
    if (arm === "agent") {
      record.agentAnswer = turn.text;
    }

    const answer = await participant.conclude(item, {
      arm,
      ruleText,
      finalAnswer: record.agentAnswer,
    });
    if (answer === null) {
      throw new Error("participant abandoned the item");
    }
    const result = await service.conclude(started.session_id, answer);
    record.userAnswer = answer;
    record.correct = result.correct;
  } catch (err) {
    record.aborted = true;
    record.note = err instanceof Error ? err.message : String(err);
  }
  record.elapsedMs = Math.max(clock() - startedAt, 1);
  return record;
}

export interface ArmStats {
  records: number;
  concluded: number;
  meanElapsedMs: number | null;
  accuracy: number | null;
}

/**
 * Per-arm arithmetic means over completed records. Aborted items count
 * toward nothing except the records total.
 */
export function armMeans(records: StudyRecord[]): Record<Mode, ArmStats> {
  const out: Record<Mode, ArmStats> = {
    agent: { records: 0, concluded: 0, meanElapsedMs: null, accuracy: null },
    reading: { records: 0, concluded: 0, meanElapsedMs: null, accuracy: null },
  };
  const elapsed: Record<Mode, number[]> = { agent: [], reading: [] };
  const graded: Record<Mode, boolean[]> = { agent: [], reading: [] };
  for (const record of records) {
    const stats = out[record.arm];
    stats.records += 1;
    if (record.aborted) {
      continue;
    }
    stats.concluded += 1;
    elapsed[record.arm].push(record.elapsedMs);
    if (record.correct !== null) {
      graded[record.arm].push(record.correct);
    }
  }
  for (const arm of ["agent", "reading"] as const) {
    if (elapsed[arm].length > 0) {
      out[arm].meanElapsedMs =
        elapsed[arm].reduce((a, b) => a + b, 0) / elapsed[arm].length;
    }
    if (graded[arm].length > 0) {
      out[arm].accuracy =
        graded[arm].filter(Boolean).length / graded[arm].length;
    }
  }
  return out;
}
