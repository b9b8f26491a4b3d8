import { describe, expect, it } from "vitest";

import type {
  AgentTurn,
  ConclusionResult,
  Reply,
  StartSessionRequest,
  StartSessionResponse,
  TerminalAnswer,
} from "../src/api";
import { ScriptedParticipant, expectedAnswer } from "../src/driver";
import type { DialogService, StudyItem, StudyRecord } from "../src/study";
import { armMeans, runStudy } from "../src/study";

/**
 * In-memory service good enough for runner mechanics: every rule is a
 * conjunction whose follow-ups come from `questions`, a No ends the
 * dialog with No, and exhausting the questions with Yes answers ends
 * it with Yes.
 */
class FakeService implements DialogService {
  readonly log: string[] = [];
  private sessions = new Map<
    string,
    { asked: number; gold: string | null; done: boolean }
  >();
  private nextId = 0;

  constructor(private readonly questions: Record<string, string[]>) {}

  startSession(body: StartSessionRequest): Promise<StartSessionResponse> {
    const id = `fake-${this.nextId++}`;
    this.log.push(`start:${body.item_id}:${body.mode}`);
    this.sessions.set(id, { asked: 0, gold: body.gold_answer ?? null, done: false });
    if (body.mode === "reading") {
      return Promise.resolve({
        session_id: id,
        response: { kind: "RuleText", text: `rules for ${body.rule_id}`, status: "awaiting_user" },
      });
    }
    const question = this.questions[body.rule_id][0];
    const session = this.sessions.get(id)!;
    session.asked = 1;
    return Promise.resolve({
      session_id: id,
      response: { kind: "FollowUp", text: question, trace: [], status: "awaiting_user" },
    });
  }

  sendReply(sessionId: string, reply: Reply): Promise<AgentTurn> {
    const session = this.sessions.get(sessionId)!;
    this.log.push(`reply:${reply}`);
    const all = Object.values(this.questions).find(
      (qs) => session.asked <= qs.length,
    )!;
    if (reply === "No") {
      session.done = true;
      return Promise.resolve({ kind: "No", text: "No", trace: [], status: "finished" });
    }
    if (session.asked >= all.length) {
      session.done = true;
      return Promise.resolve({ kind: "Yes", text: "Yes", trace: [], status: "finished" });
    }
    const question = all[session.asked];
    session.asked += 1;
    return Promise.resolve({
      kind: "FollowUp",
      text: question,
      trace: [],
      status: "awaiting_user",
    });
  }

  conclude(sessionId: string, answer: TerminalAnswer): Promise<ConclusionResult> {
    const session = this.sessions.get(sessionId)!;
    this.log.push(`conclude:${answer}`);
    return Promise.resolve({
      answer,
      correct: session.gold === null ? null : answer === session.gold,
      elapsed_ms: 1234,
      status: "finished",
    });
  }
}

function items(): StudyItem[] {
  return [
    { itemId: "i1", ruleId: "grant", question: "Do I qualify?", scenario: "", gold: "Yes" },
    { itemId: "i2", ruleId: "grant", question: "Do I qualify?", scenario: "", gold: "No" },
    { itemId: "i3", ruleId: "grant", question: "Do I qualify?", scenario: "", gold: "Yes" },
    { itemId: "i4", ruleId: "grant", question: "Do I qualify?", scenario: "", gold: "Yes" },
  ];
}

const TWO_QUESTIONS = { grant: ["Do you own it?", "Do you live there?"] };

function tickingClock(step = 3): () => number {
  let now = 0;
  return () => (now += step);
}

describe("runStudy", () => {
  it("tags each record with its assigned arm, alternating", async () => {
    const service = new FakeService(TWO_QUESTIONS);
    const participant = new ScriptedParticipant({ i1: "Yes", i2: "No", i3: "Yes", i4: "Yes" });
    const records = await runStudy(
      service,
      items(),
      (_item, index) => (index % 2 === 0 ? "agent" : "reading"),
      participant,
      { clock: tickingClock() },
    );
    expect(records.map((r) => r.arm)).toEqual(["agent", "reading", "agent", "reading"]);
    expect(records.map((r) => r.itemId)).toEqual(["i1", "i2", "i3", "i4"]);
    expect(records.every((r) => r.elapsedMs > 0)).toBe(true);
    expect(records.every((r) => !r.aborted)).toBe(true);
  });

  it("walks an agent dialog to its end and reports the agent's answer", async () => {
    const service = new FakeService(TWO_QUESTIONS);
    const participant = new ScriptedParticipant({ i1: "Yes" });
    const [record] = await runStudy(
      service,
      items().slice(0, 1),
      () => "agent",
      participant,
      { clock: tickingClock() },
    );
    expect(record.questionsAnswered).toBe(2);
    expect(record.agentAnswer).toBe("Yes");
    expect(record.userAnswer).toBe("Yes");
    expect(record.correct).toBe(true);
    expect(service.log).toEqual([
      "start:i1:agent",
      "reply:Yes",
      "reply:Yes",
      "conclude:Yes",
    ]);
  });

  it("grades against the item gold, not the participant's hopes", async () => {
    const service = new FakeService(TWO_QUESTIONS);
    // Dialog will conclude No on the first reply, but the gold is Yes.
    const participant = new ScriptedParticipant({ i1: "No" });
    const [record] = await runStudy(
      service,
      [{ ...items()[0], gold: "Yes" }],
      () => "agent",
      participant,
      { clock: tickingClock() },
    );
    expect(record.agentAnswer).toBe("No");
    expect(record.correct).toBe(false);
  });

  it("records an abandoned item as aborted and moves on", async () => {
    const service = new FakeService(TWO_QUESTIONS);
    const scripted = new ScriptedParticipant({ i1: "Yes", i2: "Yes", i3: "Yes", i4: "Yes" });
    const quitter = {
      answerFollowup: scripted.answerFollowup.bind(scripted),
      conclude: (item: StudyItem, context: Parameters<typeof scripted.conclude>[1]) =>
        item.itemId === "i2" ? null : scripted.conclude(item, context),
    };
    const records = await runStudy(service, items(), () => "agent", quitter, {
      clock: tickingClock(),
    });
    expect(records.length).toBe(4);
    expect(records[1].aborted).toBe(true);
    expect(records[1].userAnswer).toBeNull();
    expect(records[1].note).toContain("abandoned");
    expect(records.filter((r) => !r.aborted).length).toBe(3);
  });

  it("aborts an item whose reply script runs dry without sinking the study", async () => {
    const service = new FakeService(TWO_QUESTIONS);
    const participant = new ScriptedParticipant({
      i1: ["Yes"], // one reply, two questions
      i2: "Yes",
    });
    const records = await runStudy(service, items().slice(0, 2), () => "agent", participant, {
      clock: tickingClock(),
    });
    expect(records[0].aborted).toBe(true);
    expect(records[0].note).toContain("ran out");
    expect(records[1].aborted).toBe(false);
  });

  it("refuses an empty item list", async () => {
    const service = new FakeService(TWO_QUESTIONS);
    const participant = new ScriptedParticipant({});
    await expect(
      runStudy(service, [], () => "agent", participant),
    ).rejects.toThrow("at least one item");
  });
});

describe("armMeans", () => {
  function record(over: Partial<StudyRecord>): StudyRecord {
    return {
      arm: "agent",
      itemId: "x",
      elapsedMs: 100,
      userAnswer: "Yes",
      correct: true,
      aborted: false,
      note: "",
      agentAnswer: "Yes",
      questionsAnswered: 1,
      ...over,
    };
  }

  it("takes the arithmetic mean per arm", () => {
    const stats = armMeans([
      record({ elapsedMs: 100 }),
      record({ elapsedMs: 300 }),
      record({ arm: "reading", elapsedMs: 1000 }),
      record({ arm: "reading", elapsedMs: 2000 }),
    ]);
    expect(stats.agent.meanElapsedMs).toBe(200);
    expect(stats.reading.meanElapsedMs).toBe(1500);
    expect(stats.agent.records).toBe(2);
    expect(stats.reading.records).toBe(2);
  });

  it("excludes aborted records from every mean", () => {
    const stats = armMeans([
      record({ elapsedMs: 100, correct: true }),
      record({ elapsedMs: 9999, aborted: true, userAnswer: null, correct: null }),
      record({ elapsedMs: 300, correct: false }),
    ]);
    expect(stats.agent.records).toBe(3);
    expect(stats.agent.concluded).toBe(2);
    expect(stats.agent.meanElapsedMs).toBe(200);
    expect(stats.agent.accuracy).toBe(0.5);
  });

  it("reports null, not zero, for an empty arm", () => {
    const stats = armMeans([record({})]);
    expect(stats.reading.meanElapsedMs).toBeNull();
    expect(stats.reading.accuracy).toBeNull();
  });

  it("leaves accuracy out when nothing was graded", () => {
    const stats = armMeans([record({ correct: null })]);
    expect(stats.agent.concluded).toBe(1);
    expect(stats.agent.accuracy).toBeNull();
  });
});

describe("expectedAnswer", () => {
  it("matches uniform replies on plain rules", () => {
    const plain = { outcome_negated: false };
    expect(expectedAnswer(plain, "Yes")).toBe("Yes");
    expect(expectedAnswer(plain, "No")).toBe("No");
  });

  it("flips on rules that state the negative outcome", () => {
    const negated = { outcome_negated: true };
    expect(expectedAnswer(negated, "Yes")).toBe("No");
    expect(expectedAnswer(negated, "No")).toBe("Yes");
  });
});
