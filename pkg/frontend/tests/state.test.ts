import { describe, expect, it } from "vitest";

import type { AgentTurn, RuleInfo, Transcript } from "../src/api";
import {
  applyConclusion,
  applyReply,
  initialState,
  markBusy,
  markError,
  ruleChosen,
  sessionStarted,
  stateFromTranscript,
  viewInvariantViolations,
} from "../src/state";

const RULE: RuleInfo = {
  rule_id: "home-upgrade-grant",
  title: "Home upgrade grant",
  rule_text:
    "You can get the grant if:\n* you own the property\n" +
    "* you live in the property as your main home\n" +
    "* you have a household income under 31,000 a year",
  source_url: "",
  question: "Do I qualify for the home upgrade grant?",
  parsed: { conditions: 3, operator: "and", outcome_negated: false, ambiguous: false },
};

function followup(text: string): AgentTurn {
  return { kind: "FollowUp", text, trace: [["classify", "More"]], status: "awaiting_user" };
}

function terminal(text: "Yes" | "No" | "Irrelevant"): AgentTurn {
  return { kind: text, text, trace: [["classify", text]], status: "finished" };
}

describe("phase transitions", () => {
  it("starts at rule selection with nothing pending", () => {
    const state = initialState();
    expect(state.phase).toBe("selecting_rule");
    expect(state.currentFollowup).toBeNull();
    expect(viewInvariantViolations(state)).toEqual([]);
  });

  it("choosing a rule prefills its suggested question", () => {
    const state = ruleChosen(initialState(), RULE);
    expect(state.phase).toBe("entering_question");
    expect(state.question).toBe(RULE.question);
    expect(state.ruleTitle).toBe("Home upgrade grant");
    expect(state.ruleText).toBe(RULE.rule_text);
  });

  it("an opening follow-up moves into answering", () => {
    const asked = sessionStarted(
      ruleChosen(initialState(), RULE),
      "s1",
      "agent",
      followup("Do you own the property?"),
    );
    expect(asked.phase).toBe("answering_followup");
    expect(asked.sessionId).toBe("s1");
    expect(asked.currentFollowup).toBe("Do you own the property?");
    expect(asked.transcript).toEqual([
      { speaker: "agent", text: "Do you own the property?" },
    ]);
    expect(viewInvariantViolations(asked)).toEqual([]);
  });

  it("a reply and the next follow-up both land in the transcript", () => {
    let state = sessionStarted(
      ruleChosen(initialState(), RULE),
      "s1",
      "agent",
      followup("Do you own the property?"),
    );
    state = applyReply(state, "Yes", followup("Do you live in the property as your main home?"));
    expect(state.transcript.map((t) => t.speaker)).toEqual(["agent", "user", "agent"]);
    expect(state.currentFollowup).toBe("Do you live in the property as your main home?");
    expect(state.finalAnswer).toBeNull();
  });

  it("a terminal turn ends the dialog with a final answer", () => {
    let state = sessionStarted(
      ruleChosen(initialState(), RULE),
      "s1",
      "agent",
      followup("Do you own the property?"),
    );
    state = applyReply(state, "No", terminal("No"));
    expect(state.phase).toBe("showing_result");
    expect(state.finalAnswer).toBe("No");
    expect(state.currentFollowup).toBeNull();
    expect(state.status).toBe("finished");
    expect(viewInvariantViolations(state)).toEqual([]);
  });

  it("a reading-arm opening shows the rule text without any turn", () => {
    const opened = sessionStarted(
      ruleChosen(initialState(), RULE),
      "s2",
      "reading",
      { kind: "RuleText", text: RULE.rule_text, status: "awaiting_user" },
    );
    expect(opened.phase).toBe("reading_rule");
    expect(opened.ruleText).toBe(RULE.rule_text);
    expect(opened.transcript).toEqual([]);
    expect(opened.currentFollowup).toBeNull();
    expect(viewInvariantViolations(opened)).toEqual([]);
  });

  it("a conclusion is recorded without the server timestamp", () => {
    let state = sessionStarted(
      ruleChosen(initialState(), RULE),
      "s3",
      "agent",
      terminal("Yes"),
    );
    state = applyConclusion(state, {
      answer: "Yes",
      correct: true,
      elapsed_ms: 4200.5,
      status: "finished",
    });
    expect(state.conclusion).toEqual({ answer: "Yes", correct: true, elapsedMs: 4200.5 });
    expect(state.phase).toBe("showing_result");
  });
});

describe("busy and error flags", () => {
  it("markBusy only raises the flag", () => {
    const before = sessionStarted(
      ruleChosen(initialState(), RULE),
      "s1",
      "agent",
      followup("Do you own the property?"),
    );
    const busy = markBusy(before);
    expect(busy.busy).toBe(true);
    expect({ ...busy, busy: false }).toEqual(before);
  });

  it("markError leaves everything else untouched", () => {
    const before = sessionStarted(
      ruleChosen(initialState(), RULE),
      "s1",
      "agent",
      followup("Do you own the property?"),
    );
    const failed = markError(markBusy(before), "The service could not be reached.");
    expect(failed.error).toBe("The service could not be reached.");
    expect(failed.busy).toBe(false);
    expect({ ...failed, error: null }).toEqual(before);
  });
});

describe("rebuilding from a transcript", () => {
  function transcriptAfter(turns: Transcript["turns"], over: Partial<Transcript>): Transcript {
    return {
      session_id: "s1",
      rule_id: RULE.rule_id,
      rule_title: RULE.title,
      rule_text: RULE.rule_text,
      question: RULE.question,
      scenario: "",
      mode: "agent",
      status: "awaiting_user",
      gold_answer: null,
      item_id: null,
      turns,
      pending_followup: null,
      final_answer: null,
      conclusion: null,
      created_at: 100.0,
      updated_at: 105.0,
      ...over,
    };
  }

  it("reconstructs a mid-dialog view identical to the incremental one", () => {
    // Two follow-ups answered, a third pending. The incremental path:
    let incremental = sessionStarted(
      ruleChosen(initialState(), RULE),
      "s1",
      "agent",
      followup("Do you own the property?"),
    );
    incremental = applyReply(
      incremental,
      "Yes",
      followup("Do you live in the property as your main home?"),
    );
    incremental = applyReply(
      incremental,
      "Yes",
      followup("Do you have a household income under 31,000 a year?"),
    );

    // The same five turns as the server would report them.
    const rebuilt = stateFromTranscript(
      transcriptAfter(
        [
          { speaker: "agent", ts: 1, kind: "FollowUp", text: "Do you own the property?", trace: [], resolved: [] },
          { speaker: "user", ts: 2, reply: "Yes" },
          { speaker: "agent", ts: 3, kind: "FollowUp", text: "Do you live in the property as your main home?", trace: [], resolved: [] },
          { speaker: "user", ts: 4, reply: "Yes" },
          { speaker: "agent", ts: 5, kind: "FollowUp", text: "Do you have a household income under 31,000 a year?", trace: [], resolved: [] },
        ],
        { pending_followup: "Do you have a household income under 31,000 a year?" },
      ),
    );

    expect(rebuilt).toEqual(incremental);
    expect(rebuilt.phase).toBe("answering_followup");
    expect(viewInvariantViolations(rebuilt)).toEqual([]);
  });

  it("reconstructs a finished dialog with its conclusion", () => {
    let incremental = sessionStarted(
      ruleChosen(initialState(), RULE),
      "s1",
      "agent",
      followup("Do you own the property?"),
    );
    incremental = applyReply(incremental, "No", terminal("No"));
    incremental = applyConclusion(incremental, {
      answer: "No",
      correct: true,
      elapsed_ms: 1500,
      status: "finished",
    });

    const rebuilt = stateFromTranscript(
      transcriptAfter(
        [
          { speaker: "agent", ts: 1, kind: "FollowUp", text: "Do you own the property?", trace: [], resolved: [] },
          { speaker: "user", ts: 2, reply: "No" },
          { speaker: "agent", ts: 3, kind: "No", text: "No", trace: [], resolved: [] },
        ],
        {
          status: "finished",
          final_answer: "No",
          conclusion: { answer: "No", correct: true, elapsed_ms: 1500, ts: 9 },
        },
      ),
    );

    expect(rebuilt).toEqual(incremental);
  });

  it("maps a waiting reading session to the reading phase", () => {
    const rebuilt = stateFromTranscript(
      transcriptAfter([], { mode: "reading", status: "awaiting_user" }),
    );
    expect(rebuilt.phase).toBe("reading_rule");
    expect(rebuilt.ruleText).toBe(RULE.rule_text);
  });

  it("shows an aborted session as a result, dropping any stale follow-up", () => {
    const rebuilt = stateFromTranscript(
      transcriptAfter(
        [
          { speaker: "agent", ts: 1, kind: "FollowUp", text: "Do you own the property?", trace: [], resolved: [] },
        ],
        { status: "aborted", pending_followup: "Do you own the property?" },
      ),
    );
    expect(rebuilt.phase).toBe("showing_result");
    expect(rebuilt.currentFollowup).toBeNull();
    expect(rebuilt.status).toBe("aborted");
    expect(viewInvariantViolations(rebuilt)).toEqual([]);
  });
});

describe("invariant checks", () => {
  it("flags an answering phase without a pending question", () => {
    const broken = {
      ...sessionStarted(
        ruleChosen(initialState(), RULE),
        "s1",
        "agent",
        followup("Do you own the property?"),
      ),
      currentFollowup: null,
    };
    expect(viewInvariantViolations(broken)).toContain(
      "answering_followup phase without a pending follow-up",
    );
  });

  it("flags a pending question outside the answering phase", () => {
    const broken = {
      ...initialState(),
      sessionId: "s1",
      currentFollowup: "Do you own the property?",
    };
    const problems = viewInvariantViolations(broken);
    expect(problems.some((p) => p.includes("pending follow-up while in phase"))).toBe(true);
  });
});
