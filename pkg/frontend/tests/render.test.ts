// @vitest-environment happy-dom
import { describe, expect, it } from "vitest";

import type { AgentTurn, RuleInfo } from "../src/api";
import type { Handlers } from "../src/render";
import { render } from "../src/render";
import {
  applyConclusion,
  applyReply,
  initialState,
  markBusy,
  markError,
  ruleChosen,
  sessionStarted,
} from "../src/state";

const RULE: RuleInfo = {
  rule_id: "home-upgrade-grant",
  title: "Home upgrade grant",
  rule_text: "You can get the grant if:\n* you own the property\n* you live there",
  source_url: "",
  question: "Do I qualify for the home upgrade grant?",
  parsed: { conditions: 2, operator: "and", outcome_negated: false, ambiguous: false },
};

function noopHandlers(calls: string[] = []): Handlers {
  return {
    chooseRule: (r) => calls.push(`choose:${r.rule_id}`),
    updateQuestion: () => calls.push("question"),
    updateScenario: () => calls.push("scenario"),
    startDialog: (mode) => calls.push(`start:${mode}`),
    sendReply: (reply) => calls.push(`reply:${reply}`),
    submitConclusion: (answer) => calls.push(`conclude:${answer}`),
    retry: () => calls.push("retry"),
    reset: () => calls.push("reset"),
  };
}

function followupState() {
  return sessionStarted(ruleChosen(initialState(), RULE), "s1", "agent", {
    kind: "FollowUp",
    text: "Do you own the property?",
    trace: [],
    status: "awaiting_user",
  } satisfies AgentTurn);
}

function finishedState() {
  return applyReply(followupState(), "Yes", {
    kind: "Yes",
    text: "Yes",
    trace: [],
    status: "finished",
  });
}

describe("rendering a pending follow-up", () => {
  it("shows exactly two reply buttons", () => {
    const view = render(followupState(), [], noopHandlers());
    const buttons = view.querySelectorAll("button[data-reply]");
    expect(buttons.length).toBe(2);
    const labels = Array.from(buttons, (b) => b.textContent);
    expect(labels).toEqual(["Yes", "No"]);
  });

  it("shows the question, title, and transcript", () => {
    const view = render(followupState(), [], noopHandlers());
    expect(view.querySelector("h2")?.textContent).toBe("Home upgrade grant");
    expect(view.querySelector(".question")?.textContent).toBe(RULE.question);
    expect(view.querySelector(".pending-question")?.textContent).toBe(
      "Do you own the property?",
    );
    expect(view.querySelectorAll(".transcript li").length).toBe(1);
  });

  it("disables the reply buttons while a request is in flight", () => {
    const view = render(markBusy(followupState()), [], noopHandlers());
    for (const button of view.querySelectorAll("button[data-reply]")) {
      expect(button.hasAttribute("disabled")).toBe(true);
    }
  });

  it("clicking a reply button reaches the handler", () => {
    const calls: string[] = [];
    const view = render(followupState(), [], noopHandlers(calls));
    (view.querySelector("button[data-reply='No']") as HTMLButtonElement).click();
    expect(calls).toEqual(["reply:No"]);
  });
});

describe("rendering a finished dialog", () => {
  it("drops the reply buttons and shows the final answer", () => {
    const view = render(finishedState(), [], noopHandlers());
    expect(view.querySelectorAll("button[data-reply]").length).toBe(0);
    expect(view.querySelector(".final-answer")?.textContent).toBe("Yes");
  });

  it("offers conclusion buttons until one is recorded", () => {
    const undecided = render(finishedState(), [], noopHandlers());
    expect(undecided.querySelectorAll("button[data-conclude]").length).toBe(2);

    const concluded = applyConclusion(finishedState(), {
      answer: "Yes",
      correct: true,
      elapsed_ms: 3100,
      status: "finished",
    });
    const view = render(concluded, [], noopHandlers());
    expect(view.querySelectorAll("button[data-conclude]").length).toBe(0);
    expect(view.querySelector(".conclusion")?.textContent).toContain("You concluded Yes");
    expect(view.querySelector(".conclusion")?.textContent).toContain("matches the recorded answer");
  });

  it("notes an aborted session instead of a result", () => {
    const aborted = { ...finishedState(), status: "aborted" as const, finalAnswer: null };
    const view = render(aborted, [], noopHandlers());
    expect(view.querySelector(".aborted")).not.toBeNull();
    expect(view.querySelectorAll("button[data-conclude]").length).toBe(0);
  });
});

describe("rendering the reading arm", () => {
  function readingState() {
    return sessionStarted(ruleChosen(initialState(), RULE), "s2", "reading", {
      kind: "RuleText",
      text: RULE.rule_text,
      status: "awaiting_user",
    });
  }

  it("shows the rule text and no follow-up controls", () => {
    const view = render(readingState(), [], noopHandlers());
    expect(view.querySelector(".rule-text")?.textContent).toContain("you own the property");
    expect(view.querySelectorAll("button[data-reply]").length).toBe(0);
    expect(view.querySelectorAll("button[data-conclude]").length).toBe(2);
  });
});

describe("rendering the rule picker", () => {
  it("lists one button per catalog rule", () => {
    const second: RuleInfo = { ...RULE, rule_id: "blue-badge", title: "Blue Badge" };
    const view = render(initialState(), [RULE, second], noopHandlers());
    const buttons = view.querySelectorAll("button[data-rule]");
    expect(buttons.length).toBe(2);
    expect(buttons[0].getAttribute("data-rule")).toBe("home-upgrade-grant");
  });

  it("forwards the chosen rule", () => {
    const calls: string[] = [];
    const view = render(initialState(), [RULE], noopHandlers(calls));
    (view.querySelector("button[data-rule]") as HTMLButtonElement).click();
    expect(calls).toEqual(["choose:home-upgrade-grant"]);
  });
});

describe("error strip", () => {
  it("shows the message with a retry button", () => {
    const calls: string[] = [];
    const failed = markError(followupState(), "The service could not be reached.");
    const view = render(failed, [], noopHandlers(calls));
    expect(view.querySelector(".error")?.textContent).toContain(
      "The service could not be reached.",
    );
    (view.querySelector("button[data-retry]") as HTMLButtonElement).click();
    expect(calls).toEqual(["retry"]);
  });
});
