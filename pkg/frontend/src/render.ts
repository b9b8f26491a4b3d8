/**
 * DOM view. render() rebuilds the whole page from the current state;
 * the state is small enough that diffing would buy nothing.
 *
 * Buttons carry data- attributes (data-reply, data-conclude, data-rule,
 * data-start, data-retry, data-reset) so behavior tests can find them
 * without depending on visual structure.
 */

import type { Mode, Reply, RuleInfo, TerminalAnswer } from "./api";
import type { DialogViewState } from "./state";
import { CONCLUSION_CHOICES } from "./state";
import type { PhaseTimer } from "./timer";

export interface Handlers {
  chooseRule(rule: RuleInfo): void;
  updateQuestion(text: string): void;
  updateScenario(text: string): void;
  startDialog(mode: Mode): void;
  sendReply(reply: Reply): void;
  submitConclusion(answer: TerminalAnswer): void;
  retry(): void;
  reset(): void;
}

type Child = Node | string;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [name, value] of Object.entries(attrs)) {
    node.setAttribute(name, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export function render(
  state: DialogViewState,
  rules: RuleInfo[],
  handlers: Handlers,
  timer?: PhaseTimer,
): HTMLElement {
  const root = el("div", { class: "rulechat" });
  root.append(header(state, handlers));
  if (state.error !== null) {
    root.append(errorStrip(state.error, handlers));
  }
  switch (state.phase) {
    case "selecting_rule":
      root.append(ruleList(rules, handlers));
      break;
    case "entering_question":
      root.append(questionForm(state, handlers));
      break;
    case "answering_followup":
      root.append(dialogHeader(state));
      root.append(transcriptList(state));
      root.append(followupPanel(state, handlers));
      break;
    case "reading_rule":
      root.append(dialogHeader(state));
      root.append(ruleTextSection(state));
      root.append(conclusionPrompt(state, handlers, "Your answer, from the text above"));
      break;
    case "showing_result":
      root.append(dialogHeader(state));
      if (state.mode === "agent") {
        root.append(transcriptList(state));
      } else {
        root.append(ruleTextSection(state));
      }
      root.append(resultPanel(state, handlers));
      break;
  }
  if (timer !== undefined) {
    root.append(timerFooter(state, timer));
  }
  return root;
}

function header(state: DialogViewState, handlers: Handlers): HTMLElement {
  const bar = el("header", { class: "bar" }, el("h1", {}, "rulechat"));
  if (state.phase !== "selecting_rule") {
    const reset = el("button", { class: "link", "data-reset": "" }, "start over");
    reset.addEventListener("click", () => handlers.reset());
    bar.append(reset);
  }
  return bar;
}

function errorStrip(message: string, handlers: Handlers): HTMLElement {
  const retry = el("button", { "data-retry": "" }, "Retry");
  retry.addEventListener("click", () => handlers.retry());
  return el(
    "div",
    { class: "error", role: "alert" },
    el("span", {}, message),
    retry,
  );
}

function ruleList(rules: RuleInfo[], handlers: Handlers): HTMLElement {
  const list = el("ul", { class: "rules" });
  for (const rule of rules) {
    const pick = el(
      "button",
      { "data-rule": rule.rule_id },
      el("strong", {}, rule.title),
      el("span", { class: "hint" }, rule.question),
    );
    pick.addEventListener("click", () => handlers.chooseRule(rule));
    list.append(el("li", {}, pick));
  }
  return el(
    "section",
    { class: "pick-rule" },
    el("h2", {}, "Which rule is your question about?"),
    list,
  );
}

function questionForm(state: DialogViewState, handlers: Handlers): HTMLElement {
  const question = el("input", {
    type: "text",
    name: "question",
    value: state.question,
  });
  question.value = state.question;
  question.addEventListener("input", () => handlers.updateQuestion(question.value));

  const scenario = el("textarea", { name: "scenario", rows: "3" });
  scenario.value = state.scenario;
  scenario.addEventListener("input", () => handlers.updateScenario(scenario.value));

  const askAgent = el("button", { "data-start": "agent" }, "Ask the agent");
  askAgent.addEventListener("click", () => handlers.startDialog("agent"));
  const readSelf = el("button", { "data-start": "reading" }, "Read the rule yourself");
  readSelf.addEventListener("click", () => handlers.startDialog("reading"));
  if (state.busy) {
    askAgent.setAttribute("disabled", "");
    readSelf.setAttribute("disabled", "");
  }

  return el(
    "section",
    { class: "ask" },
    el("h2", {}, state.ruleTitle),
    el("label", {}, "Your question", question),
    el("label", {}, "Your situation, in your own words (optional)", scenario),
    el("div", { class: "actions" }, askAgent, readSelf),
  );
}

function dialogHeader(state: DialogViewState): HTMLElement {
  const head = el(
    "section",
    { class: "dialog-head" },
    el("h2", {}, state.ruleTitle),
    el("p", { class: "question" }, state.question),
  );
  if (state.scenario) {
    head.append(el("p", { class: "scenario" }, state.scenario));
  }
  return head;
}

function transcriptList(state: DialogViewState): HTMLElement {
  const list = el("ol", { class: "transcript" });
  for (const turn of state.transcript) {
    list.append(el("li", { "data-speaker": turn.speaker }, turn.text));
  }
  return list;
}

function followupPanel(state: DialogViewState, handlers: Handlers): HTMLElement {
  const panel = el(
    "section",
    { class: "followup" },
    el("p", { class: "pending-question" }, state.currentFollowup ?? ""),
  );
  const actions = el("div", { class: "actions" });
  for (const reply of ["Yes", "No"] as const) {
    const button = el("button", { "data-reply": reply }, reply);
    if (state.busy) {
      button.setAttribute("disabled", "");
    }
    button.addEventListener("click", () => handlers.sendReply(reply));
    actions.append(button);
  }
  panel.append(actions);
  return panel;
}

function ruleTextSection(state: DialogViewState): HTMLElement {
  const section = el("section", { class: "rule-text" });
  for (const paragraph of state.ruleText.split(/\n{2,}/)) {
    const lines = paragraph.split("\n");
    const p = el("p", {});
    lines.forEach((line, i) => {
      if (i > 0) {
        p.append(el("br"));
      }
      p.append(line);
    });
    section.append(p);
  }
  return section;
}

function conclusionPrompt(
  state: DialogViewState,
  handlers: Handlers,
  label: string,
): HTMLElement {
  const actions = el("div", { class: "actions" });
  for (const answer of CONCLUSION_CHOICES) {
    const button = el("button", { "data-conclude": answer }, answer);
    if (state.busy) {
      button.setAttribute("disabled", "");
    }
    button.addEventListener("click", () => handlers.submitConclusion(answer));
    actions.append(button);
  }
  return el("section", { class: "conclude" }, el("p", {}, label), actions);
}

function resultPanel(state: DialogViewState, handlers: Handlers): HTMLElement {
  const panel = el("section", { class: "result" });
  if (state.status === "aborted") {
    panel.append(
      el("p", { class: "aborted" }, "This session was closed before it finished."),
    );
    return panel;
  }
  if (state.mode === "agent" && state.finalAnswer !== null) {
    panel.append(el("p", { class: "final-answer" }, state.finalAnswer));
  }
  if (state.conclusion !== null) {
    panel.append(conclusionSummary(state.conclusion.answer, state.conclusion));
  } else {
    panel.append(
      conclusionPrompt(state, handlers, "Record your own conclusion"),
    );
  }
  return panel;
}

function conclusionSummary(
  answer: string,
  conclusion: { correct: boolean | null; elapsedMs: number },
): HTMLElement {
  const seconds = (conclusion.elapsedMs / 1000).toFixed(1);
  let grading = "";
  if (conclusion.correct === true) {
    grading = "That matches the recorded answer.";
  } else if (conclusion.correct === false) {
    grading = "That does not match the recorded answer.";
  }
  const line = el(
    "p",
    { class: "conclusion" },
    `You concluded ${answer} after ${seconds}s. ${grading}`.trimEnd(),
  );
  return el("section", { class: "concluded" }, line);
}

function timerFooter(state: DialogViewState, timer: PhaseTimer): HTMLElement {
  const seconds = (timer.elapsedIn(state.phase) / 1000).toFixed(0);
  return el(
    "footer",
    { class: "timing" },
    el("span", {}, `${seconds}s in this step`),
  );
}
