/**
 * A deterministic scripted participant, used by the end-to-end tests
 * and handy for smoke-driving a live service.
 *
 * The trick that makes scripted runs verifiable: when every follow-up
 * in a dialog gets the same reply, the rule's condition formula (any
 * mix of and/or nesting) evaluates to exactly that truth value, because
 * such formulas are monotone. So the expected final answer depends only
 * on the uniform reply and on whether the rule states the negative
 * outcome, never on the structure.
 */

import type { ParsedRuleShape, Reply, TerminalAnswer } from "./api";
import type { ConcludeContext, Participant, StudyItem } from "./study";

/**
 * Expected terminal answer when every follow-up gets `uniformReply`.
 *
 * Assumes the follow-ups phrase their conditions affirmatively, i.e. a
 * Yes reply makes the condition hold. Rules whose text inverts a
 * condition ("... unless you receive pension credit") fall outside
 * this model; work their golds out from the text instead.
 */
export function expectedAnswer(
  parsed: Pick<ParsedRuleShape, "outcome_negated">,
  uniformReply: Reply,
): TerminalAnswer {
  const conditionsHold = uniformReply === "Yes";
  const outcome = parsed.outcome_negated ? !conditionsHold : conditionsHold;
  return outcome ? "Yes" : "No";
}

/** A reply for every question, or a finite per-question script. */
export type ReplyScript = Reply | Reply[];

export class ScriptedParticipant implements Participant {
  private readonly consumed = new Map<string, number>();

  constructor(private readonly scripts: Record<string, ReplyScript>) {}

  answerFollowup(item: StudyItem, _question: string): Reply {
    const script = this.scripts[item.itemId];
    if (script === undefined) {
      throw new Error(`no reply script for item ${item.itemId}`);
    }
    if (typeof script === "string") {
      return script;
    }
    const used = this.consumed.get(item.itemId) ?? 0;
    if (used >= script.length) {
      throw new Error(`reply script for item ${item.itemId} ran out`);
    }
    this.consumed.set(item.itemId, used + 1);
    return script[used];
  }

  conclude(item: StudyItem, context: ConcludeContext): TerminalAnswer {
    if (context.arm === "agent" && context.finalAnswer !== null) {
      // Report what the dialog said; grading against the item's gold
      // then measures agent agreement, not participant memory.
      return context.finalAnswer as TerminalAnswer;
    }
    // Reading arm: a perfectly attentive reader lands on the gold.
    return item.gold;
  }
}
