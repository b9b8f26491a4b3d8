import type { Phase } from "./state";

export type Clock = () => number;

/**
 * Wall-clock accounting per UI phase.
 *
 * The view is repainted on every state change and each paint calls
 * enter() with the current phase, so re-entering the phase that is
 * already running must keep accumulating rather than reset. Reported
 * study timings come from these totals; the clock is injectable so
 * tests can drive it.
 */
export class PhaseTimer {
  private readonly accumulated = new Map<Phase, number>();
  private current: Phase | null = null;
  private enteredAt = 0;

  constructor(private readonly clock: Clock = () => performance.now()) {}

  enter(phase: Phase): void {
    const now = this.clock();
    this.settle(now);
    this.current = phase;
    this.enteredAt = now;
  }

  /** Stop counting without entering another phase. */
  stop(): void {
    this.settle(this.clock());
    this.current = null;
  }

  elapsedIn(phase: Phase): number {
    const settled = this.accumulated.get(phase) ?? 0;
    if (this.current === phase) {
      return settled + Math.max(0, this.clock() - this.enteredAt);
    }
    return settled;
  }

  total(): number {
    let sum = 0;
    for (const ms of this.accumulated.values()) {
      sum += ms;
    }
    if (this.current !== null) {
      sum += Math.max(0, this.clock() - this.enteredAt);
    }
    return sum;
  }

  snapshot(): Record<string, number> {
    const out: Record<string, number> = {};
    for (const [phase, ms] of this.accumulated) {
      out[phase] = ms;
    }
    if (this.current !== null) {
      out[this.current] =
        (out[this.current] ?? 0) + Math.max(0, this.clock() - this.enteredAt);
    }
    return out;
  }

  private settle(now: number): void {
    if (this.current !== null) {
      const settled = this.accumulated.get(this.current) ?? 0;
      this.accumulated.set(this.current, settled + Math.max(0, now - this.enteredAt));
    }
  }
}
