import { ParsedSession, ViewportEvent } from "./types.js";

export interface ReplayStep {
  index: number;
  event: ViewportEvent;
  /** Dwell before the next step, ms (last step uses end_ms when known). */
  dwellMs: number;
  /** Viewport centers visited so far, for the scanpath polyline. */
  trail: Array<{ cx: number; cy: number }>;
}

/**
 * Steps through a parsed session one settled viewport at a time. The
 * step count always equals the event count; the timeline is scaled by
 * per-event dwell so long fixations replay proportionally longer.
 */
export class ReplayController {
  private position = 0;

  constructor(private readonly session: ParsedSession) {}

  get stepCount(): number {
    return this.session.events.length;
  }

  get done(): boolean {
    return this.position >= this.stepCount;
  }

  reset(): void {
    this.position = 0;
  }

  private dwellAt(index: number): number {
    const events = this.session.events;
    if (index + 1 < events.length) {
      return events[index + 1].t_ms - events[index].t_ms;
    }
    const end = this.session.header.end_ms;
    return end !== undefined ? Math.max(0, end - events[index].t_ms) : 0;
  }

  /** Advance one step; returns null once the session is exhausted. */
  next(): ReplayStep | null {
    if (this.done) {
      return null;
    }
    const index = this.position;
    this.position += 1;
    const trail = this.session.events.slice(0, this.position).map((ev) => ({
      cx: (ev.x0 + ev.x1) / 2,
      cy: (ev.y0 + ev.y1) / 2,
    }));
    return {
      index,
      event: this.session.events[index],
      dwellMs: this.dwellAt(index),
      trail,
    };
  }

  /** Run to completion, returning every step in order. */
  play(): ReplayStep[] {
    this.reset();
    const steps: ReplayStep[] = [];
    for (let step = this.next(); step !== null; step = this.next()) {
      steps.push(step);
    }
    return steps;
  }
}
