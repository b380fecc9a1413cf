import { ObserverGroup, ViewportEvent } from "./types.js";
import { ViewerState } from "./viewer-state.js";

export const DEFAULT_DEBOUNCE_MS = 150;

export class EmptySessionError extends Error {
  constructor() {
    super("no recorded events; start recording and navigate first");
    this.name = "EmptySessionError";
  }
}

/**
 * Records settled viewports into an append-only event buffer.
 *
 * A navigation "event" is a viewport that has been quiescent for the
 * debounce window: rapid intermediate states during a drag or zoom
 * animation are discarded. Timestamps are supplied by the caller (the
 * browser shell passes performance.now(); tests pass a scripted clock),
 * so recording is fully deterministic.
 */
export class SessionRecorder {
  private events: ViewportEvent[] = [];
  private pendingSince: number | null = null;
  private lastSeen = 0;
  private recording = false;

  constructor(
    private readonly state: ViewerState,
    readonly observerId: string,
    readonly group: ObserverGroup,
    readonly debounceMs: number = DEFAULT_DEBOUNCE_MS
  ) {}

  start(): void {
    this.recording = true;
  }

  stop(): void {
    this.recording = false;
    this.pendingSince = null;
  }

  get isRecording(): boolean {
    return this.recording;
  }

  get eventCount(): number {
    return this.events.length;
  }

  recordedEvents(): readonly ViewportEvent[] {
    return this.events;
  }

  /** Called on every pan/zoom mutation; restarts the quiescence window. */
  viewportChanged(tMs: number): void {
    this.lastSeen = Math.max(this.lastSeen, tMs);
    if (this.recording) {
      this.pendingSince = tMs;
    }
  }

  /**
   * Advance the clock; if a pending change has been quiet for the full
   * debounce window, append one event stamped at the settle point.
   */
  tick(tMs: number): void {
    this.lastSeen = Math.max(this.lastSeen, tMs);
    if (this.pendingSince === null) {
      return;
    }
    if (tMs - this.pendingSince >= this.debounceMs) {
      const settleAt = this.pendingSince;
      this.pendingSince = null;
      const last = this.events[this.events.length - 1];
      const tEvent = last ? Math.max(settleAt, last.t_ms) : settleAt;
      this.events.push(this.state.toEvent(tEvent));
    }
  }

  /**
   * Serialize the buffer to the session-log JSONL schema: one header
   * line, then one line per event. end_ms is the export time.
   */
  exportJsonl(endMs?: number): string {
    if (this.events.length === 0) {
      throw new EmptySessionError();
    }
    const end = endMs ?? this.lastSeen;
    const header = {
      type: "session",
      slide_id: this.state.manifest.slide_id,
      observer_id: this.observerId,
      group: this.group,
      end_ms: Math.max(end, this.events[this.events.length - 1].t_ms),
    };
    const lines = [JSON.stringify(header)];
    for (const ev of this.events) {
      lines.push(
        JSON.stringify({
          type: "viewport",
          x0: ev.x0,
          y0: ev.y0,
          x1: ev.x1,
          y1: ev.y1,
          mag: ev.mag,
          t_ms: ev.t_ms,
        })
      );
    }
    return lines.join("\n") + "\n";
  }
}
