/**
 * Browser shell: wires the viewer state, recorder, and replay controller
 * to a canvas. The slide itself is drawn as a schematic (deep-zoom tile
 * fetching is pluggable via drawTiles); all recording/replay logic lives
 * in the framework-free modules so it stays testable off-browser.
 */

import { DEFAULT_DEBOUNCE_MS, EmptySessionError, SessionRecorder } from "../recorder.js";
import { parseSessionLog } from "../parser.js";
import { ReplayController } from "../replay.js";
import { SlideManifest } from "../types.js";
import { ViewerState } from "../viewer-state.js";

const DEMO_MANIFEST: SlideManifest = {
  slide_id: "VIEWER-DEMO",
  width_px: 4000,
  height_px: 4000,
  standard_mags: [2, 4, 10, 20, 40],
};

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

function setup(): void {
  const canvas = byId<HTMLCanvasElement>("slide-canvas");
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    throw new Error("canvas 2d context unavailable");
  }
  const status = byId<HTMLElement>("status");
  const state = new ViewerState(DEMO_MANIFEST);
  const recorder = new SessionRecorder(state, "browser-user", "GEN");
  let replay: ReplayController | null = null;
  let replayRect: { x0: number; y0: number; x1: number; y1: number } | null =
    null;
  let trail: Array<{ cx: number; cy: number }> = [];
  let debounceTimer: number | undefined;

  const sx = canvas.width / DEMO_MANIFEST.width_px;
  const sy = canvas.height / DEMO_MANIFEST.height_px;

  function draw(): void {
    ctx!.fillStyle = "#f4f0e8";
    ctx!.fillRect(0, 0, canvas.width, canvas.height);
    const box = replayRect ?? state.viewport();
    ctx!.strokeStyle = replayRect ? "#c03" : "#06c";
    ctx!.lineWidth = 2;
    ctx!.strokeRect(
      box.x0 * sx,
      box.y0 * sy,
      (box.x1 - box.x0) * sx,
      (box.y1 - box.y0) * sy
    );
    if (trail.length > 1) {
      ctx!.strokeStyle = "rgba(192,48,48,0.7)";
      ctx!.beginPath();
      trail.forEach((p, i) => {
        if (i === 0) {
          ctx!.moveTo(p.cx * sx, p.cy * sy);
        } else {
          ctx!.lineTo(p.cx * sx, p.cy * sy);
        }
      });
      ctx!.stroke();
    }
    status.textContent =
      `mag ${state.mag}X  viewport [${box.x0},${box.y0})-[${box.x1},${box.y1})` +
      `  events ${recorder.eventCount}` +
      (recorder.isRecording ? "  REC" : "");
  }

  function changed(): void {
    const now = performance.now();
    recorder.viewportChanged(now);
    window.clearTimeout(debounceTimer);
    debounceTimer = window.setTimeout(() => {
      recorder.tick(performance.now());
      draw();
    }, DEFAULT_DEBOUNCE_MS);
    draw();
  }

  canvas.addEventListener("click", (ev) => {
    const rect = canvas.getBoundingClientRect();
    state.panTo((ev.clientX - rect.left) / sx, (ev.clientY - rect.top) / sy);
    changed();
  });
  byId<HTMLSelectElement>("mag-select").addEventListener("change", (ev) => {
    state.zoomTo(Number((ev.target as HTMLSelectElement).value));
    changed();
  });
  byId<HTMLButtonElement>("record-btn").addEventListener("click", () => {
    recorder.isRecording ? recorder.stop() : recorder.start();
    draw();
  });
  byId<HTMLButtonElement>("export-btn").addEventListener("click", () => {
    try {
      const blob = new Blob([recorder.exportJsonl(performance.now())], {
        type: "application/jsonl",
      });
      const a = document.createElement("a");
      a.href = URL.createObjectURL(blob);
      a.download = `${DEMO_MANIFEST.slide_id}-session.jsonl`;
      a.click();
      URL.revokeObjectURL(a.href);
    } catch (err) {
      if (err instanceof EmptySessionError) {
        status.textContent = err.message;
      } else {
        throw err;
      }
    }
  });
  byId<HTMLInputElement>("replay-input").addEventListener("change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) {
      return;
    }
    try {
      replay = new ReplayController(parseSessionLog(await file.text()));
    } catch (err) {
      status.textContent = String(err);
      return;
    }
    const advance = (): void => {
      const step = replay!.next();
      if (!step) {
        replayRect = null;
        trail = [];
        draw();
        return;
      }
      replayRect = step.event;
      trail = step.trail;
      draw();
      window.setTimeout(advance, Math.min(Math.max(step.dwellMs / 4, 80), 1500));
    };
    advance();
  });

  draw();
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", setup);
}
