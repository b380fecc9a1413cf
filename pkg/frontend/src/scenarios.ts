import { SessionRecorder } from "./recorder.js";
import { ObserverGroup, SlideManifest } from "./types.js";
import { ViewerState } from "./viewer-state.js";

/** Slide shared by every scripted sequence. */
export const SCENARIO_MANIFEST: SlideManifest = {
  slide_id: "VIEWER-DEMO",
  width_px: 4000,
  height_px: 4000,
  standard_mags: [2, 4, 10, 20, 40],
};

type Action =
  | { t: number; kind: "pan"; cx: number; cy: number }
  | { t: number; kind: "panBy"; dx: number; dy: number }
  | { t: number; kind: "zoom"; mag: number };

export interface Scenario {
  name: string;
  observerId: string;
  group: ObserverGroup;
  actions: Action[];
}

/** Deterministic 32-bit PRNG (mulberry32) for the generated sequences. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function dragTo(
  actions: Action[],
  fromT: number,
  cx: number,
  cy: number,
  frames: number,
  frameMs: number
): number {
  // intermediate frames arrive faster than the debounce window and must
  // collapse into the single settled event at the end of the drag
  let t = fromT;
  for (let i = 0; i < frames; i++) {
    t += frameMs;
    actions.push({ t, kind: "panBy", dx: cx / frames, dy: cy / frames });
  }
  return t;
}

function handWritten(): Scenario[] {
  const w = SCENARIO_MANIFEST.width_px;
  const h = SCENARIO_MANIFEST.height_px;
  const scenarios: Scenario[] = [];

  scenarios.push({
    name: "single-pan",
    observerId: "viewer00",
    group: "GU",
    actions: [{ t: 0, kind: "pan", cx: w * 0.25, cy: h * 0.25 }],
  });

  {
    // one continuous 1 s drag at ~33 fps: one settled event only
    const actions: Action[] = [{ t: 0, kind: "pan", cx: w / 2, cy: h / 2 }];
    dragTo(actions, 500, w * 0.3, -h * 0.2, 30, 33);
    scenarios.push({
      name: "continuous-drag",
      observerId: "viewer01",
      group: "GU",
      actions,
    });
  }

  scenarios.push({
    name: "zoom-ladder",
    observerId: "viewer02",
    group: "GU",
    actions: [2, 4, 10, 20, 40].map((mag, i) => ({
      t: i * 400,
      kind: "zoom" as const,
      mag,
    })),
  });

  scenarios.push({
    name: "corner-tour",
    observerId: "viewer03",
    group: "GEN",
    actions: [
      { t: 0, kind: "pan", cx: 0, cy: 0 },
      { t: 500, kind: "pan", cx: w, cy: 0 },
      { t: 1000, kind: "pan", cx: w, cy: h },
      { t: 1500, kind: "pan", cx: 0, cy: h },
    ],
  });

  scenarios.push({
    name: "out-of-bounds-pans",
    observerId: "viewer04",
    group: "GEN",
    actions: [
      { t: 0, kind: "zoom", mag: 20 },
      { t: 400, kind: "pan", cx: -w, cy: -h },
      { t: 800, kind: "pan", cx: 2 * w, cy: h / 2 },
      { t: 1200, kind: "pan", cx: w / 2, cy: 3 * h },
    ],
  });

  scenarios.push({
    name: "zoom-then-inspect",
    observerId: "viewer05",
    group: "GU",
    actions: [
      { t: 0, kind: "pan", cx: w * 0.7, cy: h * 0.3 },
      { t: 600, kind: "zoom", mag: 40 },
      { t: 1200, kind: "panBy", dx: 120, dy: 80 },
      { t: 1800, kind: "panBy", dx: -60, dy: 40 },
      { t: 2400, kind: "zoom", mag: 10 },
    ],
  });

  {
    // two drags separated by a long fixation
    const actions: Action[] = [{ t: 0, kind: "pan", cx: w * 0.4, cy: h * 0.6 }];
    let t = dragTo(actions, 300, w * 0.2, h * 0.1, 12, 40);
    t = dragTo(actions, t + 2500, -w * 0.3, -h * 0.25, 18, 25);
    scenarios.push({
      name: "two-drags-long-fixation",
      observerId: "viewer06",
      group: "GEN",
      actions,
    });
  }

  scenarios.push({
    name: "rapid-zoom-flicker",
    observerId: "viewer07",
    group: "GEN",
    // zoom changes 50 ms apart settle only once at 40X
    actions: [
      { t: 0, kind: "pan", cx: w / 2, cy: h / 2 },
      { t: 400, kind: "zoom", mag: 4 },
      { t: 450, kind: "zoom", mag: 10 },
      { t: 500, kind: "zoom", mag: 20 },
      { t: 550, kind: "zoom", mag: 40 },
    ],
  });

  return scenarios;
}

function generated(count: number): Scenario[] {
  const w = SCENARIO_MANIFEST.width_px;
  const h = SCENARIO_MANIFEST.height_px;
  const mags = SCENARIO_MANIFEST.standard_mags;
  const scenarios: Scenario[] = [];
  for (let i = 0; i < count; i++) {
    const rand = mulberry32(1000 + i);
    const actions: Action[] = [];
    let t = 0;
    const moves = 6 + Math.floor(rand() * 10);
    for (let m = 0; m < moves; m++) {
      const roll = rand();
      if (roll < 0.25) {
        actions.push({ t, kind: "zoom", mag: mags[Math.floor(rand() * mags.length)] });
      } else if (roll < 0.5) {
        // burst of sub-debounce moves: one settled event
        const frames = 3 + Math.floor(rand() * 8);
        t = dragTo(actions, t, (rand() - 0.5) * w, (rand() - 0.5) * h, frames, 30);
      } else {
        // occasionally aim outside the slide to exercise clamping
        const over = rand() < 0.3 ? 1.6 : 1.0;
        actions.push({ t, kind: "pan", cx: rand() * w * over, cy: rand() * h * over });
      }
      t += 200 + Math.floor(rand() * 1800);
    }
    scenarios.push({
      name: `walk-${String(i).padStart(2, "0")}`,
      observerId: `viewer${String(8 + i).padStart(2, "0")}`,
      group: rand() < 0.5 ? "GU" : "GEN",
      actions,
    });
  }
  return scenarios;
}

/** The 20 scripted navigation sequences used by the contract tests. */
export function allScenarios(): Scenario[] {
  return [...handWritten(), ...generated(12)];
}

export interface ScenarioRun {
  recorder: SessionRecorder;
  endMs: number;
}

/** Drive a scenario through a fresh viewer + recorder with its scripted
 * clock; the recorder ends up holding the settled events. */
export function runScenario(scenario: Scenario): ScenarioRun {
  const state = new ViewerState(SCENARIO_MANIFEST);
  const recorder = new SessionRecorder(state, scenario.observerId, scenario.group);
  recorder.start();
  const actions = [...scenario.actions].sort((a, b) => a.t - b.t);
  for (const action of actions) {
    recorder.tick(action.t);
    switch (action.kind) {
      case "pan":
        state.panTo(action.cx, action.cy);
        break;
      case "panBy":
        state.panBy(action.dx, action.dy);
        break;
      case "zoom":
        state.zoomTo(action.mag);
        break;
    }
    recorder.viewportChanged(action.t);
  }
  const endMs = (actions[actions.length - 1]?.t ?? 0) + 1000;
  recorder.tick(endMs);
  recorder.stop();
  return { recorder, endMs };
}
