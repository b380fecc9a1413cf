/** Shared types for the slide viewer, matching the toolkit's external
 * file formats (slide manifest JSON and session-log JSONL). */

export type ObserverGroup = "GU" | "GEN";

export interface SlideManifest {
  slide_id: string;
  width_px: number;
  height_px: number;
  standard_mags: number[];
}

/** One settled viewport, in base-level (highest-magnification) pixels.
 * Boxes are half-open: [x0, x1) x [y0, y1). */
export interface ViewportEvent {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
  mag: number;
  t_ms: number;
}

export interface SessionHeader {
  slide_id: string;
  observer_id: string;
  group: ObserverGroup;
  end_ms?: number;
}

export interface ParsedSession {
  header: SessionHeader;
  events: ViewportEvent[];
}

export const DEFAULT_STANDARD_MAGS = [2, 4, 10, 20, 40];

/** On-screen viewport extent in screen pixels; a viewport at mag m covers
 * VIEW_WINDOW_PX * baseMag / m base pixels per side. */
export const VIEW_WINDOW_PX = 500;
