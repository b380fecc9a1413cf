import { SlideManifest, ViewportEvent, VIEW_WINDOW_PX } from "./types.js";

export interface ViewportBox {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

/**
 * Pan/zoom state of the viewer in base-level pixel coordinates.
 *
 * Invariant: after every mutation the viewport is an integer box fully
 * inside the slide bounds (clamped, never degenerate).
 */
export class ViewerState {
  private centerX: number;
  private centerY: number;
  private currentMag: number;

  constructor(readonly manifest: SlideManifest, initialMag?: number) {
    this.currentMag = initialMag ?? this.lowestMag();
    this.centerX = manifest.width_px / 2;
    this.centerY = manifest.height_px / 2;
  }

  get mag(): number {
    return this.currentMag;
  }

  get baseMag(): number {
    return Math.max(...this.manifest.standard_mags);
  }

  private lowestMag(): number {
    return Math.min(...this.manifest.standard_mags);
  }

  /** Viewport side length in base pixels at the current magnification. */
  private sidePx(): number {
    const side = Math.round((VIEW_WINDOW_PX * this.baseMag) / this.currentMag);
    return Math.max(
      1,
      Math.min(side, this.manifest.width_px, this.manifest.height_px)
    );
  }

  /** Current viewport, clamped to slide bounds. */
  viewport(): ViewportBox {
    const side = this.sidePx();
    let x0 = Math.round(this.centerX - side / 2);
    let y0 = Math.round(this.centerY - side / 2);
    x0 = Math.max(0, Math.min(x0, this.manifest.width_px - side));
    y0 = Math.max(0, Math.min(y0, this.manifest.height_px - side));
    return { x0, y0, x1: x0 + side, y1: y0 + side };
  }

  /** Center the viewport on (cx, cy); the box clamps to the slide. */
  panTo(cx: number, cy: number): void {
    this.centerX = cx;
    this.centerY = cy;
  }

  panBy(dx: number, dy: number): void {
    this.panTo(this.centerX + dx, this.centerY + dy);
  }

  /** Switch magnification, keeping the current center. */
  zoomTo(mag: number): void {
    if (!(mag > 0)) {
      throw new Error(`magnification must be positive, got ${mag}`);
    }
    this.currentMag = mag;
  }

  /** Snapshot of the settled viewport as a session-log event. */
  toEvent(tMs: number): ViewportEvent {
    const box = this.viewport();
    return { ...box, mag: this.currentMag, t_ms: tMs };
  }
}
