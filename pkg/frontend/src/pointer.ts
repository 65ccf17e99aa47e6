/**
 * Turns raw pointer motion into the hand stream: at most one sample per
 * 1/30 s while the pointer is over the table viewport, none while it is
 * outside. The synthesized gaze is the pointer position smoothed with a
 * first-order lag, standing in for eye tracking the way the pointer
 * stands in for motion capture.
 */

export interface HandSample {
  t: number;
  hand: [number, number, number];
  gaze: [number, number];
}

export const STREAM_RATE_HZ = 30;

// grid plane of the service world frame; the fingertip rides 2 cm above it
const TABLE_Z = 0.0;
const HAND_HOVER = 0.02;

const GAZE_TAU_MS = 150;

export class HandStreamer {
  private pointer: [number, number] | null = null;
  private inside = false;
  private gaze: [number, number] | null = null;
  private nextDueMs: number | null = null;
  private epochMs: number | null = null;
  private lastT: number | null = null;
  readonly intervalMs: number;

  constructor(rateHz: number = STREAM_RATE_HZ, private gazeTauMs: number = GAZE_TAU_MS) {
    if (rateHz <= 0) {
      throw new Error("stream rate must be positive");
    }
    this.intervalMs = 1000 / rateHz;
  }

  /** Latest pointer position in workspace meters, and whether it is over the viewport. */
  setPointer(x: number, y: number, inside: boolean): void {
    this.pointer = [x, y];
    this.inside = inside;
    if (this.gaze === null) {
      this.gaze = [x, y];
    }
  }

  /** Smoothed gaze estimate for drawing; null before any pointer motion. */
  gazeEstimate(): [number, number] | null {
    return this.gaze === null ? null : [this.gaze[0], this.gaze[1]];
  }

  /**
   * Called at whatever cadence the host loop runs; emits a sample only
   * when a 1/30 s slot is due. Slots advance by a fixed interval rather
   * than resetting to "now", so jittery ticks still average 30 Hz.
   */
  tick(nowMs: number): HandSample | null {
    if (!this.inside || this.pointer === null) {
      // leaving the viewport drops the cadence; re-entry emits at once
      this.nextDueMs = null;
      return null;
    }
    if (this.nextDueMs === null) {
      this.nextDueMs = nowMs;
    }
    if (nowMs < this.nextDueMs) {
      return null;
    }
    this.nextDueMs += this.intervalMs;
    if (this.nextDueMs <= nowMs) {
      // the loop stalled past a full slot; skip instead of bursting
      this.nextDueMs = nowMs + this.intervalMs;
    }
    if (this.epochMs === null) {
      this.epochMs = nowMs;
    }
    let t = (nowMs - this.epochMs) / 1000;
    if (this.lastT !== null && t <= this.lastT) {
      // the service requires strictly increasing stamps per stream
      t = this.lastT + 1e-4;
    }
    const dtMs = this.lastT === null ? this.intervalMs : (t - this.lastT) * 1000;
    const g = this.gaze as [number, number];
    const a = 1 - Math.exp(-dtMs / this.gazeTauMs);
    g[0] += a * (this.pointer[0] - g[0]);
    g[1] += a * (this.pointer[1] - g[1]);
    this.lastT = t;
    return {
      t,
      hand: [this.pointer[0], this.pointer[1], TABLE_Z + HAND_HOVER],
      gaze: [g[0], g[1]],
    };
  }
}
