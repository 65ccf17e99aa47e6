/**
 * Pairs each posterior message with its decision into a complete,
 * already-colorized frame, and hands frames to the renderer through a
 * one-slot buffer: a newer frame replaces an unrendered older one, old
 * frames are never queued.
 *
 * The server answers every hand message with posterior then decision in
 * order, so a decision always belongs to the posterior immediately
 * before it. Anything that breaks that pairing (short weights, orphaned
 * halves, stamps running backwards) drops the whole frame with a console
 * diagnostic; a frame never mixes data from two different hand stamps.
 */

import { rasterize } from "./heatmap.js";
import type { GridMeta, PosteriorMsg, DecisionMsg } from "./protocol.js";

export interface HeatFrame {
  /** hand-message timestamp this frame answers */
  t: number;
  weights: Uint8Array;
  /** RGBA, one pixel per grid cell, ready for putImageData */
  pixels: Uint8ClampedArray;
  objectProbs: Record<string, number>;
  safeObject: number | null;
  serverLatencyMs: number;
  /** hand sent -> frame colorized, null when the send time is unknown (replays of foreign streams) */
  displayLatencyMs: number | null;
  seq: number;
}

export class FrameAssembler {
  private pending: PosteriorMsg | null = null;
  private lastT = -Infinity;
  private seq = 0;

  constructor(
    private grid: GridMeta,
    private palette: Uint8Array,
    private sentAtMs: (t: number) => number | undefined = () => undefined,
    private now: () => number = () => performance.now(),
  ) {}

  /** Forget any half-built frame, e.g. on disconnect or reset. Stamps may restart. */
  clear(): void {
    this.pending = null;
    this.lastT = -Infinity;
  }

  onPosterior(msg: PosteriorMsg): void {
    if (msg.weights.length !== this.grid.nx * this.grid.ny) {
      console.error(
        `dropping frame: ${msg.weights.length} weights for a ` +
          `${this.grid.nx}x${this.grid.ny} grid`,
      );
      this.pending = null;
      return;
    }
    if (msg.t < this.lastT) {
      console.error(
        `dropping posterior: stamp ${msg.t} after frame ${this.lastT}`,
      );
      return;
    }
    if (this.pending !== null) {
      console.error(`dropping unpaired posterior at t=${this.pending.t}`);
    }
    this.pending = msg;
  }

  onDecision(msg: DecisionMsg): HeatFrame | null {
    if (this.pending === null) {
      console.error("dropping decision with no matching posterior");
      return null;
    }
    const post = this.pending;
    this.pending = null;
    const pixels = new Uint8ClampedArray(post.weights.length * 4);
    rasterize(post.weights, this.grid, this.palette, pixels);
    const sent = this.sentAtMs(post.t);
    this.lastT = post.t;
    return {
      t: post.t,
      weights: post.weights,
      pixels,
      objectProbs: msg.objectProbs,
      safeObject: msg.safeObject,
      serverLatencyMs: msg.latencyMs,
      displayLatencyMs: sent === undefined ? null : this.now() - sent,
      seq: this.seq++,
    };
  }
}

export class FrameSlot {
  private frame: HeatFrame | null = null;
  dropped = 0;

  put(frame: HeatFrame): void {
    if (this.frame !== null) {
      this.dropped++;
    }
    this.frame = frame;
  }

  take(): HeatFrame | null {
    const f = this.frame;
    this.frame = null;
    return f;
  }

  peek(): HeatFrame | null {
    return this.frame;
  }

  clear(): void {
    this.frame = null;
  }
}
