import { describe, expect, it } from "vitest";

import { HandStreamer } from "../src/pointer.js";
import type { HandSample } from "../src/pointer.js";

function drive(
  streamer: HandStreamer,
  fromMs: number,
  toMs: number,
  stepMs: number,
  onTick?: (nowMs: number) => void,
): HandSample[] {
  const out: HandSample[] = [];
  for (let now = fromMs; now < toMs; now += stepMs) {
    onTick?.(now);
    const sample = streamer.tick(now);
    if (sample) {
      out.push(sample);
    }
  }
  return out;
}

describe("HandStreamer", () => {
  it("emits 30 messages, give or take one, for 1 s of motion", () => {
    const s = new HandStreamer();
    s.setPointer(0.1, 0.3, true);
    // pointer events at 120 Hz, host loop ticking every ~8 ms
    const samples = drive(s, 0, 1000, 1000 / 120, (now) => {
      s.setPointer(0.1 + now / 10000, 0.3, true);
    });
    expect(samples.length).toBeGreaterThanOrEqual(29);
    expect(samples.length).toBeLessThanOrEqual(31);
  });

  it("keeps streaming while the pointer dwells in place", () => {
    const s = new HandStreamer();
    s.setPointer(0.2, 0.4, true);
    const samples = drive(s, 0, 1000, 4);
    expect(samples.length).toBeGreaterThanOrEqual(29);
    expect(samples.length).toBeLessThanOrEqual(31);
    expect(samples.at(-1)!.hand[0]).toBeCloseTo(0.2, 12);
  });

  it("goes quiet while the pointer is outside the viewport", () => {
    const s = new HandStreamer();
    s.setPointer(0.5, 0.1, false);
    expect(drive(s, 0, 500, 5)).toHaveLength(0);
  });

  it("pauses on exit, resumes on re-entry, stamps stay strictly increasing", () => {
    const s = new HandStreamer();
    s.setPointer(0.0, 0.2, true);
    const first = drive(s, 0, 400, 5);
    s.setPointer(0.0, 0.2, false);
    const gone = drive(s, 400, 800, 5);
    s.setPointer(0.1, 0.25, true);
    const second = drive(s, 800, 1200, 5);

    expect(first.length).toBeGreaterThan(0);
    expect(gone).toHaveLength(0);
    expect(second.length).toBeGreaterThan(0);
    const stamps = [...first, ...second].map((m) => m.t);
    for (let i = 1; i < stamps.length; i++) {
      expect(stamps[i]).toBeGreaterThan(stamps[i - 1]);
    }
  });

  it("never bursts after a stalled loop", () => {
    const s = new HandStreamer();
    s.setPointer(0.3, 0.3, true);
    expect(s.tick(0)).not.toBeNull();
    // the host loop freezes for half a second, then resumes
    expect(s.tick(500)).not.toBeNull();
    expect(s.tick(501)).toBeNull();
    expect(s.tick(510)).toBeNull();
    expect(s.tick(534)).not.toBeNull();
  });

  it("holds the hand 2 cm above the table", () => {
    const s = new HandStreamer();
    s.setPointer(-0.4, 0.55, true);
    const sample = s.tick(0)!;
    expect(sample.hand).toEqual([-0.4, 0.55, 0.02]);
  });

  it("synthesizes gaze as a lagged pointer", () => {
    const s = new HandStreamer();
    s.setPointer(0, 0.2, true);
    drive(s, 0, 300, 5);
    // pointer jumps; gaze should chase it, not teleport
    s.setPointer(0.4, 0.6, true);
    const right = s.tick(334)!;
    expect(right.gaze[0]).toBeGreaterThan(0.0);
    expect(right.gaze[0]).toBeLessThan(0.4);
    expect(right.gaze[1]).toBeGreaterThan(0.2);
    expect(right.gaze[1]).toBeLessThan(0.6);
    // after roughly ten time constants it has caught up
    const later = drive(s, 340, 2400, 5).at(-1)!;
    expect(later.gaze[0]).toBeCloseTo(0.4, 3);
    expect(later.gaze[1]).toBeCloseTo(0.6, 3);
  });

  it("rejects a non-positive rate", () => {
    expect(() => new HandStreamer(0)).toThrow();
  });
});
