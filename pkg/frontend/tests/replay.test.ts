import { describe, expect, it } from "vitest";

import { parseRecording, Recorder, Replayer } from "../src/replay.js";

const SCENE = '{"type":"scene","objects":[{"id":0,"position":[0,0.3]}],"box":null}';

function recording(): string {
  const lines = [SCENE];
  for (let i = 0; i < 9; i++) {
    const t = i / 30;
    lines.push(`{"type":"gaze","t":${t},"p":[0.1,0.3]}`);
    lines.push(`{"type":"hand","t":${t},"p":[0.1,0.3,0.02]}`);
  }
  return lines.join("\n") + "\n";
}

describe("parseRecording", () => {
  it("accepts a scene line followed by timed messages", () => {
    const msgs = parseRecording(recording());
    expect(msgs).toHaveLength(19);
    expect(msgs[0].t).toBeNull();
    expect(msgs[1].t).toBe(0);
    expect(msgs.at(-1)!.t).toBeCloseTo(8 / 30, 12);
  });

  it("skips blank lines", () => {
    const msgs = parseRecording("\n" + SCENE + "\n\n");
    expect(msgs).toHaveLength(1);
  });

  it("rejects junk with a line number", () => {
    expect(() => parseRecording(SCENE + "\n{oops\n")).toThrow(/line 2/);
    expect(() => parseRecording('[1,2]\n')).toThrow(/line 1/);
    expect(() => parseRecording('{"type":"hello","proto":1}\n')).toThrow(
      /unsupported type hello/,
    );
    expect(() => parseRecording('{"type":"hand","p":[0,0,0]}\n')).toThrow(
      /missing its stamp/,
    );
    expect(() => parseRecording('{"type":"gaze","t":"x","p":[0,0]}\n')).toThrow(
      /missing its stamp/,
    );
  });
});

describe("Replayer", () => {
  it("emits every message exactly once, in file order", () => {
    const msgs = parseRecording(recording());
    const r = new Replayer(msgs);
    const out: string[] = [];
    for (let now = 0; !r.done; now += 3) {
      out.push(...r.due(now));
    }
    expect(out).toEqual(msgs.map((m) => m.doc));
  });

  it("produces the same sequence regardless of tick granularity", () => {
    const msgs = parseRecording(recording());
    const fine: string[] = [];
    const coarse: string[] = [];
    const rf = new Replayer(msgs);
    for (let now = 0; !rf.done; now += 1) {
      fine.push(...rf.due(now));
    }
    const rc = new Replayer(msgs);
    for (let now = 0; !rc.done; now += 100) {
      coarse.push(...rc.due(now));
    }
    // one giant stalled step must still flush everything, untrimmed
    const rs = new Replayer(msgs);
    const single = rs.due(0).concat(rs.due(10_000));
    expect(coarse).toEqual(fine);
    expect(single).toEqual(fine);
  });

  it("paces by the embedded stamps", () => {
    const msgs = parseRecording(recording());
    const r = new Replayer(msgs);
    // clock starts at the first timed stamp: scene + the t=0 pair are due
    expect(r.due(500)).toHaveLength(3);
    // 100 ms later three more 30 Hz pairs have matured
    expect(r.due(600)).toHaveLength(6);
    expect(r.position).toBe(9);
    expect(r.total).toBe(19);
    expect(r.done).toBe(false);
  });

  it("an untimed leading line waits for the first timed one", () => {
    const msgs = parseRecording(
      SCENE + "\n" + '{"type":"hand","t":2.0,"p":[0,0.3,0.02]}' + "\n",
    );
    const r = new Replayer(msgs);
    expect(r.due(0)).toHaveLength(2);
    expect(r.done).toBe(true);
  });
});

describe("Recorder", () => {
  it("captures stream documents and round-trips through the parser", () => {
    const rec = new Recorder();
    rec.start();
    rec.capture(SCENE);
    rec.capture('{"type":"gaze","t":0,"p":[0,0.2]}');
    rec.capture('{"type":"hand","t":0,"p":[0,0.2,0.02]}');
    const text = rec.stop();
    expect(rec.count).toBe(3);
    const back = parseRecording(text);
    expect(back.map((m) => m.doc)).toEqual([
      SCENE,
      '{"type":"gaze","t":0,"p":[0,0.2]}',
      '{"type":"hand","t":0,"p":[0,0.2,0.02]}',
    ]);
  });

  it("filters out handshake chatter", () => {
    const rec = new Recorder();
    rec.start();
    rec.capture('{"type":"hello","proto":1}');
    rec.capture('{"type":"hand","t":0,"p":[0,0.2,0.02]}');
    expect(rec.count).toBe(1);
  });

  it("ignores captures while stopped and clears on restart", () => {
    const rec = new Recorder();
    rec.capture('{"type":"hand","t":0,"p":[0,0.2,0.02]}');
    expect(rec.count).toBe(0);
    rec.start();
    rec.capture('{"type":"hand","t":0,"p":[0,0.2,0.02]}');
    rec.stop();
    rec.start();
    expect(rec.count).toBe(0);
    expect(rec.toJsonl()).toBe("");
  });
});
