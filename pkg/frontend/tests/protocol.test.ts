import { describe, expect, it } from "vitest";

import {
  LineSplitter,
  ProtocolError,
  decodeWeights,
  gazeDoc,
  handDoc,
  helloDoc,
  parseServerMsg,
  resetDoc,
  sceneDoc,
} from "../src/protocol.js";
import { b64, decisionLine, makeGrid, posteriorLine, readyLine } from "./helpers.js";

describe("client documents", () => {
  it("greets with the protocol version", () => {
    expect(helloDoc()).toBe('{"type":"hello","proto":1}');
  });

  it("encodes hand and gaze samples", () => {
    expect(handDoc(0.5, [0.1, 0.2, 0.02])).toBe('{"type":"hand","t":0.5,"p":[0.1,0.2,0.02]}');
    expect(gazeDoc(0.5, [0.1, 0.2])).toBe('{"type":"gaze","t":0.5,"p":[0.1,0.2]}');
    expect(resetDoc()).toBe('{"type":"reset"}');
  });

  it("encodes a scene the server layout understands", () => {
    const doc = JSON.parse(
      sceneDoc([{ id: 3, position: [0.1, 0.4], extent: 0.05 }], [0.5, 0.1, 0]),
    );
    expect(doc).toEqual({
      type: "scene",
      objects: [{ id: 3, position: [0.1, 0.4], extent: 0.05 }],
      box: [0.5, 0.1, 0],
    });
    expect(JSON.parse(sceneDoc([])).box).toBeNull();
  });
});

describe("parseServerMsg", () => {
  const grid = makeGrid(4, 3, [0, 0], 0.1);

  it("parses ready with grid metadata", () => {
    const msg = parseServerMsg(readyLine(grid));
    expect(msg).toEqual({ type: "ready", grid });
  });

  it("parses posterior weights byte for byte", () => {
    const weights = new Uint8Array([0, 128, 255, 7, 0, 0, 0, 0, 0, 0, 0, 1]);
    const msg = parseServerMsg(posteriorLine(1.25, weights));
    expect(msg.type).toBe("posterior");
    if (msg.type === "posterior") {
      expect(msg.t).toBe(1.25);
      expect(Array.from(msg.weights)).toEqual(Array.from(weights));
    }
  });

  it("parses decisions and keeps probabilities in [0, 1]", () => {
    const msg = parseServerMsg(decisionLine({ "0": 0.25, "3": 1.0000000001 }, 3, 4.2));
    expect(msg.type).toBe("decision");
    if (msg.type === "decision") {
      expect(msg.objectProbs["0"]).toBe(0.25);
      expect(msg.objectProbs["3"]).toBe(1);
      expect(msg.safeObject).toBe(3);
      expect(msg.latencyMs).toBe(4.2);
    }
  });

  it("accepts a null safe object", () => {
    const msg = parseServerMsg(decisionLine({}, null));
    if (msg.type === "decision") {
      expect(msg.safeObject).toBeNull();
    }
  });

  it("parses server errors", () => {
    const msg = parseServerMsg('{"type":"error","code":"proto_mismatch","detail":"server speaks proto 1"}');
    expect(msg).toEqual({ type: "error", code: "proto_mismatch", detail: "server speaks proto 1" });
  });

  it.each([
    ["not json at all", "bad_json"],
    ["[1,2]", "bad_message"],
    ['{"no_type":1}', "unknown_type"],
    ['{"type":"surprise"}', "unknown_type"],
    ['{"type":"posterior","t":"soon","weights_u8":""}', "bad_field"],
    ['{"type":"posterior","t":1,"weights_u8":42}', "bad_field"],
    ['{"type":"posterior","t":1,"weights_u8":"@@@@"}', "bad_field"],
    ['{"type":"ready","grid":{"nx":0,"ny":3,"origin":[0,0],"cell_size":0.1}}', "bad_field"],
    ['{"type":"ready","grid":{"nx":4,"ny":3,"origin":[0],"cell_size":0.1}}', "bad_field"],
    ['{"type":"ready"}', "bad_field"],
    ['{"type":"decision","object_probs":{"0":1.7},"safe_object":null,"latency_ms":1}', "bad_field"],
    ['{"type":"decision","object_probs":{"0":-0.2},"safe_object":null,"latency_ms":1}', "bad_field"],
    ['{"type":"decision","object_probs":{"0":0.5},"safe_object":"zero","latency_ms":1}', "bad_field"],
    ['{"type":"decision","object_probs":[0.5],"safe_object":null,"latency_ms":1}', "bad_field"],
    ['{"type":"error","code":7}', "bad_field"],
  ])("rejects %s", (doc, code) => {
    try {
      parseServerMsg(doc);
      expect.unreachable("should have thrown");
    } catch (err) {
      expect(err).toBeInstanceOf(ProtocolError);
      expect((err as ProtocolError).code).toBe(code);
    }
  });
});

describe("decodeWeights", () => {
  it("round trips arbitrary bytes", () => {
    const bytes = new Uint8Array(256);
    for (let i = 0; i < 256; i++) {
      bytes[i] = i;
    }
    expect(Array.from(decodeWeights(b64(bytes)))).toEqual(Array.from(bytes));
  });
});

describe("LineSplitter", () => {
  it("reassembles documents across arbitrary chunk boundaries", () => {
    const splitter = new LineSplitter();
    const docs: string[] = [];
    for (const chunk of ['{"a":', '1}\n{"b":2}\n{"c"', ':3}\n']) {
      docs.push(...splitter.push(chunk));
    }
    expect(docs).toEqual(['{"a":1}', '{"b":2}', '{"c":3}']);
    expect(splitter.flush()).toBe("");
  });

  it("holds a trailing partial line and skips blanks", () => {
    const splitter = new LineSplitter();
    expect(splitter.push('\n\n{"a":1}\n{"b"')).toEqual(['{"a":1}']);
    expect(splitter.flush()).toBe('{"b"');
  });
});
