/**
 * Client side of the streaming session protocol: newline- or
 * frame-delimited JSON documents, one object per message.
 *
 * Client to server: hello, scene, hand, gaze, reset.
 * Server to client: ready, posterior, decision, error.
 *
 * Posterior weights arrive base64-encoded, one byte per grid cell with
 * the maximum cell scaled to 255. Everything here is transport-free so
 * the same code runs in the browser (WebSocket) and in node (TCP).
 */

export const PROTO_VERSION = 1;

export class ProtocolError extends Error {
  readonly code: string;

  constructor(code: string, detail: string) {
    super(`${code}: ${detail}`);
    this.code = code;
  }
}

export interface GridMeta {
  nx: number;
  ny: number;
  origin: [number, number];
  cellSize: number;
}

export interface ReadyMsg {
  type: "ready";
  grid: GridMeta;
}

export interface PosteriorMsg {
  type: "posterior";
  t: number;
  weights: Uint8Array;
}

export interface DecisionMsg {
  type: "decision";
  objectProbs: Record<string, number>;
  safeObject: number | null;
  latencyMs: number;
}

export interface ServerErrorMsg {
  type: "error";
  code: string;
  detail: string;
}

export type ServerMsg = ReadyMsg | PosteriorMsg | DecisionMsg | ServerErrorMsg;

function finiteNumber(v: unknown, what: string): number {
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new ProtocolError("bad_field", `${what} must be a finite number`);
  }
  return v;
}

function positiveInt(v: unknown, what: string): number {
  const n = finiteNumber(v, what);
  if (!Number.isInteger(n) || n <= 0) {
    throw new ProtocolError("bad_field", `${what} must be a positive integer`);
  }
  return n;
}

export function decodeWeights(b64: string): Uint8Array {
  let binary: string;
  try {
    binary = atob(b64);
  } catch {
    throw new ProtocolError("bad_field", "weights_u8 is not valid base64");
  }
  const out = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) {
    out[i] = binary.charCodeAt(i);
  }
  return out;
}

function parseGrid(raw: unknown): GridMeta {
  if (typeof raw !== "object" || raw === null) {
    throw new ProtocolError("bad_field", "ready is missing grid metadata");
  }
  const g = raw as Record<string, unknown>;
  const origin = g.origin;
  if (!Array.isArray(origin) || origin.length !== 2) {
    throw new ProtocolError("bad_field", "grid origin must be [x, y]");
  }
  const cellSize = finiteNumber(g.cell_size, "grid cell_size");
  if (cellSize <= 0) {
    throw new ProtocolError("bad_field", "grid cell_size must be positive");
  }
  return {
    nx: positiveInt(g.nx, "grid nx"),
    ny: positiveInt(g.ny, "grid ny"),
    origin: [
      finiteNumber(origin[0], "grid origin x"),
      finiteNumber(origin[1], "grid origin y"),
    ],
    cellSize,
  };
}

// Marginal per-object masses; each must already be a probability.
// A hair over 1 from float round-off is clamped, anything worse is a
// protocol violation.
function parseProbs(raw: unknown): Record<string, number> {
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new ProtocolError("bad_field", "object_probs must be an object");
  }
  const out: Record<string, number> = {};
  for (const [key, value] of Object.entries(raw as Record<string, unknown>)) {
    const p = finiteNumber(value, `object_probs[${key}]`);
    if (p < -1e-9 || p > 1 + 1e-9) {
      throw new ProtocolError(
        "bad_field",
        `object_probs[${key}] = ${p} is not a probability`,
      );
    }
    out[key] = Math.min(1, Math.max(0, p));
  }
  return out;
}

export function parseServerMsg(doc: string): ServerMsg {
  let raw: unknown;
  try {
    raw = JSON.parse(doc);
  } catch {
    throw new ProtocolError("bad_json", "server sent unparseable JSON");
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new ProtocolError("bad_message", "expected a JSON object");
  }
  const msg = raw as Record<string, unknown>;
  switch (msg.type) {
    case "ready":
      return { type: "ready", grid: parseGrid(msg.grid) };
    case "posterior": {
      const t = finiteNumber(msg.t, "posterior t");
      if (typeof msg.weights_u8 !== "string") {
        throw new ProtocolError("bad_field", "weights_u8 must be a string");
      }
      return { type: "posterior", t, weights: decodeWeights(msg.weights_u8) };
    }
    case "decision": {
      const safe = msg.safe_object;
      if (safe !== null && (typeof safe !== "number" || !Number.isInteger(safe))) {
        throw new ProtocolError("bad_field", "safe_object must be an id or null");
      }
      return {
        type: "decision",
        objectProbs: parseProbs(msg.object_probs),
        safeObject: safe as number | null,
        latencyMs: finiteNumber(msg.latency_ms, "latency_ms"),
      };
    }
    case "error": {
      if (typeof msg.code !== "string") {
        throw new ProtocolError("bad_field", "error code must be a string");
      }
      return {
        type: "error",
        code: msg.code,
        detail: typeof msg.detail === "string" ? msg.detail : "",
      };
    }
    default:
      throw new ProtocolError("unknown_type", String(msg.type));
  }
}

export function helloDoc(): string {
  return JSON.stringify({ type: "hello", proto: PROTO_VERSION });
}

export function handDoc(t: number, p: [number, number, number]): string {
  return JSON.stringify({ type: "hand", t, p });
}

export function gazeDoc(t: number, p: [number, number]): string {
  return JSON.stringify({ type: "gaze", t, p });
}

export function resetDoc(): string {
  return JSON.stringify({ type: "reset" });
}

export interface SceneObjectSpec {
  id: number;
  position: [number, number] | [number, number, number];
  extent?: number;
  confidence?: number;
}

export function sceneDoc(
  objects: SceneObjectSpec[],
  box: [number, number, number] | null = null,
): string {
  return JSON.stringify({ type: "scene", objects, box });
}

/** Reassembles newline-delimited documents from arbitrary stream chunks. */
export class LineSplitter {
  private tail = "";

  push(chunk: string): string[] {
    const parts = (this.tail + chunk).split("\n");
    this.tail = parts.pop() ?? "";
    return parts.filter((p) => p.trim().length > 0);
  }

  /** Anything buffered after the stream ended; normally empty. */
  flush(): string {
    const rest = this.tail;
    this.tail = "";
    return rest.trim();
  }
}
