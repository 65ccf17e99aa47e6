/**
 * Recording and deterministic replay of the outgoing message stream.
 *
 * A recording is JSONL of client protocol documents exactly as they
 * were sent: an optional scene line, then interleaved gaze and hand
 * lines. Replay paces messages by their own embedded stamps but never
 * reorders or drops them, so the same file always produces the same
 * message sequence, and a deterministic server then produces the same
 * posterior sequence.
 */

const REPLAYABLE = new Set(["scene", "hand", "gaze", "reset"]);

export interface ReplayMessage {
  /** the original line, replayed byte-for-byte */
  doc: string;
  /** pacing stamp; null sends with the following timed message */
  t: number | null;
}

export function parseRecording(text: string): ReplayMessage[] {
  const out: ReplayMessage[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) {
      continue;
    }
    let msg: unknown;
    try {
      msg = JSON.parse(line);
    } catch {
      throw new Error(`recording line ${i + 1} is not JSON`);
    }
    if (typeof msg !== "object" || msg === null || Array.isArray(msg)) {
      throw new Error(`recording line ${i + 1} is not an object`);
    }
    const type = (msg as Record<string, unknown>).type;
    if (typeof type !== "string" || !REPLAYABLE.has(type)) {
      throw new Error(`recording line ${i + 1} has unsupported type ${String(type)}`);
    }
    let t: number | null = null;
    if (type === "hand" || type === "gaze") {
      const stamp = (msg as Record<string, unknown>).t;
      if (typeof stamp !== "number" || !Number.isFinite(stamp)) {
        throw new Error(`recording line ${i + 1} is missing its stamp`);
      }
      t = stamp;
    }
    out.push({ doc: line, t });
  }
  return out;
}

export class Replayer {
  private idx = 0;
  private startMs: number | null = null;
  private t0 = 0;

  constructor(private messages: ReplayMessage[]) {}

  get done(): boolean {
    return this.idx >= this.messages.length;
  }

  get total(): number {
    return this.messages.length;
  }

  get position(): number {
    return this.idx;
  }

  /**
   * All messages due by now, in file order. The first call starts the
   * replay clock at the first timed stamp in the file.
   */
  due(nowMs: number): string[] {
    if (this.done) {
      return [];
    }
    if (this.startMs === null) {
      this.startMs = nowMs;
      const firstTimed = this.messages.find((m) => m.t !== null);
      this.t0 = firstTimed?.t ?? 0;
    }
    const clock = this.t0 + (nowMs - this.startMs) / 1000;
    const out: string[] = [];
    while (this.idx < this.messages.length) {
      const m = this.messages[this.idx];
      if (m.t !== null && m.t > clock) {
        break;
      }
      out.push(m.doc);
      this.idx++;
    }
    return out;
  }
}

/** Captures outgoing documents while active; hello lines are not part of a stream. */
export class Recorder {
  private lines: string[] = [];
  active = false;

  start(): void {
    this.lines = [];
    this.active = true;
  }

  capture(doc: string): void {
    if (!this.active) {
      return;
    }
    try {
      const msg = JSON.parse(doc) as { type?: unknown };
      if (typeof msg.type === "string" && REPLAYABLE.has(msg.type)) {
        this.lines.push(doc);
      }
    } catch {
      // outgoing docs are always JSON; ignore anything else
    }
  }

  get count(): number {
    return this.lines.length;
  }

  stop(): string {
    this.active = false;
    return this.toJsonl();
  }

  toJsonl(): string {
    return this.lines.length ? this.lines.join("\n") + "\n" : "";
  }
}
