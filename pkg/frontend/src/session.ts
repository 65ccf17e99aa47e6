/**
 * Transport-agnostic protocol session: owns the hello/ready handshake,
 * dispatches server messages, and tracks when each hand stamp was sent
 * so the display latency can be measured at the far end of the pipe.
 *
 * A transport is anything that can send one JSON document and close;
 * incoming documents are fed back through feedDoc. The browser wires a
 * WebSocket to this, tests wire a TCP socket, and both speak the exact
 * same protocol.
 */

import {
  ProtocolError,
  gazeDoc,
  handDoc,
  helloDoc,
  parseServerMsg,
  resetDoc,
} from "./protocol.js";
import type { DecisionMsg, GridMeta, PosteriorMsg } from "./protocol.js";
import type { HandSample } from "./pointer.js";

export type ConnectionState = "idle" | "handshake" | "live" | "closed" | "failed";

export interface Transport {
  sendDoc(doc: string): void;
  close(): void;
}

export interface SessionHooks {
  onReady?(grid: GridMeta): void;
  onPosterior?(msg: PosteriorMsg): void;
  onDecision?(msg: DecisionMsg): void;
  /** error document from the server; the server closes right after */
  onServerError?(code: string, detail: string): void;
  /** the server sent something this client cannot parse */
  onProtocolError?(err: ProtocolError): void;
  onStateChange?(state: ConnectionState): void;
  /** every outgoing document, e.g. for the recorder */
  onSend?(doc: string): void;
}

const SENT_STAMPS_MAX = 512;

export class ProtocolSession {
  state: ConnectionState = "idle";
  grid: GridMeta | null = null;
  private transport: Transport | null = null;
  private sentAt = new Map<number, number>();

  constructor(
    private hooks: SessionHooks = {},
    private now: () => number = () => performance.now(),
  ) {}

  private setState(state: ConnectionState): void {
    if (state !== this.state) {
      this.state = state;
      this.hooks.onStateChange?.(state);
    }
  }

  private sendDoc(doc: string): void {
    this.transport?.sendDoc(doc);
    this.hooks.onSend?.(doc);
  }

  /** Begin a session on an open transport; greets immediately. */
  attach(transport: Transport): void {
    this.transport = transport;
    this.sentAt.clear();
    this.setState("handshake");
    this.sendDoc(helloDoc());
  }

  feedDoc(doc: string): void {
    if (this.state !== "handshake" && this.state !== "live") {
      // a frame already in flight when the session ended; never
      // surface data from a dead connection
      return;
    }
    let msg;
    try {
      msg = parseServerMsg(doc);
    } catch (err) {
      if (err instanceof ProtocolError) {
        this.hooks.onProtocolError?.(err);
        this.fail();
        return;
      }
      throw err;
    }
    if (msg.type === "error") {
      this.hooks.onServerError?.(msg.code, msg.detail);
      this.setState("failed");
      return;
    }
    if (this.state === "handshake") {
      if (msg.type !== "ready") {
        this.hooks.onProtocolError?.(
          new ProtocolError("bad_handshake", `expected ready, got ${msg.type}`),
        );
        this.fail();
        return;
      }
      this.grid = msg.grid;
      this.setState("live");
      this.hooks.onReady?.(msg.grid);
      return;
    }
    if (msg.type === "posterior") {
      this.hooks.onPosterior?.(msg);
    } else if (msg.type === "decision") {
      this.hooks.onDecision?.(msg);
    }
    // a second ready in live state carries nothing new; ignore
  }

  /** The transport saw EOF or an error; the stream pauses. */
  feedClosed(): void {
    this.transport = null;
    if (this.state === "handshake" || this.state === "live") {
      this.setState("closed");
    }
  }

  private fail(): void {
    const t = this.transport;
    this.transport = null;
    this.setState("failed");
    t?.close();
  }

  close(): void {
    const t = this.transport;
    this.transport = null;
    t?.close();
    if (this.state === "handshake" || this.state === "live") {
      this.setState("closed");
    }
  }

  /** Stream one pointer sample: gaze first so the posterior for the same stamp sees it. */
  sendHand(sample: HandSample): void {
    if (this.state !== "live") {
      return;
    }
    this.sentAt.set(sample.t, this.now());
    if (this.sentAt.size > SENT_STAMPS_MAX) {
      const oldest = this.sentAt.keys().next().value as number;
      this.sentAt.delete(oldest);
    }
    this.sendDoc(gazeDoc(sample.t, sample.gaze));
    this.sendDoc(handDoc(sample.t, sample.hand));
  }

  /** Send a prerecorded protocol line verbatim; hand stamps still get timed. */
  sendRecordedDoc(doc: string): void {
    if (this.state !== "live") {
      return;
    }
    try {
      const msg = JSON.parse(doc) as { type?: unknown; t?: unknown };
      if (msg.type === "hand" && typeof msg.t === "number") {
        this.sentAt.set(msg.t, this.now());
        if (this.sentAt.size > SENT_STAMPS_MAX) {
          const oldest = this.sentAt.keys().next().value as number;
          this.sentAt.delete(oldest);
        }
      }
    } catch {
      // the recording parser already rejected junk; forward as-is
    }
    this.sendDoc(doc);
  }

  sendScene(doc: string): void {
    if (this.state === "live") {
      this.sendDoc(doc);
    }
  }

  sendReset(): void {
    if (this.state === "live") {
      this.sentAt.clear();
      this.sendDoc(resetDoc());
    }
  }

  /** Send time of a hand stamp; single use, the entry is dropped on read. */
  takeSentAt(t: number): number | undefined {
    const v = this.sentAt.get(t);
    this.sentAt.delete(t);
    return v;
  }
}
