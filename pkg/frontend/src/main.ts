/**
 * Browser wiring: the pointer is the hand. Moving over the table view
 * streams hand and synthesized gaze samples to the service; every reply
 * paints the live posterior heat map, per-object reach probabilities,
 * and the robot's anticipated safe pick, which the user's next motion
 * then reacts to.
 */

import { FrameAssembler, FrameSlot } from "./framebuffer.js";
import type { HeatFrame } from "./framebuffer.js";
import { heatPalette } from "./heatmap.js";
import { HandStreamer } from "./pointer.js";
import { sceneDoc } from "./protocol.js";
import type { GridMeta, SceneObjectSpec } from "./protocol.js";
import { parseRecording, Recorder, Replayer } from "./replay.js";
import { ProtocolSession } from "./session.js";
import type { ConnectionState, Transport } from "./session.js";
import { cornerRoundTripCells, Viewport, workspaceFromGrid } from "./viewport.js";

const DEFAULT_URL = "ws://127.0.0.1:8765";
const TICK_MS = 5;

const DEMO_OBJECTS: SceneObjectSpec[] = [
  { id: 0, position: [-0.42, 0.22], extent: 0.05 },
  { id: 1, position: [-0.18, 0.5], extent: 0.05 },
  { id: 2, position: [0.03, 0.28], extent: 0.05 },
  { id: 3, position: [0.22, 0.58], extent: 0.05 },
  { id: 4, position: [0.4, 0.33], extent: 0.05 },
  { id: 5, position: [-0.5, 0.55], extent: 0.05 },
  { id: 6, position: [0.55, 0.14], extent: 0.05 },
  { id: 7, position: [-0.02, 0.64], extent: 0.05 },
];
const DEMO_BOX: [number, number, number] = [0.58, 0.62, 0.0];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing #${id}`);
  }
  return node as T;
}

const canvas = el<HTMLCanvasElement>("table");
const ctx = canvas.getContext("2d")!;
const statusPill = el<HTMLSpanElement>("status");
const urlInput = el<HTMLInputElement>("url");
const connectBtn = el<HTMLButtonElement>("connect");
const resetBtn = el<HTMLButtonElement>("reset");
const banner = el<HTMLDivElement>("banner");
const bannerText = el<HTMLSpanElement>("banner-text");
const retryBtn = el<HTMLButtonElement>("retry");
const decisionLine = el<HTMLDivElement>("decision");
const barsBox = el<HTMLDivElement>("bars");
const latencyLine = el<HTMLDivElement>("latency");
const statsLine = el<HTMLDivElement>("stats");
const recordBtn = el<HTMLButtonElement>("record");
const saveLink = el<HTMLAnchorElement>("save");
const replayFile = el<HTMLInputElement>("replay-file");
const replayBtn = el<HTMLButtonElement>("replay");
const stopBtn = el<HTMLButtonElement>("stop-replay");

const palette = heatPalette();

interface UiState {
  session: ProtocolSession;
  ws: WebSocket | null;
  grid: GridMeta | null;
  viewport: Viewport | null;
  assembler: FrameAssembler | null;
  frame: HeatFrame | null;
  connecting: boolean;
  replayer: Replayer | null;
  recording: Recorder;
  sentHands: number;
  renderedFrames: number;
  fps: number;
}

const slot = new FrameSlot();
const streamer = new HandStreamer();
const latencies: number[] = [];

const heatCanvas = document.createElement("canvas");
const heatCtx = heatCanvas.getContext("2d")!;
let heatImage: ImageData | null = null;

const state: UiState = {
  session: makeSession(),
  ws: null,
  grid: null,
  viewport: null,
  assembler: null,
  frame: null,
  connecting: false,
  replayer: null,
  recording: new Recorder(),
  sentHands: 0,
  renderedFrames: 0,
  fps: 0,
};

function makeSession(): ProtocolSession {
  return new ProtocolSession({
    onReady(grid) {
      state.grid = grid;
      state.viewport = new Viewport(workspaceFromGrid(grid), canvas.width, canvas.height);
      const err = cornerRoundTripCells(state.viewport, grid);
      if (err > 0.5) {
        console.error(`viewport round trip off by ${err.toFixed(3)} cells`);
      }
      state.assembler = new FrameAssembler(
        grid,
        palette,
        (t) => state.session.takeSentAt(t),
      );
      heatCanvas.width = grid.nx;
      heatCanvas.height = grid.ny;
      heatImage = heatCtx.createImageData(grid.nx, grid.ny);
      state.session.sendScene(sceneDoc(DEMO_OBJECTS, DEMO_BOX));
      hideBanner();
    },
    onPosterior(msg) {
      state.assembler?.onPosterior(msg);
    },
    onDecision(msg) {
      const frame = state.assembler?.onDecision(msg) ?? null;
      if (frame) {
        slot.put(frame);
      }
    },
    onServerError(code, detail) {
      showBanner(`server refused the session: ${code}${detail ? ` (${detail})` : ""}`);
    },
    onProtocolError(err) {
      showBanner(`protocol mismatch: ${err.message}`);
    },
    onStateChange(s) {
      onSessionState(s);
    },
    onSend(doc) {
      state.recording.capture(doc);
    },
  });
}

function onSessionState(s: ConnectionState): void {
  statusPill.textContent = s;
  statusPill.dataset.state = s;
  if (s === "closed") {
    // the stream pauses: drop any half-built or unrendered frame so
    // nothing stale gets shown as a live decision
    state.assembler?.clear();
    slot.clear();
    state.frame = null;
    state.replayer = null;
    showBanner("connection lost, stream paused");
  }
}

function showBanner(text: string): void {
  bannerText.textContent = text;
  banner.hidden = false;
}

function hideBanner(): void {
  banner.hidden = true;
}

function connect(): void {
  if (state.connecting || state.session.state === "live") {
    return;
  }
  state.connecting = true;
  statusPill.textContent = "connecting";
  statusPill.dataset.state = "handshake";
  hideBanner();
  let ws: WebSocket;
  try {
    ws = new WebSocket(urlInput.value);
  } catch {
    state.connecting = false;
    showBanner(`bad service url: ${urlInput.value}`);
    return;
  }
  state.ws = ws;
  let opened = false;
  ws.onopen = () => {
    opened = true;
    state.connecting = false;
    const transport: Transport = {
      sendDoc: (doc) => ws.send(doc),
      close: () => ws.close(),
    };
    state.session = makeSession();
    state.session.attach(transport);
  };
  ws.onmessage = (ev) => {
    state.session.feedDoc(String(ev.data));
  };
  ws.onclose = () => {
    state.connecting = false;
    if (!opened) {
      statusPill.textContent = "failed";
      statusPill.dataset.state = "failed";
      showBanner(`service unreachable at ${urlInput.value}`);
      return;
    }
    state.session.feedClosed();
  };
  ws.onerror = () => {
    // onclose carries the outcome
  };
}

canvas.addEventListener("pointermove", (ev) => {
  if (!state.viewport) {
    return;
  }
  const rect = canvas.getBoundingClientRect();
  const px = ((ev.clientX - rect.left) * canvas.width) / rect.width;
  const py = ((ev.clientY - rect.top) * canvas.height) / rect.height;
  const inside = state.viewport.contains(px, py);
  const [x, y] = state.viewport.toWorkspace(px, py);
  streamer.setPointer(x, y, inside);
});
canvas.addEventListener("pointerleave", () => {
  const g = streamer.gazeEstimate();
  if (g) {
    streamer.setPointer(g[0], g[1], false);
  }
});

connectBtn.addEventListener("click", connect);
retryBtn.addEventListener("click", connect);

resetBtn.addEventListener("click", () => {
  state.session.sendReset();
  state.assembler?.clear();
  slot.clear();
  state.frame = null;
  latencies.length = 0;
});

recordBtn.addEventListener("click", () => {
  if (state.recording.active) {
    const jsonl = state.recording.stop();
    recordBtn.textContent = "record";
    if (jsonl) {
      const blob = new Blob([jsonl], { type: "application/jsonl" });
      saveLink.href = URL.createObjectURL(blob);
      saveLink.hidden = false;
    }
  } else {
    state.recording.start();
    // lead with the scene so the file replays against a fresh session
    state.recording.capture(sceneDoc(DEMO_OBJECTS, DEMO_BOX));
    recordBtn.textContent = "stop recording";
    saveLink.hidden = true;
  }
});

replayFile.addEventListener("change", async () => {
  const file = replayFile.files?.[0];
  if (!file) {
    return;
  }
  try {
    const messages = parseRecording(await file.text());
    state.replayer = null;
    replayBtn.disabled = messages.length === 0;
    replayBtn.dataset.count = String(messages.length);
  } catch (err) {
    showBanner(String(err));
    replayBtn.disabled = true;
  }
});

replayBtn.addEventListener("click", async () => {
  const file = replayFile.files?.[0];
  if (!file || state.session.state !== "live") {
    showBanner(file ? "connect before replaying" : "choose a recording first");
    return;
  }
  const messages = parseRecording(await file.text());
  state.session.sendReset();
  state.assembler?.clear();
  slot.clear();
  state.frame = null;
  latencies.length = 0;
  state.replayer = new Replayer(messages);
  stopBtn.disabled = false;
});

stopBtn.addEventListener("click", () => {
  state.replayer = null;
  stopBtn.disabled = true;
  state.session.sendReset();
  state.assembler?.clear();
});

// one loop owns all outgoing traffic: either the replayer or the pointer
setInterval(() => {
  const now = performance.now();
  if (state.session.state !== "live") {
    return;
  }
  if (state.replayer) {
    for (const doc of state.replayer.due(now)) {
      state.session.sendRecordedDoc(doc);
      state.sentHands += doc.includes('"hand"') ? 1 : 0;
    }
    if (state.replayer.done) {
      state.replayer = null;
      stopBtn.disabled = true;
    }
    return;
  }
  const sample = streamer.tick(now);
  if (sample) {
    state.session.sendHand(sample);
    state.sentHands++;
  }
}, TICK_MS);

function percentile(values: number[], q: number): number {
  if (values.length === 0) {
    return 0;
  }
  const sorted = [...values].sort((a, b) => a - b);
  const idx = Math.min(sorted.length - 1, Math.ceil(q * sorted.length) - 1);
  return sorted[Math.max(0, idx)];
}

function drawObjects(frame: HeatFrame | null): void {
  const vp = state.viewport!;
  const scale = canvas.width / vp.rect.width;
  const [bx, by] = vp.toCanvas(DEMO_BOX[0], DEMO_BOX[1]);
  ctx.strokeStyle = "#8b95a8";
  ctx.lineWidth = 1.5;
  ctx.strokeRect(bx - 18, by - 14, 36, 28);
  ctx.fillStyle = "#8b95a8";
  ctx.font = "10px system-ui, sans-serif";
  ctx.fillText("box", bx - 9, by + 3);

  for (const obj of DEMO_OBJECTS) {
    const [px, py] = vp.toCanvas(obj.position[0], obj.position[1]);
    const r = ((obj.extent ?? 0.04) / 2) * scale;
    const prob = frame?.objectProbs[String(obj.id)] ?? 0;
    const safe = frame !== null && frame.safeObject === obj.id;
    ctx.beginPath();
    ctx.arc(px, py, r, 0, 2 * Math.PI);
    ctx.fillStyle = `rgba(255, 255, 255, ${0.25 + 0.6 * prob})`;
    ctx.fill();
    ctx.lineWidth = safe ? 3 : 1;
    ctx.strokeStyle = safe ? "#3ddc84" : "#c8cfdb";
    ctx.stroke();
    if (safe) {
      ctx.beginPath();
      ctx.arc(px, py, r + 5, 0, 2 * Math.PI);
      ctx.stroke();
    }
    ctx.fillStyle = "#e8ecf3";
    ctx.font = "11px system-ui, sans-serif";
    ctx.fillText(`${obj.id}: ${(prob * 100).toFixed(0)}%`, px + r + 4, py - 4);
  }
}

function drawPointer(): void {
  const vp = state.viewport!;
  const g = streamer.gazeEstimate();
  if (g) {
    const [gx, gy] = vp.toCanvas(g[0], g[1]);
    ctx.beginPath();
    ctx.arc(gx, gy, 6, 0, 2 * Math.PI);
    ctx.strokeStyle = "rgba(120, 200, 255, 0.8)";
    ctx.lineWidth = 1.5;
    ctx.stroke();
  }
}

function renderPanel(frame: HeatFrame | null, live: boolean): void {
  if (!live) {
    decisionLine.textContent = "stream paused";
    decisionLine.dataset.tone = "paused";
    barsBox.replaceChildren();
    return;
  }
  if (!frame) {
    decisionLine.textContent = "move the pointer over the table";
    decisionLine.dataset.tone = "idle";
    return;
  }
  if (frame.safeObject === null) {
    decisionLine.textContent = "robot waiting: no object is safely out of your way";
    decisionLine.dataset.tone = "hold";
  } else {
    decisionLine.textContent = `robot picks object ${frame.safeObject}`;
    decisionLine.dataset.tone = "go";
  }
  const rows: HTMLElement[] = [];
  for (const obj of DEMO_OBJECTS) {
    const prob = frame.objectProbs[String(obj.id)] ?? 0;
    const row = document.createElement("div");
    row.className = "bar-row";
    const label = document.createElement("span");
    label.textContent = `obj ${obj.id}`;
    const track = document.createElement("div");
    track.className = "bar-track";
    const fill = document.createElement("div");
    fill.className = "bar-fill";
    fill.style.width = `${(prob * 100).toFixed(1)}%`;
    if (frame.safeObject === obj.id) {
      fill.classList.add("safe");
    }
    track.appendChild(fill);
    const pct = document.createElement("span");
    pct.className = "bar-pct";
    pct.textContent = `${(prob * 100).toFixed(1)}%`;
    row.append(label, track, pct);
    rows.push(row);
  }
  barsBox.replaceChildren(...rows);
}

let fpsWindowStart = performance.now();
let fpsFrames = 0;

function renderLoop(): void {
  const live = state.session.state === "live";
  const fresh = slot.take();
  if (fresh && live) {
    state.frame = fresh;
    if (fresh.displayLatencyMs !== null) {
      latencies.push(fresh.displayLatencyMs);
      if (latencies.length > 240) {
        latencies.splice(0, latencies.length - 240);
      }
    }
  }

  ctx.fillStyle = "#0e121e";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  if (state.viewport && heatImage) {
    if (state.frame) {
      heatImage.data.set(state.frame.pixels);
      heatCtx.putImageData(heatImage, 0, 0);
      ctx.imageSmoothingEnabled = false;
      ctx.globalAlpha = live ? 1 : 0.35;
      ctx.drawImage(heatCanvas, 0, 0, canvas.width, canvas.height);
      ctx.globalAlpha = 1;
    }
    drawObjects(live ? state.frame : null);
    drawPointer();
    if (!live) {
      ctx.fillStyle = "rgba(14, 18, 30, 0.55)";
      ctx.fillRect(0, 0, canvas.width, canvas.height);
      ctx.fillStyle = "#e8ecf3";
      ctx.font = "16px system-ui, sans-serif";
      ctx.textAlign = "center";
      ctx.fillText(
        state.session.state === "idle" ? "connect to start" : "stream paused",
        canvas.width / 2,
        canvas.height / 2,
      );
      ctx.textAlign = "start";
    }
  } else {
    ctx.fillStyle = "#5b6374";
    ctx.font = "15px system-ui, sans-serif";
    ctx.textAlign = "center";
    ctx.fillText("connect to the session service to see the table", canvas.width / 2, canvas.height / 2);
    ctx.textAlign = "start";
  }

  renderPanel(state.frame, live);
  const p50 = percentile(latencies, 0.5);
  const p99 = percentile(latencies, 0.99);
  const server = state.frame?.serverLatencyMs ?? 0;
  latencyLine.textContent = live && latencies.length
    ? `display latency p50 ${p50.toFixed(1)} ms / p99 ${p99.toFixed(1)} ms, server ${server.toFixed(1)} ms`
    : "display latency: waiting for frames";
  statsLine.textContent =
    `${state.fps} fps, ${state.sentHands} hand msgs sent, ` +
    `${state.renderedFrames} frames shown, ${slot.dropped} superseded`;

  state.renderedFrames += fresh && live ? 1 : 0;
  fpsFrames++;
  const now = performance.now();
  if (now - fpsWindowStart >= 1000) {
    state.fps = Math.round((fpsFrames * 1000) / (now - fpsWindowStart));
    fpsFrames = 0;
    fpsWindowStart = now;
  }
  requestAnimationFrame(renderLoop);
}

urlInput.value = DEFAULT_URL;
statusPill.textContent = "idle";
statusPill.dataset.state = "idle";
requestAnimationFrame(renderLoop);
