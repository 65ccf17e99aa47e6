import type { GridMeta } from "../src/protocol.js";

export function makeGrid(
  nx = 130,
  ny = 70,
  origin: [number, number] = [-0.65, 0.0],
  cellSize = 0.01,
): GridMeta {
  return { nx, ny, origin, cellSize };
}

export function b64(bytes: Uint8Array): string {
  return Buffer.from(bytes).toString("base64");
}

export function readyLine(grid: GridMeta): string {
  return JSON.stringify({
    type: "ready",
    grid: {
      nx: grid.nx,
      ny: grid.ny,
      origin: grid.origin,
      cell_size: grid.cellSize,
    },
  });
}

export function posteriorLine(t: number, weights: Uint8Array): string {
  return JSON.stringify({ type: "posterior", t, weights_u8: b64(weights) });
}

export function decisionLine(
  probs: Record<string, number>,
  safe: number | null,
  latencyMs = 2.5,
): string {
  return JSON.stringify({
    type: "decision",
    object_probs: probs,
    safe_object: safe,
    latency_ms: latencyMs,
  });
}
