/**
 * Colorizes a posterior heat map frame. The wire format is one byte per
 * cell with the max cell at 255; bytes index a fixed 256-entry palette
 * directly. No client-side renormalization: what the server scaled is
 * what gets shown, so an all-zero frame is a uniform background.
 */

import { ProtocolError } from "./protocol.js";
import type { GridMeta } from "./protocol.js";

type Rgb = [number, number, number];

// dark table surface up through ember tones to near-white at the peak
const ANCHORS: Array<[number, Rgb]> = [
  [0.0, [14, 18, 30]],
  [0.28, [45, 48, 128]],
  [0.55, [148, 62, 134]],
  [0.8, [244, 146, 58]],
  [1.0, [255, 248, 224]],
];

export function heatPalette(): Uint8Array {
  const lut = new Uint8Array(256 * 3);
  for (let i = 0; i < 256; i++) {
    const x = i / 255;
    let hi = 1;
    while (hi < ANCHORS.length - 1 && ANCHORS[hi][0] < x) {
      hi++;
    }
    const [x0, c0] = ANCHORS[hi - 1];
    const [x1, c1] = ANCHORS[hi];
    const f = (x - x0) / (x1 - x0);
    for (let ch = 0; ch < 3; ch++) {
      lut[i * 3 + ch] = Math.round(c0[ch] + f * (c1[ch] - c0[ch]));
    }
  }
  return lut;
}

/**
 * Fill an RGBA buffer (one pixel per cell) from wire weights. Grid row
 * iy is drawn at image row ny-1-iy: workspace y grows away from the
 * human, canvas y grows downward, so the near table edge ends up at the
 * bottom of the image.
 */
export function rasterize(
  weights: Uint8Array,
  grid: GridMeta,
  palette: Uint8Array,
  out: Uint8ClampedArray,
): void {
  const { nx, ny } = grid;
  if (weights.length !== nx * ny) {
    throw new ProtocolError(
      "size_mismatch",
      `${weights.length} weights for a ${nx}x${ny} grid`,
    );
  }
  if (out.length !== nx * ny * 4) {
    throw new ProtocolError(
      "size_mismatch",
      `pixel buffer holds ${out.length / 4} pixels, need ${nx * ny}`,
    );
  }
  for (let row = 0; row < ny; row++) {
    const iy = ny - 1 - row;
    for (let ix = 0; ix < nx; ix++) {
      const p = weights[iy * nx + ix] * 3;
      const o = (row * nx + ix) * 4;
      out[o] = palette[p];
      out[o + 1] = palette[p + 1];
      out[o + 2] = palette[p + 2];
      out[o + 3] = 255;
    }
  }
}
