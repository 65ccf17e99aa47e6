/**
 * Affine map between the table workspace (meters, y pointing away from
 * the seated human) and canvas pixels (y pointing down). The workspace
 * rectangle fills the canvas exactly, so its corners land on the canvas
 * corners and the near table edge sits at the bottom of the screen.
 */

import type { GridMeta } from "./protocol.js";

export interface WorkspaceRect {
  x0: number;
  y0: number;
  width: number;
  height: number;
}

export function workspaceFromGrid(grid: GridMeta): WorkspaceRect {
  return {
    x0: grid.origin[0],
    y0: grid.origin[1],
    width: grid.nx * grid.cellSize,
    height: grid.ny * grid.cellSize,
  };
}

export class Viewport {
  constructor(
    readonly rect: WorkspaceRect,
    readonly canvasWidth: number,
    readonly canvasHeight: number,
  ) {
    if (rect.width <= 0 || rect.height <= 0) {
      throw new Error("workspace rectangle must have positive extent");
    }
    if (canvasWidth <= 0 || canvasHeight <= 0) {
      throw new Error("canvas must have positive size");
    }
  }

  toCanvas(x: number, y: number): [number, number] {
    const u = (x - this.rect.x0) / this.rect.width;
    const v = (y - this.rect.y0) / this.rect.height;
    return [u * this.canvasWidth, (1 - v) * this.canvasHeight];
  }

  toWorkspace(px: number, py: number): [number, number] {
    const u = px / this.canvasWidth;
    const v = 1 - py / this.canvasHeight;
    return [this.rect.x0 + u * this.rect.width, this.rect.y0 + v * this.rect.height];
  }

  contains(px: number, py: number): boolean {
    return px >= 0 && px <= this.canvasWidth && py >= 0 && py <= this.canvasHeight;
  }
}

/**
 * Worst-case workspace -> canvas -> workspace error over the four grid
 * corners, in cells. Must stay at or below 0.5 for the heat map and the
 * pointer to agree about where things are.
 */
export function cornerRoundTripCells(vp: Viewport, grid: GridMeta): number {
  const xs = [grid.origin[0], grid.origin[0] + grid.nx * grid.cellSize];
  const ys = [grid.origin[1], grid.origin[1] + grid.ny * grid.cellSize];
  let worst = 0;
  for (const x of xs) {
    for (const y of ys) {
      const [px, py] = vp.toCanvas(x, y);
      const [bx, by] = vp.toWorkspace(px, py);
      const err = Math.hypot(bx - x, by - y) / grid.cellSize;
      if (err > worst) {
        worst = err;
      }
    }
  }
  return worst;
}
