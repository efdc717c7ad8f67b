// Crop-rectangle math for the drag gesture. Coordinates are image pixels.

import type { BoxTuple } from "./types.js";

export interface CropRect {
  x: number;
  y: number;
  w: number;
  h: number;
}

/** Normalize a drag (any corner order) into a positive-size rectangle. */
export function rectFromDrag(x0: number, y0: number, x1: number, y1: number): CropRect {
  const x = Math.min(x0, x1);
  const y = Math.min(y0, y1);
  return { x, y, w: Math.abs(x1 - x0), h: Math.abs(y1 - y0) };
}

/** Clamp to image bounds; degenerate input collapses to zero area. */
export function clampRect(rect: CropRect, width: number, height: number): CropRect {
  const x = Math.min(Math.max(rect.x, 0), width);
  const y = Math.min(Math.max(rect.y, 0), height);
  return {
    x,
    y,
    w: Math.min(rect.w, width - x),
    h: Math.min(rect.h, height - y),
  };
}

export function isZeroArea(rect: CropRect): boolean {
  return rect.w <= 0 || rect.h <= 0;
}

export function isFullImage(rect: CropRect, width: number, height: number): boolean {
  return rect.x === 0 && rect.y === 0 && rect.w === width && rect.h === height;
}

export function toCropBox(rect: CropRect): BoxTuple {
  return [rect.x, rect.y, rect.w, rect.h];
}
