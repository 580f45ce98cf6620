import type { GridResponse } from "./types.js";

/** Energy 0 maps to green (hue 120), energy 1 to red (hue 0); the hue is
 * linear in energy and saturation/lightness are fixed, so a rendered pixel
 * decodes back to the energy that produced it. */
export function energyColor(e: number): [number, number, number] {
  const hue = 120 * (1 - clamp01(e));
  return hslToRgb(hue, 0.9, 0.45);
}

/** Inverse of energyColor, for spot-check decoding of rendered pixels. */
export function decodeEnergy(r: number, g: number, b: number): number {
  return 1 - rgbToHue(r, g, b) / 120;
}

export interface RenderedOverlay {
  width: number;
  height: number;
  /** RGBA rows top-down (row 0 = north), ready for putImageData. */
  data: Uint8ClampedArray<ArrayBuffer>;
}

/** Rasterize a grid response into translucent RGBA pixels. The server's
 * row 0 is the south edge; canvas rows run top-down, so rows flip here. */
export function renderOverlay(grid: GridResponse, opacity: number): RenderedOverlay {
  const { nx, ny, values } = grid;
  const alpha = Math.round(255 * clamp01(opacity));
  const data = new Uint8ClampedArray(nx * ny * 4);
  for (let row = 0; row < ny; row++) {
    const src = values[ny - 1 - row];
    if (!src) throw new Error(`grid is missing row ${ny - 1 - row}`);
    for (let col = 0; col < nx; col++) {
      const e = src[col];
      if (e === undefined) throw new Error(`grid row is missing column ${col}`);
      const [r, g, b] = energyColor(e);
      const at = (row * nx + col) * 4;
      data[at] = r;
      data[at + 1] = g;
      data[at + 2] = b;
      data[at + 3] = alpha;
    }
  }
  return { width: nx, height: ny, data };
}

function clamp01(v: number): number {
  return Math.min(1, Math.max(0, v));
}

function hslToRgb(hueDeg: number, s: number, l: number): [number, number, number] {
  const c = (1 - Math.abs(2 * l - 1)) * s;
  const hp = hueDeg / 60;
  const x = c * (1 - Math.abs((hp % 2) - 1));
  const [r1, g1, b1] =
    hp < 1 ? [c, x, 0] : hp < 2 ? [x, c, 0] : [0, c, x]; // hues stay in [0, 120]
  const m = l - c / 2;
  return [
    Math.round(255 * (r1 + m)),
    Math.round(255 * (g1 + m)),
    Math.round(255 * (b1 + m)),
  ];
}

function rgbToHue(r: number, g: number, b: number): number {
  const max = Math.max(r, g, b);
  const min = Math.min(r, g, b);
  const c = max - min;
  if (c === 0) return 0;
  let hp: number;
  if (max === r) hp = ((g - b) / c) % 6;
  else if (max === g) hp = (b - r) / c + 2;
  else hp = (r - g) / c + 4;
  const hue = 60 * hp;
  return hue < 0 ? hue + 360 : hue;
}
