import type { RenderedOverlay } from "./overlay.js";

/** Blit a rendered overlay onto a canvas sized to the viewport. The overlay
 * pixels are already top-down RGBA, so this is a plain putImageData plus a
 * scale to the canvas box. */
export function drawOverlay(canvas: HTMLCanvasElement, overlay: RenderedOverlay): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas has no 2d context");
  const tile = new ImageData(overlay.data, overlay.width, overlay.height);
  createImageBitmap(tile).then((bitmap) => {
    ctx.imageSmoothingEnabled = true;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.drawImage(bitmap, 0, 0, canvas.width, canvas.height);
  });
}
