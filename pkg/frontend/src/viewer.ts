// Canvas presentation of decoded frames. Pixels are blitted untouched at
// native resolution; the eye selector only changes which columns show.

import { FrameMessage } from "./protocol.js";
import { EyeView } from "./session.js";

export function blit(canvas: HTMLCanvasElement, frame: FrameMessage, view: EyeView): void {
  const half = frame.width / 2;
  const srcX = view === "right" ? half : 0;
  const width = view === "side-by-side" ? frame.width : half;
  if (canvas.width !== width || canvas.height !== frame.height) {
    canvas.width = width;
    canvas.height = frame.height;
  }
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    return;
  }
  // Copy into a plain-ArrayBuffer clamped array (ImageData refuses views
  // that might alias a SharedArrayBuffer).
  const image = new ImageData(new Uint8ClampedArray(frame.rgba), frame.width, frame.height);
  // putImageData with a negative dirty-x crops the left columns away.
  ctx.putImageData(image, -srcX, 0, srcX, 0, width, frame.height);
}
