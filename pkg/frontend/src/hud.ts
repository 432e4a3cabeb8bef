// HUD formatting, kept DOM-free so tests can assert on the lines.

import { HudState } from "./session.js";

export function hudLines(s: HudState): string[] {
  const toggles = Object.entries(s.toggles)
    .map(([name, on]) => `${name}:${on ? "on" : "off"}`)
    .join("  ");
  return [
    `status ${s.status}${s.dropped ? `  dropped ${s.dropped}` : ""}`,
    `frame ${s.frameIndex}  fps ${s.fps.toFixed(1)}  server ${s.frameMs.toFixed(1)} ms`,
    `passes ${s.passCount}  fragments ${s.fragments}`,
    `space ${s.space}  view ${s.eyeView}`,
    toggles,
    "WASD move  mouse look  1 box  2 stencil  3 instanced  4 mask  5 freeze-L  V view  R respawn",
  ];
}

export function renderHud(el: HTMLElement, s: HudState): void {
  el.textContent = hudLines(s).join("\n");
}
