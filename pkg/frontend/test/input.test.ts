import { describe, expect, it } from "vitest";

import { InputCapture } from "../src/input.js";

function capture() {
  const sent: { kind: string; [k: string]: unknown }[] = [];
  const input = new InputCapture((payload) => sent.push(JSON.parse(payload)));
  return { input, sent };
}

describe("InputCapture", () => {
  it("maps W to a unit forward move and emits on change only", () => {
    const { input, sent } = capture();
    input.keyDown("KeyW");
    input.keyDown("KeyW"); // repeat: no change
    expect(sent).toHaveLength(1);
    expect(sent[0]).toMatchObject({ kind: "move", x: 0, y: 1 });
    input.keyUp("KeyW");
    expect(sent[1]).toMatchObject({ kind: "move", x: 0, y: 0 });
  });

  it("normalizes diagonals to magnitude one", () => {
    const { input, sent } = capture();
    input.keyDown("KeyW");
    input.keyDown("KeyD");
    const last = sent[sent.length - 1] as { x: number; y: number };
    expect(Math.hypot(last.x, last.y)).toBeCloseTo(1, 12);
    expect(last.x).toBeGreaterThan(0);
  });

  it("sends look deltas only while pointer is locked, move regardless", () => {
    const { input, sent } = capture();
    input.mouseDelta(10, 0);
    expect(sent).toHaveLength(0);
    input.setPointerLocked(true);
    input.mouseDelta(10, 0);
    expect(sent[0]).toMatchObject({ kind: "look" });
    input.setPointerLocked(false); // pointer capture lost
    input.mouseDelta(10, 0);
    input.keyDown("KeyA");
    expect(sent.filter((e) => e.kind === "look")).toHaveLength(1);
    expect(sent.filter((e) => e.kind === "move")).toHaveLength(1);
  });

  it("number keys send toggles, R respawns", () => {
    const { input, sent } = capture();
    input.keyDown("Digit1");
    input.keyDown("Digit2");
    input.keyDown("Digit3");
    input.keyDown("Digit4");
    input.keyDown("KeyR");
    expect(sent.map((e) => e.kind)).toEqual(["toggle", "toggle", "toggle", "toggle", "respawn"]);
    expect(sent.slice(0, 4).map((e) => e.name)).toEqual([
      "portal-box", "stencil", "instanced", "hidden-area",
    ]);
  });

  it("V cycles the eye view without sending anything", () => {
    const { input, sent } = capture();
    let cycles = 0;
    input.onEyeCycle = () => cycles++;
    input.keyDown("KeyV");
    expect(cycles).toBe(1);
    expect(sent).toHaveLength(0);
  });

  it("ignores unrelated keys", () => {
    const { input, sent } = capture();
    input.keyDown("KeyQ");
    input.keyDown("Space");
    expect(sent).toHaveLength(0);
  });
});
