import { describe, expect, it } from "vitest";

import { hudLines } from "../src/hud.js";
import { Session } from "../src/session.js";
import { encodeFrameForTest, nodeInflate, testMetrics } from "./helpers.js";

function frameBuf(index: number, space = 1) {
  const rgba = new Uint8Array(8 * 4 * 4).fill(index & 0xff);
  return encodeFrameForTest(index, 8, 4, rgba, { ...testMetrics(space), frame: index });
}

describe("Session", () => {
  it("tracks the latest frame and keeps indices increasing", async () => {
    const s = new Session(nodeInflate, () => 0);
    const seen: number[] = [];
    for (let i = 0; i < 100; i++) {
      const f = await s.handleMessage(frameBuf(i));
      seen.push(f!.frameIndex);
    }
    expect(seen).toEqual([...Array(100).keys()]);
    expect(s.framesReceived).toBe(100);
    expect(s.hud().frameIndex).toBe(99);
  });

  it("drops malformed frames and counts them", async () => {
    const s = new Session(nodeInflate, () => 0);
    const bad = frameBuf(0).slice(0, 25);
    expect(await s.handleMessage(bad)).toBeNull();
    expect(s.droppedFrames).toBe(1);
    expect(s.latest).toBeNull();
    const ok = await s.handleMessage(frameBuf(1));
    expect(ok).not.toBeNull();
    expect(s.hud().dropped).toBe(1);
  });

  it("estimates fps from arrival times", async () => {
    let t = 0;
    const s = new Session(nodeInflate, () => t);
    for (let i = 0; i < 10; i++) {
      t = i * 50; // 20 fps
      await s.handleMessage(frameBuf(i));
    }
    expect(s.fps).toBeCloseTo(20, 1);
  });

  it("cycles eye views", () => {
    const s = new Session(nodeInflate);
    expect(s.eyeView).toBe("side-by-side");
    expect(s.cycleEyeView()).toBe("left");
    expect(s.cycleEyeView()).toBe("right");
    expect(s.cycleEyeView()).toBe("side-by-side");
  });

  it("reflects server toggles and space on the HUD", async () => {
    const s = new Session(nodeInflate, () => 0);
    await s.handleMessage(frameBuf(0, 3));
    s.setStatus("connected");
    const lines = hudLines(s.hud());
    expect(lines[0]).toContain("connected");
    expect(lines[3]).toContain("space 3");
    expect(lines[4]).toContain("portal-box:on");
  });
});
