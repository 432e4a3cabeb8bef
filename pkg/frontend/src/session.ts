// Connection-independent session state: everything the HUD shows, plus
// frame bookkeeping. The network layer feeds raw message buffers in;
// decode failures are counted and dropped, never rendered.

import { decodeFrame, FrameMessage, Inflate, ProtocolError } from "./protocol.js";

export type ConnectionStatus = "idle" | "connecting" | "connected" | "error" | "closed";
export type EyeView = "side-by-side" | "left" | "right";

const EYE_VIEWS: EyeView[] = ["side-by-side", "left", "right"];

export interface HudState {
  status: ConnectionStatus;
  frameIndex: number;
  fps: number;
  passCount: number;
  fragments: number;
  frameMs: number;
  space: number;
  eyeView: EyeView;
  toggles: Record<string, boolean>;
  dropped: number;
}

export class Session {
  status: ConnectionStatus = "idle";
  lastError = "";
  latest: FrameMessage | null = null;
  framesReceived = 0;
  droppedFrames = 0;
  eyeView: EyeView = "side-by-side";

  private inflate: Inflate;
  private arrivals: number[] = [];
  private now: () => number;

  constructor(inflate: Inflate, now: () => number = () => performance.now()) {
    this.inflate = inflate;
    this.now = now;
  }

  setStatus(status: ConnectionStatus, error = ""): void {
    this.status = status;
    this.lastError = error;
  }

  cycleEyeView(): EyeView {
    const i = EYE_VIEWS.indexOf(this.eyeView);
    this.eyeView = EYE_VIEWS[(i + 1) % EYE_VIEWS.length];
    return this.eyeView;
  }

  /** Decode one incoming binary message; returns null for dropped frames. */
  async handleMessage(buffer: ArrayBuffer): Promise<FrameMessage | null> {
    let frame: FrameMessage;
    try {
      frame = await decodeFrame(buffer, this.inflate);
    } catch (e) {
      if (e instanceof ProtocolError) {
        this.droppedFrames += 1;
        return null;
      }
      throw e;
    }
    this.latest = frame;
    this.framesReceived += 1;
    const t = this.now();
    this.arrivals.push(t);
    while (this.arrivals.length > 30) {
      this.arrivals.shift();
    }
    return frame;
  }

  get fps(): number {
    if (this.arrivals.length < 2) {
      return 0;
    }
    const span = this.arrivals[this.arrivals.length - 1] - this.arrivals[0];
    return span > 0 ? ((this.arrivals.length - 1) * 1000) / span : 0;
  }

  hud(): HudState {
    const m = this.latest?.metrics;
    return {
      status: this.status,
      frameIndex: this.latest?.frameIndex ?? -1,
      fps: this.fps,
      passCount: m?.pass_count ?? 0,
      fragments: m?.fragments_shaded ?? 0,
      frameMs: m?.frame_ms ?? 0,
      space: m?.space ?? 0,
      eyeView: this.eyeView,
      toggles: m?.toggles ?? {},
      dropped: this.droppedFrames,
    };
  }
}
