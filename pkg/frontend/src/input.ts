// WASD + pointer-lock input capture.
//
// Key state folds into one movement vector; a move event goes out whenever
// the vector changes (the server holds it between events). Look deltas are
// sent per mouse move and coalesced per tick server-side. Number keys flip
// render toggles. Losing pointer lock stops look input but held movement
// keys keep working.

import { lookEvent, moveEvent, respawnEvent, toggleEvent, ToggleName } from "./protocol.js";

const LOOK_SENSITIVITY = 0.0026; // radians per pixel

const TOGGLE_KEYS: Record<string, ToggleName> = {
  Digit1: "portal-box",
  Digit2: "stencil",
  Digit3: "instanced",
  Digit4: "hidden-area",
  Digit5: "freeze-left-eye-debug",
};

export type SendFn = (payload: string) => void;

export class InputCapture {
  private held = new Set<string>();
  private send: SendFn;
  private pointerLocked = false;
  private lastMove: [number, number] = [0, 0];
  onEyeCycle: () => void = () => {};

  constructor(send: SendFn) {
    this.send = send;
  }

  /** Current normalized move vector: [strafe +right, forward +ahead]. */
  moveVector(): [number, number] {
    let x = 0;
    let y = 0;
    if (this.held.has("KeyW")) y += 1;
    if (this.held.has("KeyS")) y -= 1;
    if (this.held.has("KeyD")) x += 1;
    if (this.held.has("KeyA")) x -= 1;
    const mag = Math.hypot(x, y);
    return mag > 1 ? [x / mag, y / mag] : [x, y];
  }

  keyDown(code: string): void {
    if (code in TOGGLE_KEYS) {
      this.send(toggleEvent(TOGGLE_KEYS[code]));
      return;
    }
    if (code === "KeyR") {
      this.send(respawnEvent());
      return;
    }
    if (code === "KeyV") {
      this.onEyeCycle();
      return;
    }
    if (!["KeyW", "KeyA", "KeyS", "KeyD"].includes(code)) {
      return;
    }
    this.held.add(code);
    this.emitMoveIfChanged();
  }

  keyUp(code: string): void {
    if (this.held.delete(code)) {
      this.emitMoveIfChanged();
    }
  }

  mouseDelta(dx: number, dy: number): void {
    if (!this.pointerLocked) {
      return;
    }
    // Positive yaw turns left; dragging right looks right.
    this.send(lookEvent(-dx * LOOK_SENSITIVITY, -dy * LOOK_SENSITIVITY));
  }

  setPointerLocked(locked: boolean): void {
    this.pointerLocked = locked;
  }

  private emitMoveIfChanged(): void {
    const [x, y] = this.moveVector();
    if (x !== this.lastMove[0] || y !== this.lastMove[1]) {
      this.lastMove = [x, y];
      this.send(moveEvent(x, y));
    }
  }

  /** Wire the DOM: call once the canvas exists. */
  attach(canvas: HTMLElement, doc: Document): void {
    doc.addEventListener("keydown", (e) => {
      if (!e.repeat) {
        this.keyDown(e.code);
      }
    });
    doc.addEventListener("keyup", (e) => this.keyUp(e.code));
    canvas.addEventListener("click", () => canvas.requestPointerLock());
    doc.addEventListener("pointerlockchange", () => {
      this.setPointerLocked(doc.pointerLockElement === canvas);
    });
    doc.addEventListener("mousemove", (e) => this.mouseDelta(e.movementX, e.movementY));
  }
}
