// Websocket plumbing with reconnect. The socket constructor is injected so
// tests (and the node e2e harness) can supply their own implementation.

import { Session } from "./session.js";
import { FrameMessage } from "./protocol.js";

export interface SocketLike {
  binaryType: string;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: ArrayBuffer | unknown }) => void) | null;
  send(data: string): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientOptions {
  makeSocket: SocketFactory;
  onFrame: (frame: FrameMessage) => void;
  onStatus?: () => void;
  reconnectDelayMs?: number;
}

export class ViewerClient {
  readonly session: Session;
  private url: string;
  private opts: ClientOptions;
  private socket: SocketLike | null = null;
  private closed = false;
  private pending: Promise<void> = Promise.resolve();

  constructor(url: string, session: Session, opts: ClientOptions) {
    this.url = url;
    this.session = session;
    this.opts = opts;
  }

  connect(): void {
    this.closed = false;
    this.session.setStatus("connecting");
    this.opts.onStatus?.();
    const socket = this.opts.makeSocket(this.url);
    this.socket = socket;
    socket.binaryType = "arraybuffer";
    socket.onopen = () => {
      this.session.setStatus("connected");
      this.opts.onStatus?.();
    };
    socket.onerror = () => {
      this.session.setStatus("error", "connection failed");
      this.opts.onStatus?.();
    };
    socket.onclose = () => {
      if (!this.closed) {
        this.session.setStatus(this.session.status === "error" ? "error" : "closed");
        this.opts.onStatus?.();
        const delay = this.opts.reconnectDelayMs;
        if (delay !== undefined && delay >= 0) {
          setTimeout(() => {
            if (!this.closed) {
              this.connect();
            }
          }, delay);
        }
      }
    };
    socket.onmessage = (ev) => {
      if (!(ev.data instanceof ArrayBuffer)) {
        return; // input echoes or text are not frames
      }
      // Decode strictly in arrival order; frames decode asynchronously.
      this.pending = this.pending.then(async () => {
        const frame = await this.session.handleMessage(ev.data as ArrayBuffer);
        if (frame) {
          this.opts.onFrame(frame);
        }
      });
    };
  }

  send(payload: string): void {
    if (this.session.status === "connected" && this.socket) {
      this.socket.send(payload);
    }
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }

  /** Resolves after all received messages so far have been decoded. */
  flush(): Promise<void> {
    return this.pending;
  }
}
