// Browser entry point: connect to the server that served this page, blit
// frames, capture input, keep the HUD live.

import { ViewerClient } from "./client.js";
import { renderHud } from "./hud.js";
import { InputCapture } from "./input.js";
import { Inflate } from "./protocol.js";
import { Session } from "./session.js";
import { blit } from "./viewer.js";

const browserInflate: Inflate = async (data) => {
  const ds = new DecompressionStream("deflate"); // zlib-wrapped deflate
  const stream = new Blob([data.slice()]).stream().pipeThrough(ds);
  return new Uint8Array(await new Response(stream).arrayBuffer());
};

function start(): void {
  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const hudEl = document.getElementById("hud") as HTMLElement;
  const retry = document.getElementById("retry") as HTMLButtonElement;

  const session = new Session(browserInflate);
  const url = `ws://${location.host}/ws`;

  let latest: ReturnType<Session["hud"]> | null = null;
  const client = new ViewerClient(url, session, {
    makeSocket: (u) => new WebSocket(u) as unknown as import("./client.js").SocketLike,
    onFrame: (frame) => {
      // Decode happens off the input path; blitting is one putImageData.
      blit(canvas, frame, session.eyeView);
      latest = session.hud();
    },
    onStatus: () => {
      latest = session.hud();
      retry.style.display = session.status === "error" ? "inline" : "none";
    },
    reconnectDelayMs: 1500,
  });

  const input = new InputCapture((payload) => client.send(payload));
  input.onEyeCycle = () => {
    session.cycleEyeView();
    if (session.latest) {
      blit(canvas, session.latest, session.eyeView);
    }
  };
  input.attach(canvas, document);

  retry.addEventListener("click", () => client.connect());

  setInterval(() => {
    if (latest) {
      renderHud(hudEl, latest);
    }
  }, 100);

  client.connect();
}

start();
