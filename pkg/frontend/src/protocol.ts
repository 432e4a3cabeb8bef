// Wire format shared with the stream server.
//
// Frame message (little-endian):
//   u8  type (0x01)        offset 0
//   u32 frame index        offset 1
//   u16 total width        offset 5
//   u16 height             offset 7
//   u32 crc32 of raw RGBA  offset 9
//   u32 metrics JSON len   offset 13
//   ... metrics JSON (UTF-8)
//   u32 payload len
//   ... zlib-compressed RGBA
//
// Inputs go the other way as one JSON object per text message.

export const MSG_FRAME = 0x01;
const HEADER_SIZE = 17;

export type Inflate = (data: Uint8Array) => Promise<Uint8Array>;

export interface FrameMetrics {
  frame: number;
  pass_count: number;
  fragments_shaded: number;
  triangles_submitted: number;
  frame_ms: number;
  space: number;
  head: { position: number[] };
  toggles: Record<string, boolean>;
  checksum: number;
}

export interface FrameMessage {
  frameIndex: number;
  width: number;
  height: number;
  checksum: number;
  metrics: FrameMetrics;
  rgba: Uint8Array;
}

export class ProtocolError extends Error {}

// Standard IEEE CRC-32 (matches zlib.crc32).
const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(data: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < data.length; i++) {
    c = CRC_TABLE[(c ^ data[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

export async function decodeFrame(buffer: ArrayBuffer, inflate: Inflate): Promise<FrameMessage> {
  if (buffer.byteLength < HEADER_SIZE) {
    throw new ProtocolError("frame message too short");
  }
  const view = new DataView(buffer);
  const type = view.getUint8(0);
  if (type !== MSG_FRAME) {
    throw new ProtocolError(`unexpected message type 0x${type.toString(16)}`);
  }
  const frameIndex = view.getUint32(1, true);
  const width = view.getUint16(5, true);
  const height = view.getUint16(7, true);
  const checksum = view.getUint32(9, true);
  const metaLen = view.getUint32(13, true);
  const metaEnd = HEADER_SIZE + metaLen;
  if (buffer.byteLength < metaEnd + 4) {
    throw new ProtocolError("truncated metrics blob");
  }
  const metaBytes = new Uint8Array(buffer, HEADER_SIZE, metaLen);
  let metrics: FrameMetrics;
  try {
    metrics = JSON.parse(new TextDecoder().decode(metaBytes));
  } catch (e) {
    throw new ProtocolError(`bad metrics JSON: ${e}`);
  }
  const payloadLen = view.getUint32(metaEnd, true);
  if (buffer.byteLength < metaEnd + 4 + payloadLen) {
    throw new ProtocolError("truncated image payload");
  }
  const payload = new Uint8Array(buffer, metaEnd + 4, payloadLen);
  let rgba: Uint8Array;
  try {
    rgba = await inflate(payload);
  } catch (e) {
    throw new ProtocolError(`corrupt image payload: ${e}`);
  }
  if (rgba.length !== width * height * 4) {
    throw new ProtocolError("image payload has the wrong size");
  }
  // The viewer never trusts its own decode: prove the pixels match the
  // server's checksum before showing them.
  if (crc32(rgba) !== checksum) {
    throw new ProtocolError("image checksum mismatch");
  }
  return { frameIndex, width, height, checksum, metrics, rgba };
}

export type ToggleName =
  | "portal-box"
  | "stencil"
  | "instanced"
  | "hidden-area"
  | "freeze-left-eye-debug";

export function moveEvent(x: number, y: number): string {
  return JSON.stringify({ kind: "move", x, y, t: Date.now() });
}

export function lookEvent(yaw: number, pitch: number): string {
  return JSON.stringify({ kind: "look", yaw, pitch, t: Date.now() });
}

export function toggleEvent(name: ToggleName): string {
  return JSON.stringify({ kind: "toggle", name, t: Date.now() });
}

export function respawnEvent(): string {
  return JSON.stringify({ kind: "respawn", t: Date.now() });
}
