// Node-side helpers shared by the tests: a zlib inflate and a frame
// encoder mirroring the server's layout, for golden-message construction.

import { deflateSync, inflateSync } from "node:zlib";

import { crc32, Inflate } from "../src/protocol.js";

export const nodeInflate: Inflate = async (data) => new Uint8Array(inflateSync(data));

export function encodeFrameForTest(
  frameIndex: number,
  width: number,
  height: number,
  rgba: Uint8Array,
  metrics: Record<string, unknown>,
  opts: { corruptPayload?: boolean; badChecksum?: boolean } = {},
): ArrayBuffer {
  const crc = opts.badChecksum ? 0xdeadbeef : crc32(rgba);
  const meta = new TextEncoder().encode(JSON.stringify({ ...metrics, checksum: crc }));
  const payload = new Uint8Array(deflateSync(rgba));
  if (opts.corruptPayload) {
    payload[payload.length - 1] ^= 0xff;
  }
  const buf = new ArrayBuffer(17 + meta.length + 4 + payload.length);
  const view = new DataView(buf);
  view.setUint8(0, 0x01);
  view.setUint32(1, frameIndex, true);
  view.setUint16(5, width, true);
  view.setUint16(7, height, true);
  view.setUint32(9, crc, true);
  view.setUint32(13, meta.length, true);
  new Uint8Array(buf, 17, meta.length).set(meta);
  view.setUint32(17 + meta.length, payload.length, true);
  new Uint8Array(buf, 17 + meta.length + 4, payload.length).set(payload);
  return buf;
}

export function testMetrics(space = 1, toggles: Record<string, boolean> = {}) {
  return {
    frame: 0,
    pass_count: 4,
    fragments_shaded: 1234,
    triangles_submitted: 99,
    frame_ms: 7.5,
    space,
    head: { position: [0, 1.6, 0] },
    toggles: { "portal-box": true, ...toggles },
  };
}
