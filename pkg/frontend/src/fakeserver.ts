/** In-memory stand-in for the render service, used only by the test suite.
 *
 * It speaks the same envelope protocol as the real /ws endpoint: every
 * request gets one terminal reply, request_frame gets a frame announcement
 * plus a binary blob, and server-side brush state is mutated by set_brush
 * and apply_preset exactly like the Python session does.
 */

import type { BrushJson, SocketLike } from "./protocol.js";

export function makeFrameBlob(
  width: number,
  height: number,
  generation: number,
  png: Uint8Array,
): ArrayBuffer {
  const buf = new ArrayBuffer(16 + png.length);
  const bytes = new Uint8Array(buf);
  bytes.set([0x4d, 0x46, 0x52, 0x4d], 0); // "MFRM"
  const dv = new DataView(buf);
  dv.setUint32(4, width, true);
  dv.setUint32(8, height, true);
  dv.setUint32(12, generation, true);
  bytes.set(png, 16);
  return buf;
}

export class FakeSocket implements SocketLike {
  onmessage: ((ev: { data: string | ArrayBuffer }) => void) | null = null;
  onclose: (() => void) | null = null;
  onopen: (() => void) | null = null;

  constructor(private server: FakeServer) {}

  send(data: string): void {
    this.server.receive(this, data);
  }

  close(): void {
    this.onclose?.();
  }

  deliver(data: string | ArrayBuffer): void {
    this.onmessage?.({ data });
  }
}

export class FakeServer {
  brush: BrushJson = {};
  pathlineBrush: BrushJson = {};
  generation = 1;
  timestep = 0;
  latencyMs = 0;
  log: string[] = [];
  sockets: FakeSocket[] = [];
  outstandingFrames = 0;
  maxOutstandingFrames = 0;

  presets: Record<string, BrushJson> = {
    task1: {
      depth: [560.0, 760.0],
      v_radial: [null, 0.0],
      temp_anomaly: [null, 0.0],
    },
  };

  ranges: Record<string, [number, number]> = {
    temp_anomaly: [-900, 900],
    v_radial: [-4, 4],
    depth: [0, 2890],
  };

  csv = "depth,temp_anomaly,v_radial\n100,250,1.5\n700,-300,-0.5\n2000,10,0.1\n";

  factory = (_url: string): SocketLike => {
    const sock = new FakeSocket(this);
    this.sockets.push(sock);
    queueMicrotask(() => sock.onopen?.());
    return sock;
  };

  /** Drop the current connection from the server side. */
  dropConnection(): void {
    this.sockets[this.sockets.length - 1]?.close();
  }

  receive(sock: FakeSocket, data: string): void {
    const msg = JSON.parse(data) as { type: string; id: number; payload: unknown };
    this.log.push(msg.type);
    const replies = this.handle(msg);
    const send = () => {
      if (msg.type === "request_frame") this.outstandingFrames--;
      for (const r of replies) {
        sock.deliver(r instanceof ArrayBuffer ? r : JSON.stringify(r));
      }
    };
    if (msg.type === "request_frame") {
      this.outstandingFrames++;
      this.maxOutstandingFrames = Math.max(this.maxOutstandingFrames, this.outstandingFrames);
    }
    if (this.latencyMs > 0) setTimeout(send, this.latencyMs);
    else queueMicrotask(send);
  }

  private ack(id: number, extra: Record<string, unknown> = {}): object {
    return { type: "ack", id, generation: this.generation, ...extra };
  }

  private handle(msg: { type: string; id: number; payload: unknown }): Array<object | ArrayBuffer> {
    const payload = (msg.payload ?? {}) as Record<string, unknown>;
    switch (msg.type) {
      case "set_brush":
        this.brush = payload as BrushJson;
        this.generation++;
        return [this.ack(msg.id)];
      case "set_pathline_brush":
        this.pathlineBrush = payload as BrushJson;
        return [this.ack(msg.id)];
      case "set_transfer_function":
      case "set_camera":
        return [this.ack(msg.id)];
      case "set_timestep":
        this.timestep = payload.index as number;
        return [this.ack(msg.id)];
      case "apply_preset": {
        const preset = this.presets[payload.id as string];
        if (!preset) {
          return [{ type: "error", id: msg.id, code: "UnknownPreset", message: String(payload.id) }];
        }
        this.brush = preset;
        this.generation++;
        return [this.ack(msg.id, { brush: preset })];
      }
      case "echo":
        return [this.ack(msg.id, { echo: payload })];
      case "get_state":
        return [
          this.ack(msg.id, {
            brush: this.brush,
            pathline_brush: this.pathlineBrush,
            timestep: this.timestep,
          }),
        ];
      case "get_variables":
        return [
          {
            type: "variables",
            id: msg.id,
            names: Object.keys(this.ranges),
            ranges: this.ranges,
          },
        ];
      case "get_samples":
        return [{ type: "samples", id: msg.id, csv: this.csv }];
      case "get_pathline_count":
        return [this.ack(msg.id, { count: 7 })];
      case "request_frame": {
        const announce = {
          type: "frame",
          id: msg.id,
          width: 32,
          height: 32,
          generation: this.generation,
          passes: 1,
        };
        return [announce, makeFrameBlob(32, 32, this.generation, new Uint8Array([1, 2, 3]))];
      }
      default:
        return [{ type: "error", id: msg.id, code: "UnknownType", message: msg.type }];
    }
  }
}

/** Let queued microtasks (socket opens, zero-latency replies) run. */
export async function flush(times = 4): Promise<void> {
  for (let i = 0; i < times; i++) await Promise.resolve();
}
