/** Wire protocol: JSON envelopes over one duplex socket, binary frames.
 *
 * Every request carries a client-assigned id and resolves with exactly one
 * terminal response (ack, error, or a data message). A `frame` announcement
 * is followed by one binary message: 16-byte header (magic "MFRM", u32
 * width/height/generation, little endian) + PNG bytes.
 */

export type Interval = [number | null, number | null];
export type BrushJson = Record<string, Interval>;

export interface TfPoint {
  value: number;
  rgba: [number, number, number, number];
}

export interface TfJson {
  variable: string;
  points: Array<[number, [number, number, number, number]]>;
  opacity_scale: number;
}

export interface CameraJson {
  eye: [number, number, number];
  look_at: [number, number, number];
  up?: [number, number, number];
  fov_deg?: number;
  width: number;
  height: number;
}

export interface ServerMessage {
  type: string;
  id: number | null;
  [key: string]: unknown;
}

export interface FramePayload {
  width: number;
  height: number;
  generation: number;
  passes: number;
  png: Uint8Array;
}

export class ProtocolFault extends Error {}

const FRAME_MAGIC = [0x4d, 0x46, 0x52, 0x4d]; // "MFRM"

export function parseFrameBlob(buf: ArrayBuffer): {
  width: number;
  height: number;
  generation: number;
  png: Uint8Array;
} {
  const bytes = new Uint8Array(buf);
  if (bytes.length < 16 || FRAME_MAGIC.some((b, i) => bytes[i] !== b)) {
    throw new ProtocolFault("bad frame magic");
  }
  const dv = new DataView(buf);
  return {
    width: dv.getUint32(4, true),
    height: dv.getUint32(8, true),
    generation: dv.getUint32(12, true),
    png: bytes.subarray(16),
  };
}

/** Minimal WebSocket shape so tests can supply a scripted fake. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: { data: string | ArrayBuffer }) => void) | null;
  onclose: (() => void) | null;
  onopen: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

interface Pending {
  resolve: (msg: ServerMessage) => void;
  reject: (err: Error) => void;
}

/** One duplex connection with request/response matching and reconnect. */
export class Connection {
  private socket: SocketLike | null = null;
  private nextId = 1;
  private pending = new Map<number, Pending>();
  private awaitingBinaryFor: ServerMessage | null = null;
  private backoffMs = 250;
  private closed = false;

  onStatus: (text: string) => void = () => {};
  onFrame: (frame: FramePayload) => void = () => {};
  /** Called after (re)connect so the app can re-send its state. */
  onReady: () => void = () => {};

  constructor(
    private url: string,
    private makeSocket: SocketFactory,
    private schedule: (fn: () => void, ms: number) => void = (fn, ms) =>
      void setTimeout(fn, ms),
  ) {}

  connect(): void {
    const sock = this.makeSocket(this.url);
    this.socket = sock;
    sock.onopen = () => {
      this.backoffMs = 250;
      this.onStatus("connected");
      this.onReady();
    };
    sock.onmessage = (ev) => this.handleMessage(ev.data);
    sock.onclose = () => {
      this.failAllPending(new ProtocolFault("connection closed"));
      if (this.closed) return;
      this.onStatus(`reconnecting in ${this.backoffMs} ms`);
      this.schedule(() => this.connect(), this.backoffMs);
      this.backoffMs = Math.min(this.backoffMs * 2, 8000);
    };
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }

  get inFlight(): number {
    return this.pending.size;
  }

  request(type: string, payload?: unknown): Promise<ServerMessage> {
    const id = this.nextId++;
    const sock = this.socket;
    if (sock === null) {
      return Promise.reject(new ProtocolFault("not connected"));
    }
    return new Promise((resolve, reject) => {
      this.pending.set(id, { resolve, reject });
      sock.send(JSON.stringify({ type, id, payload: payload ?? {} }));
    });
  }

  private handleMessage(data: string | ArrayBuffer): void {
    if (typeof data !== "string") {
      const announce = this.awaitingBinaryFor;
      this.awaitingBinaryFor = null;
      const parsed = parseFrameBlob(data);
      const frame: FramePayload = {
        ...parsed,
        passes: announce ? (announce.passes as number) : 0,
      };
      this.onFrame(frame);
      if (announce && announce.id !== null) {
        this.settle(announce.id as number, announce);
      }
      return;
    }
    const msg = JSON.parse(data) as ServerMessage;
    if (msg.type === "frame") {
      // terminal response settles once the binary payload arrives
      this.awaitingBinaryFor = msg;
      return;
    }
    if (msg.type === "error") {
      this.onStatus(`server error ${msg.code}: ${msg.message}`);
    }
    if (typeof msg.id === "number") {
      this.settle(msg.id, msg);
    }
  }

  private settle(id: number, msg: ServerMessage): void {
    const p = this.pending.get(id);
    if (p) {
      this.pending.delete(id);
      p.resolve(msg);
    }
  }

  private failAllPending(err: Error): void {
    for (const p of this.pending.values()) p.reject(err);
    this.pending.clear();
  }
}
