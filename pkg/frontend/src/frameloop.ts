/** The display loop: camera updates plus frame requests, one at a time.
 *
 * Each tick sends set_camera only when the orbit controller moved, then a
 * request_frame — but never while a previous request_frame is still in
 * flight, so a slow server degrades to a lower display rate instead of an
 * ever-growing queue.
 */

import type { OrbitCamera } from "./camera.js";
import type { Connection, FramePayload } from "./protocol.js";

export class FrameLoop {
  private frameInFlight = false;
  lastFrame: FramePayload | null = null;
  framesReceived = 0;
  ticksSkipped = 0;

  onDisplay: (frame: FramePayload) => void = () => {};

  constructor(
    private conn: Connection,
    private camera: OrbitCamera,
  ) {
    conn.onFrame = (frame) => {
      this.lastFrame = frame;
      this.framesReceived++;
      this.onDisplay(frame);
    };
  }

  get inFlight(): boolean {
    return this.frameInFlight;
  }

  /** Called on every animation tick. */
  async tick(): Promise<void> {
    if (this.frameInFlight) {
      this.ticksSkipped++; // coalesce: at most one outstanding request
      return;
    }
    this.frameInFlight = true;
    try {
      if (this.camera.consumeDirty()) {
        await this.conn.request("set_camera", this.camera.toJson());
      }
      await this.conn.request("request_frame");
    } catch {
      // connection dropped mid-request; reconnect logic re-syncs state
    } finally {
      this.frameInFlight = false;
    }
  }
}
