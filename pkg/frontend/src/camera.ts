/** Orbit camera: spherical coordinates around the planet center. */

import type { CameraJson } from "./protocol.js";

export class OrbitCamera {
  private dirty = true;

  constructor(
    public distance: number,
    public azimuthDeg = 0,
    public elevationDeg = 18,
    public width = 512,
    public height = 512,
  ) {}

  orbit(dAzimuthDeg: number, dElevationDeg: number): void {
    this.azimuthDeg = (this.azimuthDeg + dAzimuthDeg) % 360;
    this.elevationDeg = Math.max(-85, Math.min(85, this.elevationDeg + dElevationDeg));
    this.dirty = true;
  }

  zoom(factor: number): void {
    this.distance = Math.max(1, this.distance * factor);
    this.dirty = true;
  }

  resize(width: number, height: number): void {
    this.width = width;
    this.height = height;
    this.dirty = true;
  }

  /** True once after any change; the frame loop uses this to decide whether
   * a set_camera message must precede the next request_frame. */
  consumeDirty(): boolean {
    const was = this.dirty;
    this.dirty = false;
    return was;
  }

  toJson(): CameraJson {
    const az = (this.azimuthDeg * Math.PI) / 180;
    const el = (this.elevationDeg * Math.PI) / 180;
    const eye: [number, number, number] = [
      this.distance * Math.cos(el) * Math.cos(az),
      this.distance * Math.cos(el) * Math.sin(az),
      this.distance * Math.sin(el),
    ];
    return {
      eye,
      look_at: [0, 0, 0],
      up: [0, 0, 1],
      fov_deg: 40,
      width: this.width,
      height: this.height,
    };
  }
}
