/** Browser entry point: wires the widgets to one duplex /ws connection. */

import { AxisSet } from "./axes.js";
import { OrbitCamera } from "./camera.js";
import { parseSampleCsv } from "./csv.js";
import { FrameLoop } from "./frameloop.js";
import { ParcoordsWidget } from "./parcoords.js";
import { Connection, SocketLike } from "./protocol.js";
import { TfEditorModel } from "./tf.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function browserSocket(url: string): SocketLike {
  const ws = new WebSocket(url);
  ws.binaryType = "arraybuffer";
  return ws as unknown as SocketLike;
}

async function start(): Promise<void> {
  const status = el<HTMLElement>("status");
  const frameCanvas = el<HTMLCanvasElement>("frame");
  const pcCanvas = el<HTMLCanvasElement>("parcoords");
  const timeSlider = el<HTMLInputElement>("timestep");
  const pathlineCount = el<HTMLElement>("pathline-count");
  const pathlineMin = el<HTMLInputElement>("pathline-min-vr");

  const proto = location.protocol === "https:" ? "wss:" : "ws:";
  const conn = new Connection(`${proto}//${location.host}/ws`, browserSocket);
  conn.onStatus = (text) => (status.textContent = text);

  const camera = new OrbitCamera(14000, 0, 18, frameCanvas.width, frameCanvas.height);
  const loop = new FrameLoop(conn, camera);
  const frameCtx = frameCanvas.getContext("2d");
  loop.onDisplay = async (frame) => {
    const blob = new Blob([frame.png.slice().buffer], { type: "image/png" });
    const bmp = await createImageBitmap(blob);
    frameCtx?.drawImage(bmp, 0, 0, frameCanvas.width, frameCanvas.height);
    el<HTMLElement>("passes").textContent = `gen ${frame.generation}, ${frame.passes} passes`;
  };

  let axes = AxisSet.fromRanges({});
  let widget: ParcoordsWidget | null = null;
  let tf: TfEditorModel | null = null;

  const sendBrush = (brush: Record<string, [number | null, number | null]>) => {
    void conn.request("set_brush", brush).catch(() => {});
  };

  const refreshSamples = async () => {
    const msg = await conn.request("get_samples");
    const table = parseSampleCsv(msg.csv as string);
    if (widget) {
      widget.setTable(table);
    } else {
      widget = new ParcoordsWidget(pcCanvas, axes, table, sendBrush);
      widget.draw();
    }
  };

  const syncFromServer = async () => {
    const vars = await conn.request("get_variables");
    const ranges = vars.ranges as Record<string, [number, number]>;
    axes = AxisSet.fromRanges(ranges);
    const state = await conn.request("get_state");
    axes.applyBrushJson(state.brush as Record<string, [number | null, number | null]>);
    timeSlider.value = String(state.timestep);
    if (widget) widget.axes = axes;
    if (!tf) {
      const r = ranges["temp_anomaly"] ?? [0, 1];
      tf = TfEditorModel.diverging("temp_anomaly", r[0], r[1]);
    }
    await refreshSamples();
  };

  conn.onReady = () => {
    // after connect or reconnect, push local state back to the server
    void (async () => {
      await conn.request("set_brush", axes.toBrushJson()).catch(() => {});
      if (tf) await conn.request("set_transfer_function", tf.toJson()).catch(() => {});
      await syncFromServer().catch(() => {});
    })();
  };
  conn.connect();

  for (const id of ["task1", "task2", "task3", "task4"] as const) {
    el<HTMLButtonElement>(`preset-${id}`).addEventListener("click", () => {
      void conn.request("apply_preset", { id }).then((ack) => {
        axes.applyBrushJson(ack.brush as Record<string, [number | null, number | null]>);
        widget?.draw();
      });
    });
  }

  timeSlider.addEventListener("change", () => {
    void conn
      .request("set_timestep", { index: Number(timeSlider.value) })
      .then(() => refreshSamples());
  });

  const refreshPathlines = () => {
    const lo = pathlineMin.value === "" ? null : Number(pathlineMin.value);
    void conn
      .request("set_pathline_brush", lo === null ? {} : { v_radial: [lo, null] })
      .then(() => conn.request("get_pathline_count"))
      .then((ack) => (pathlineCount.textContent = `${ack.count} pathlines shown`));
  };
  pathlineMin.addEventListener("change", refreshPathlines);

  frameCanvas.addEventListener("pointermove", (e) => {
    if (e.buttons & 1) camera.orbit(e.movementX * 0.4, -e.movementY * 0.4);
  });
  frameCanvas.addEventListener(
    "wheel",
    (e) => {
      e.preventDefault();
      camera.zoom(e.deltaY > 0 ? 1.08 : 1 / 1.08);
    },
    { passive: false },
  );

  const animate = () => {
    void loop.tick();
    requestAnimationFrame(animate);
  };
  animate();
}

void start();
