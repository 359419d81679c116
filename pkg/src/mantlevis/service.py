"""Wire protocol and web service exposing the frame server to clients.

Messages are JSON text envelopes {type, id, payload}; every request gets
exactly one terminal response: ack, error, or a data message (variables,
samples, frame).  Frame payloads follow their announcement as one binary
message: 16-byte header (magic "MFRM", u32 width, height, generation) + PNG.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

# Module-level so the websocket endpoint's (postponed) annotation resolves
# when the route is registered.
from fastapi import WebSocket  # noqa: F401

from . import mvol, preprocess
from .brush import BrushSet, MissingVariable, UnknownPreset, preset
from .frameserver import FrameServer
from .pathlines import read_mpath
from .preprocess import UnknownVariable, add_derived, build_lod, extract_samples, write_msamp
from .render import (
    Camera,
    RenderState,
    TransferFunction,
    default_camera,
    diverging_tf,
    encode_png,
    render_pathlines,
)

FRAME_MAGIC = b"MFRM"
PATHLINE_WINDOW = 10

MUTATING_TYPES = (
    "set_brush",
    "set_transfer_function",
    "set_camera",
    "set_timestep",
    "set_pathline_brush",
    "apply_preset",
)


def pack_frame_header(width, height, generation) -> bytes:
    return FRAME_MAGIC + struct.pack("<III", width, height, generation)


def unpack_frame_header(data: bytes):
    if data[:4] != FRAME_MAGIC:
        raise ValueError("bad frame magic")
    width, height, generation = struct.unpack_from("<III", data, 4)
    return width, height, generation, data[16:]


class Dataset:
    """A preprocessed (or raw generated) series directory, loaded in memory."""

    def __init__(self, directory):
        self.directory = Path(directory)
        entries = mvol.read_series_index(self.directory)
        self.series = [add_derived(mvol.load_volume(self.directory / name)) for _, name in entries]
        self._filenames = [name for _, name in entries]
        self._pyramids = {}
        self._samples = {}
        self.pathlines = self._load_pathlines()
        self.variable_ranges = self._collect_ranges()

    def _load_pathlines(self):
        path = self.directory / "pathlines.mpath"
        if path.exists():
            return read_mpath(path.read_bytes())
        from .pathlines import generate_pathlines

        return generate_pathlines(self.series)

    def _collect_ranges(self):
        ranges = {}
        for v in self.series:
            for name, f in v.scalars.items():
                lo, hi = ranges.get(name, (np.inf, -np.inf))
                ranges[name] = (min(lo, f.v_min), max(hi, f.v_max))
        g = self.grid
        ranges["x"] = ranges["y"] = ranges["z"] = (-g.r_outer, g.r_outer)
        return {k: (float(a), float(b)) for k, (a, b) in sorted(ranges.items())}

    @property
    def grid(self):
        return self.series[0].grid

    @property
    def n_steps(self):
        return len(self.series)

    def pyramid(self, step_index):
        """LOD pyramid per step, built (or read) once and cached; brushing
        never triggers a rebuild."""
        if step_index not in self._pyramids:
            base = self.series[step_index]
            l1 = self.directory / (self._filenames[step_index] + ".L1")
            l2 = self.directory / (self._filenames[step_index] + ".L2")
            if l1.exists() and l2.exists():
                levels = (base, mvol.load_volume(l1), mvol.load_volume(l2))
                self._pyramids[step_index] = preprocess.LodPyramid(levels=levels)
            else:
                self._pyramids[step_index] = build_lod(base)
        return self._pyramids[step_index]

    def samples_csv(self, step_index) -> str:
        if step_index not in self._samples:
            path = self.directory / f"samples_{step_index:04d}.msamp"
            if path.exists():
                self._samples[step_index] = path.read_text(encoding="utf-8")
            else:
                self._samples[step_index] = write_msamp(extract_samples(self.series[step_index]))
        return self._samples[step_index]


class ProtocolError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class Session:
    """One client connection: owns render state and one frame server."""

    def __init__(self, dataset: Dataset | None = None, pass_budget=8):
        self.dataset = None
        self.pass_budget = pass_budget
        self.generation = 0
        self.brush = BrushSet.create()
        self.pathline_brush = BrushSet.create()
        self.transfer = None
        self.camera = None
        self.step_index = 0
        self.frameserver = None
        if dataset is not None:
            self._bind(dataset)

    def close(self):
        if self.frameserver is not None:
            self.frameserver.stop()
            self.frameserver = None

    def _bind(self, dataset: Dataset):
        self.close()
        self.dataset = dataset
        self.camera = default_camera(dataset.grid)
        lo, hi = dataset.variable_ranges.get("temp_anomaly", (0.0, 1.0))
        self.transfer = diverging_tf("temp_anomaly", lo, hi)
        self.step_index = 0
        self.frameserver = FrameServer(
            dataset.pyramid, pass_budget=self.pass_budget, overlay_fn=self._overlay
        ).start()
        self._submit()

    def _overlay(self, camera, depth_buffer):
        lines = self.filtered_pathlines()
        return render_pathlines(lines, camera, depth_buffer)

    def filtered_pathlines(self):
        from .brush import filter_pathlines

        return filter_pathlines(
            self.dataset.pathlines,
            self.brush,
            self.pathline_brush,
            self.step_index,
            window=PATHLINE_WINDOW,
        )

    def current_state(self) -> RenderState:
        return RenderState(
            step_index=self.step_index,
            brush=self.brush,
            transfer=self.transfer,
            camera=self.camera,
            generation=self.generation,
            pass_budget=self.pass_budget,
        )

    def _submit(self):
        # Content-identical submissions keep their generation: no reset, the
        # renderer keeps accumulating passes.
        key = (self.current_state().content_key(), tuple(sorted(self.pathline_brush.entries.items())))
        if getattr(self, "_last_key", None) != key:
            self.generation += 1
            self._last_key = key
            self._last_state = self.current_state()
        self.frameserver.submit_state(self._last_state)

    # -- message handling ----------------------------------------------------

    def handle_message(self, msg: dict):
        """Returns the response list: dicts, plus bytes for frame payloads."""
        msg_id = msg.get("id")
        try:
            mtype = msg.get("type")
            payload = msg.get("payload") or {}
            if not isinstance(mtype, str):
                raise ProtocolError("BadPayload", "message type missing")
            handler = getattr(self, f"_on_{mtype}", None)
            if handler is None:
                raise ProtocolError("UnknownType", f"unknown message type {mtype!r}")
            if mtype != "load_dataset" and self.dataset is None:
                raise ProtocolError("NoDatasetLoaded", "load a dataset first")
            return handler(msg_id, payload)
        except ProtocolError as e:
            return [{"type": "error", "id": msg_id, "code": e.code, "message": str(e)}]
        except (MissingVariable, UnknownVariable) as e:
            return [{"type": "error", "id": msg_id, "code": "UnknownVariable", "message": str(e)}]
        except UnknownPreset as e:
            return [{"type": "error", "id": msg_id, "code": "UnknownPreset", "message": str(e)}]
        except (KeyError, TypeError, ValueError) as e:
            return [{"type": "error", "id": msg_id, "code": "BadPayload", "message": str(e)}]

    def _ack(self, msg_id, **extra):
        return [{"type": "ack", "id": msg_id, "generation": self.generation, **extra}]

    def _validate_brush_vars(self, b: BrushSet):
        known = set(self.dataset.variable_ranges) | set(("x", "y", "z", "depth"))
        for name in b.restricted_variables():
            if name not in known:
                raise UnknownVariable(name)

    def _on_load_dataset(self, msg_id, payload):
        self._bind(Dataset(payload["dir"]))
        return self._ack(msg_id)

    def _on_set_brush(self, msg_id, payload):
        b = BrushSet.from_json_obj(payload, generation=self.brush.generation + 1)
        self._validate_brush_vars(b)
        self.brush = b
        self._submit()
        return self._ack(msg_id)

    def _on_set_pathline_brush(self, msg_id, payload):
        b = BrushSet.from_json_obj(payload, generation=self.pathline_brush.generation + 1)
        self._validate_brush_vars(b)
        self.pathline_brush = b
        self._submit()
        return self._ack(msg_id)

    def _on_set_transfer_function(self, msg_id, payload):
        tf = TransferFunction.from_json_obj(payload)
        if tf.variable not in self.dataset.variable_ranges:
            raise UnknownVariable(tf.variable)
        self.transfer = tf
        self._submit()
        return self._ack(msg_id)

    def _on_set_camera(self, msg_id, payload):
        self.camera = Camera.from_json_obj(payload)
        self._submit()
        return self._ack(msg_id)

    def _on_set_timestep(self, msg_id, payload):
        index = int(payload["index"])
        if not (0 <= index < self.dataset.n_steps):
            raise ProtocolError("BadPayload", f"time step {index} out of range")
        self.step_index = index
        self._submit()
        return self._ack(msg_id)

    def _on_apply_preset(self, msg_id, payload):
        p = preset(payload["id"])
        self.brush = BrushSet.create(dict(p.brush.entries), generation=self.brush.generation + 1)
        lo, hi = self.dataset.variable_ranges.get(p.color_variable, (0.0, 1.0))
        self.transfer = diverging_tf(p.color_variable, lo, hi)
        self._submit()
        return self._ack(
            msg_id, brush=self.brush.to_json_obj(), color_variable=p.color_variable
        )

    def _on_request_frame(self, msg_id, payload):
        result = self.frameserver.get_display_frame(self.camera)
        header = pack_frame_header(self.camera.width, self.camera.height, max(result.generation, 0))
        png = encode_png(result.image)
        announce = {
            "type": "frame",
            "id": msg_id,
            "width": self.camera.width,
            "height": self.camera.height,
            "generation": result.generation,
            "passes": result.passes,
        }
        return [announce, header + png]

    def _on_get_samples(self, msg_id, payload):
        return [{"type": "samples", "id": msg_id, "csv": self.dataset.samples_csv(self.step_index)}]

    def _on_get_variables(self, msg_id, payload):
        ranges = self.dataset.variable_ranges
        return [
            {
                "type": "variables",
                "id": msg_id,
                "names": list(ranges),
                "ranges": {k: list(v) for k, v in ranges.items()},
            }
        ]

    def _on_get_pathline_count(self, msg_id, payload):
        return self._ack(msg_id, count=len(self.filtered_pathlines()))

    def _on_get_state(self, msg_id, payload):
        return self._ack(
            msg_id,
            brush=self.brush.to_json_obj(),
            pathline_brush=self.pathline_brush.to_json_obj(),
            transfer_function=self.transfer.to_json_obj() if self.transfer else None,
            camera=self.camera.to_json_obj() if self.camera else None,
            timestep=self.step_index,
        )

    def _on_echo(self, msg_id, payload):
        return self._ack(msg_id, echo=payload)


def create_app(data_dir=None, pass_budget=8, ui_dir=None):
    """FastAPI app: duplex protocol at /ws, static UI under /ui."""
    import json

    from fastapi import FastAPI, WebSocketDisconnect

    app = FastAPI(title="mantlevis")
    shared = {"dataset": Dataset(data_dir) if data_dir else None}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        session = Session(dataset=shared["dataset"], pass_budget=pass_budget)
        try:
            while True:
                text = await ws.receive_text()
                try:
                    msg = json.loads(text)
                except json.JSONDecodeError:
                    msg = {"type": None, "id": None}
                for resp in session.handle_message(msg):
                    if isinstance(resp, bytes):
                        await ws.send_bytes(resp)
                    else:
                        await ws.send_text(json.dumps(resp))
        except WebSocketDisconnect:
            pass
        finally:
            session.close()

    if ui_dir is None:
        ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
