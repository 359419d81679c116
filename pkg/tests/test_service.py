import json
from pathlib import Path

import numpy as np
import pytest

from mantlevis import mvol
from mantlevis.pathlines import generate_pathlines, write_mpath
from mantlevis.service import (
    Dataset,
    Session,
    create_app,
    pack_frame_header,
    unpack_frame_header,
)


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory, plume_series):
    d = tmp_path_factory.mktemp("plume_data")
    mvol.save_series(plume_series, d)
    (d / "pathlines.mpath").write_bytes(write_mpath(generate_pathlines(plume_series)))
    return d


@pytest.fixture(scope="module")
def dataset(dataset_dir):
    return Dataset(dataset_dir)


@pytest.fixture()
def session(dataset):
    s = Session(dataset=dataset, pass_budget=2)
    yield s
    s.close()


def _small_camera_payload(grid):
    return {
        "eye": [2.6 * grid.r_outer, 0.0, 0.8 * grid.r_outer],
        "look_at": [0.0, 0.0, 0.0],
        "width": 24,
        "height": 24,
    }


def test_frame_header_round_trip():
    blob = pack_frame_header(640, 480, 7) + b"PNGDATA"
    w, h, gen, rest = unpack_frame_header(blob)
    assert (w, h, gen, rest) == (640, 480, 7, b"PNGDATA")
    with pytest.raises(ValueError):
        unpack_frame_header(b"XXXX" + b"\x00" * 12)


def test_dataset_loading(dataset, plume_series):
    assert dataset.n_steps == len(plume_series)
    assert dataset.grid == plume_series[0].grid
    assert {"temp_anomaly", "depth", "v_radial"} <= set(dataset.variable_ranges)
    assert dataset.pathlines
    lo, hi = dataset.variable_ranges["depth"]
    assert lo == 0.0
    assert hi == pytest.approx(dataset.grid.r_outer - dataset.grid.r_inner)


def test_dataset_pyramid_cached(dataset):
    assert dataset.pyramid(0) is dataset.pyramid(0)


def test_dataset_reads_precomputed_lod(dataset_dir, plume_series):
    from mantlevis.preprocess import build_lod

    p = build_lod(plume_series[0])
    entries = mvol.read_series_index(dataset_dir)
    name = entries[0][1]
    mvol.save_volume(p.level(1), dataset_dir / f"{name}.L1")
    mvol.save_volume(p.level(2), dataset_dir / f"{name}.L2")
    ds = Dataset(dataset_dir)
    pyr = ds.pyramid(0)
    assert pyr.level(1).grid.shape == p.level(1).grid.shape
    np.testing.assert_array_equal(
        pyr.level(2).scalars["temperature"].values, p.level(2).scalars["temperature"].values
    )


def test_get_variables(session):
    (resp,) = session.handle_message({"type": "get_variables", "id": 1})
    assert resp["type"] == "variables"
    assert resp["id"] == 1
    assert "temp_anomaly" in resp["names"]
    assert len(resp["ranges"]["depth"]) == 2


def test_get_samples(session):
    (resp,) = session.handle_message({"type": "get_samples", "id": 2})
    assert resp["type"] == "samples"
    header = resp["csv"].splitlines()[0]
    assert header.startswith("x,y,z,")


def test_set_brush_and_generation(session):
    g0 = session.generation
    (ack,) = session.handle_message(
        {"type": "set_brush", "id": 3, "payload": {"temp_anomaly": [0.0, None]}}
    )
    assert ack["type"] == "ack"
    assert ack["generation"] == g0 + 1
    # identical brush again: no new generation, accumulation continues
    (ack2,) = session.handle_message(
        {"type": "set_brush", "id": 4, "payload": {"temp_anomaly": [0.0, None]}}
    )
    assert ack2["generation"] == g0 + 1


def test_unknown_brush_variable_rejected(session):
    (err,) = session.handle_message(
        {"type": "set_brush", "id": 5, "payload": {"made_up": [0.0, 1.0]}}
    )
    assert err["type"] == "error"
    assert err["code"] == "UnknownVariable"


def test_set_timestep_bounds(session):
    (ack,) = session.handle_message({"type": "set_timestep", "id": 6, "payload": {"index": 1}})
    assert ack["type"] == "ack"
    (err,) = session.handle_message({"type": "set_timestep", "id": 7, "payload": {"index": 99}})
    assert err["code"] == "BadPayload"


def test_apply_preset(session):
    (ack,) = session.handle_message({"type": "apply_preset", "id": 8, "payload": {"id": "task3"}})
    assert ack["type"] == "ack"
    assert ack["brush"] == {"temp_anomaly": [0.0, None]}
    assert ack["color_variable"] == "spin_density_anomaly"
    (err,) = session.handle_message({"type": "apply_preset", "id": 9, "payload": {"id": "taskX"}})
    assert err["code"] == "UnknownPreset"


def test_request_frame_binary(session, dataset):
    session.handle_message(
        {"type": "set_camera", "id": 10, "payload": _small_camera_payload(dataset.grid)}
    )
    session.frameserver.wait_for_passes(session.generation, 1)
    announce, blob = session.handle_message({"type": "request_frame", "id": 11})
    assert announce["type"] == "frame"
    assert isinstance(blob, bytes)
    w, h, gen, png = unpack_frame_header(blob)
    assert (w, h) == (24, 24)
    assert announce["generation"] == session.generation
    from mantlevis.render import decode_png

    img = decode_png(png)
    assert img.shape == (24, 24, 4)


def test_unknown_type_and_missing_type(session):
    (err,) = session.handle_message({"type": "frobnicate", "id": 12})
    assert err["code"] == "UnknownType"
    (err2,) = session.handle_message({"id": 13})
    assert err2["code"] == "BadPayload"


def test_requires_dataset():
    s = Session(dataset=None)
    (err,) = s.handle_message({"type": "get_variables", "id": 1})
    assert err["code"] == "NoDatasetLoaded"
    s.close()


def test_echo_and_state(session):
    (resp,) = session.handle_message({"type": "echo", "id": 20, "payload": {"k": [1, 2]}})
    assert resp["echo"] == {"k": [1, 2]}
    (state,) = session.handle_message({"type": "get_state", "id": 21})
    assert state["timestep"] == session.step_index
    assert "brush" in state and "camera" in state


def test_pathline_brush_and_count(session):
    (ack,) = session.handle_message({"type": "get_pathline_count", "id": 30})
    n_all = ack["count"]
    assert n_all > 0
    session.handle_message(
        {"type": "set_pathline_brush", "id": 31, "payload": {"temp_anomaly": [None, -1.0]}}
    )
    (ack2,) = session.handle_message({"type": "get_pathline_count", "id": 32})
    assert ack2["count"] == 0


def test_websocket_end_to_end(dataset_dir):
    starlette = pytest.importorskip("starlette.testclient")
    app = create_app(data_dir=dataset_dir, pass_budget=2)
    with starlette.TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.send_text(json.dumps({"type": "get_variables", "id": 1}))
            resp = json.loads(ws.receive_text())
            assert resp["type"] == "variables" and resp["id"] == 1

            ws.send_text(json.dumps({"type": "apply_preset", "id": 2, "payload": {"id": "task1"}}))
            ack = json.loads(ws.receive_text())
            assert ack["type"] == "ack"
            assert ack["brush"]["depth"] == [560.0, 760.0]

            ws.send_text(json.dumps({"type": "request_frame", "id": 3}))
            announce = json.loads(ws.receive_text())
            assert announce["type"] == "frame"
            blob = ws.receive_bytes()
            w, h, gen, png = unpack_frame_header(blob)
            assert (w, h) == (announce["width"], announce["height"])

            ws.send_text("this is not json")
            err = json.loads(ws.receive_text())
            assert err["type"] == "error"


def test_static_ui_mount(dataset_dir):
    starlette = pytest.importorskip("starlette.testclient")
    ui_dir = Path(__file__).resolve().parents[1] / "frontend" / "dist"
    if not ui_dir.is_dir():
        pytest.skip("frontend has not been built")
    app = create_app(data_dir=dataset_dir, pass_budget=2)
    with starlette.TestClient(app) as client:
        page = client.get("/ui/")
        assert page.status_code == 200
        assert "text/html" in page.headers["content-type"]
        script = client.get("/ui/js/main.js")
        assert script.status_code == 200
