import time

import numpy as np
import pytest

from mantlevis.brush import BrushSet
from mantlevis.frameserver import FrameServer
from mantlevis.preprocess import build_lod
from mantlevis.render import RenderState, default_camera, diverging_tf, render_volume


@pytest.fixture(scope="module")
def pyramid(plume_series):
    return build_lod(plume_series[0])


def _state(grid, generation, brush=None, pass_budget=4, width=24):
    return RenderState(
        step_index=0,
        brush=brush or BrushSet.create(),
        transfer=diverging_tf("temp_anomaly", -100.0, 100.0),
        camera=default_camera(grid, width=width, height=width),
        generation=generation,
        pass_budget=pass_budget,
    )


def test_progressive_accumulation_and_convergence(plume_series, pyramid):
    grid = plume_series[0].grid
    state = _state(grid, generation=1, pass_budget=4)
    with FrameServer(lambda s: pyramid, pass_budget=4) as server:
        server.submit_state(state)
        frame = server.wait_for_passes(1, 4)
    assert frame.passes == 4
    # converged frame matches the batch renderer bit for bit
    batch = render_volume(state, pyramid, passes=4)
    np.testing.assert_array_equal(frame.accum, batch.accum)
    np.testing.assert_array_equal(frame.display(), batch.display())


def test_generation_change_resets_accumulation(plume_series, pyramid):
    grid = plume_series[0].grid
    with FrameServer(lambda s: pyramid, pass_budget=3) as server:
        server.submit_state(_state(grid, generation=1))
        server.wait_for_passes(1, 3)
        server.submit_state(_state(grid, generation=2, brush=BrushSet.create({"z": (0.0, None)})))
        frame = server.wait_for_passes(2, 3)
    assert frame.generation == 2
    assert frame.passes == 3


def test_latest_wins_mailbox(plume_series, pyramid):
    grid = plume_series[0].grid
    with FrameServer(lambda s: pyramid, pass_budget=2, min_pass_time=0.05) as server:
        for gen in range(1, 8):
            server.submit_state(_state(grid, generation=gen))
        frame = server.wait_for_passes(7, 1)
    assert frame.generation == 7


def test_get_display_frame_never_blocks(plume_series, pyramid):
    grid = plume_series[0].grid
    cam = default_camera(grid, width=24, height=24)
    with FrameServer(lambda s: pyramid, pass_budget=64) as server:
        # before anything is rendered: immediate all-hole frame
        t0 = time.perf_counter()
        r = server.get_display_frame(cam)
        assert time.perf_counter() - t0 < 0.02
        assert not r.mask.any()

        server.submit_state(_state(grid, generation=1, pass_budget=64, width=96))
        server.wait_for_passes(1, 1)
        worst = 0.0
        for _ in range(50):  # passes keep running underneath
            t0 = time.perf_counter()
            server.get_display_frame(cam)
            worst = max(worst, time.perf_counter() - t0)
        assert worst < 0.02


def test_display_frame_warps_to_requested_camera(plume_series, pyramid):
    grid = plume_series[0].grid
    state = _state(grid, generation=1)
    with FrameServer(lambda s: pyramid, pass_budget=2) as server:
        server.submit_state(state)
        server.wait_for_passes(1, 2)
        same = server.get_display_frame(state.camera)
        other = server.get_display_frame(default_camera(grid, width=24, height=24))
    assert same.mask.any()
    assert same.generation == 1
    assert other.mask.any()


def test_overlay_composited_into_display(plume_series, pyramid):
    grid = plume_series[0].grid
    state = _state(grid, generation=1)
    # marker at the image center, where the volume gives the pixel a finite
    # depth (the warp drops background pixels)
    marker = np.zeros((24, 24, 4))
    marker[12, 12] = [0.0, 1.0, 0.0, 1.0]
    mask = np.zeros((24, 24), dtype=bool)
    mask[12, 12] = True

    def overlay_fn(camera, depth):
        return marker, mask

    with FrameServer(lambda s: pyramid, pass_budget=2, overlay_fn=overlay_fn) as server:
        server.submit_state(state)
        server.wait_for_passes(1, 2)
        r = server.get_display_frame(state.camera)
    ys, xs = np.nonzero(np.all(r.image == [0, 255, 0, 255], axis=-1))
    assert len(ys) >= 1  # the marker splats somewhere on screen


def test_stop_is_idempotent(pyramid):
    server = FrameServer(lambda s: pyramid).start()
    server.stop()
    server.stop()
