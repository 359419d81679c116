"""Asynchronous frame server: decouples display rate from render rate.

One worker thread owns rendering.  State submissions go through a single-slot
latest-wins mailbox; a pass in flight completes but its result is discarded
when its generation is stale.  Completed frames are published as immutable
snapshots; get_display_frame never waits for the render loop, it warps the
latest snapshot to the requested camera.
"""

from __future__ import annotations

import threading
import time

from .render import FrameSlot, RenderState, compose_overlay, pick_lod, render_pass
from .warp import WarpResult, empty_warp, warp_frame


class FrameServer:
    def __init__(self, pyramid_for_step, pass_budget=8, overlay_fn=None, min_pass_time=0.0):
        """pyramid_for_step: callable step_index -> LodPyramid.

        overlay_fn(camera, depth_buffer), when set, returns an (overlay, mask)
        pair composited into published display images (pathlines).
        min_pass_time throttles the render loop; useful in tests.
        """
        self._pyramid_for_step = pyramid_for_step
        self._pass_budget = pass_budget
        self._overlay_fn = overlay_fn
        self._min_pass_time = min_pass_time

        self._cond = threading.Condition()
        self._pending = None  # latest-wins mailbox
        self._stop = False

        self._latest = None  # (FrameSlot snapshot, display image with overlay)
        self._thread = None

    # -- lifecycle -----------------------------------------------------------

    def start(self):
        self._thread = threading.Thread(target=self._loop, name="mantlevis-render", daemon=True)
        self._thread.start()
        return self

    def stop(self):
        with self._cond:
            self._stop = True
            self._cond.notify_all()
        if self._thread is not None:
            self._thread.join(timeout=10.0)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    # -- client surface ------------------------------------------------------

    def submit_state(self, state: RenderState) -> int:
        """Replace the pending state (intermediate states may be skipped).

        The render loop observes it before its next pass; accumulation resets
        when the generation differs from the current one.
        """
        with self._cond:
            self._pending = state
            self._cond.notify_all()
        return state.generation

    def get_display_frame(self, camera) -> WarpResult:
        """Latest completed frame warped to `camera`; never blocks on
        rendering.  All-hole result when nothing is rendered yet."""
        latest = self._latest
        if latest is None:
            return empty_warp(camera)
        frame, display = latest
        return warp_frame(frame, camera, display=display)

    def latest_frame(self):
        latest = self._latest
        return None if latest is None else latest[0]

    def wait_for_passes(self, generation, passes, timeout=30.0):
        """Test/CLI helper: block until a frame of `generation` has
        accumulated at least `passes` passes."""
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            latest = self._latest
            if latest is not None and latest[0].generation == generation and latest[0].passes >= passes:
                return latest[0]
            time.sleep(0.002)
        raise TimeoutError("frame did not converge in time")

    # -- render loop ---------------------------------------------------------

    def _take_pending(self):
        with self._cond:
            state = self._pending
            self._pending = None
            return state

    def _publish(self, state, frame: FrameSlot):
        snapshot = frame.copy()
        display = snapshot.display()
        if self._overlay_fn is not None:
            overlay, mask = self._overlay_fn(snapshot.camera, snapshot.depth)
            display = compose_overlay(display, overlay, mask)
        # Single reference swap: readers always see a consistent snapshot.
        self._latest = (snapshot, display)

    def _stale(self, state):
        pending = self._pending
        return pending is not None and pending.generation != state.generation

    def _loop(self):
        state = None
        frame = None
        pass_index = 0
        interactive = False
        while True:
            with self._cond:
                while not self._stop and self._pending is None and (
                    state is None or pass_index >= self._pass_budget
                ):
                    self._cond.wait()
                if self._stop:
                    return
                if self._pending is not None:
                    new_state = self._pending
                    self._pending = None
                    if state is None or new_state.generation != state.generation:
                        state = new_state
                        frame = None
                        pass_index = 0
                        interactive = True
                    else:
                        state = new_state  # same content; keep accumulating

            started = time.monotonic()
            pyramid = self._pyramid_for_step(state.step_index)
            if interactive:
                # Quick coarse preview before converged passes start.
                preview = FrameSlot.fresh(state.camera, state.generation)
                level = pick_lod(interactive=True, pass_index=0, n_levels=len(pyramid.levels))
                render_pass(state, pyramid, preview, 0, level=level)
                if not self._stale(state):
                    self._publish(state, preview)
                interactive = False
                frame = FrameSlot.fresh(state.camera, state.generation)
                pass_index = 0
            else:
                render_pass(state, pyramid, frame, pass_index)
                pass_index += 1
                if not self._stale(state):
                    self._publish(state, frame)
            if self._min_pass_time > 0.0:
                remaining = self._min_pass_time - (time.monotonic() - started)
                if remaining > 0:
                    time.sleep(remaining)
