"""Deterministic playback-state engines.

Four concerns live here, all modeled as pure functions from old state to
new state so transitions are replayable and testable:

* overlay display logic: the active/switched-on truth table, back-to-front
  draw ordering, and priority-based culling under a decoder budget;
* raster composition of overlay layers with global and per-pixel alpha;
* viewpoint switching: timeline handover modes, looping while a choice is
  awaited, selection windows with default rules, and GPS-based selection;
* piecewise-constant sampling of timed metadata tracks.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import DataError, ParseError, UsageError
from .geometry import Rect2D, ViewingOrientation
from .model import (
    GpsPosition,
    MetadataKind,
    Overlay,
    OverlayRenderingKind,
    Presentation,
    SwitchRule,
    TimedMetadataTrack,
    TimelineMode,
    Viewpoint,
)

EARTH_RADIUS_M = 6_371_000.0


class OverlayLookupError(DataError):
    """An overlay id has no entry in the supplied state mapping."""

    code = "OVERLAY_UNKNOWN"


class EssentialOverflowError(DataError):
    """More priority-0 overlays than the decoder capacity can hold."""

    code = "ESSENTIAL_OVERFLOW"

    def __init__(self, essential: int, capacity: int):
        super().__init__(
            f"capacity {capacity} cannot hold {essential} essential "
            f"overlays (short by {essential - capacity})")
        self.essential = essential
        self.capacity = capacity


class PlacementError(DataError):
    """A compose layer does not fit the background raster."""

    code = "PLACEMENT_INVALID"


class NoGpsCandidateError(DataError):
    """GPS selection was asked to choose among viewpoints without GPS."""

    code = "NO_CANDIDATE"


class RasterFormatError(ParseError):
    """PPM/PGM bytes that do not follow the expected binary layout."""

    code = "RASTER_FORMAT"


# ---------------------------------------------------------------------------
# overlay display state


@dataclass(frozen=True)
class OverlayState:
    """Per-overlay display switches.

    ``active`` is controlled by the content author or timeline metadata;
    ``switched_on`` is the user's toggle and starts true.  An overlay is
    displayed only when both hold.
    """

    active: bool = True
    switched_on: bool = True


def overlay_displayed(overlay: Union[Overlay, int],
                      states: Mapping[int, OverlayState]) -> bool:
    """Whether the overlay is shown: active and not switched off."""
    overlay_id = (overlay.overlay_id if isinstance(overlay, Overlay)
                  else overlay)
    try:
        state = states[overlay_id]
    except KeyError:
        raise OverlayLookupError(
            f"no state entry for overlay {overlay_id}") from None
    return state.active and state.switched_on


_SPHERE_KINDS = (
    OverlayRenderingKind.SPHERE_RELATIVE_OMNI,
    OverlayRenderingKind.SPHERE_RELATIVE_2D,
    OverlayRenderingKind.MESH_3D,
)


def _sphere_distance(overlay: Overlay) -> float:
    if overlay.rendering.kind is OverlayRenderingKind.SPHERE_RELATIVE_2D:
        return overlay.rendering.plane_position.distance
    return 1.0  # omni and mesh content sits on the unit sphere


def resolve_draw_order(overlays: Iterable[Overlay],
                       states: Mapping[int, OverlayState],
                       orientation: Optional[ViewingOrientation] = None,
                       ) -> list[Overlay]:
    """Displayed overlays in back-to-front paint order.

    Sphere-relative overlays are painted first, farthest from the sphere
    center first; overlays at equal distance, and separately the
    viewport-relative group, follow layering order ascending with overlay
    id as the final tie-break.  Placements are fixed on the sphere or
    viewport, so the viewing orientation does not affect the order; it is
    accepted for signature stability.
    """
    displayed = [o for o in overlays if overlay_displayed(o, states)]
    sphere = [o for o in displayed if o.rendering.kind in _SPHERE_KINDS]
    viewport = [o for o in displayed
                if o.rendering.kind is OverlayRenderingKind.VIEWPORT_RELATIVE]
    sphere.sort(key=lambda o: (-_sphere_distance(o),
                               o.properties.layering_order, o.overlay_id))
    viewport.sort(key=lambda o: (o.properties.layering_order, o.overlay_id))
    return sphere + viewport


def cull_by_priority(overlays: Iterable[Overlay],
                     capacity: int) -> tuple[Overlay, ...]:
    """The overlays to decode when only ``capacity`` decoders exist.

    Priority 0 marks an overlay as essential; all essentials are always
    retained.  Remaining slots go to the lowest priority values, ties to
    the smallest overlay id.  The result is sorted by (priority, id) and
    never depends on input order.
    """
    if capacity < 0:
        raise UsageError(f"capacity must be >= 0, got {capacity}")
    ranked = sorted(overlays,
                    key=lambda o: (o.properties.priority, o.overlay_id))
    essential = sum(1 for o in ranked if o.properties.priority == 0)
    if essential > capacity:
        raise EssentialOverflowError(essential, capacity)
    return tuple(ranked[:capacity])


# ---------------------------------------------------------------------------
# rasters and composition


@dataclass(frozen=True)
class Raster:
    """An RGBA image, 8 bits per channel, row-major from the top left."""

    width: int
    height: int
    pixels: bytes

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(
                f"raster dimensions must be positive, got "
                f"{self.width}x{self.height}")
        object.__setattr__(self, "pixels", bytes(self.pixels))
        expected = 4 * self.width * self.height
        if len(self.pixels) != expected:
            raise ValueError(
                f"pixel buffer holds {len(self.pixels)} bytes, "
                f"expected {expected}")

    @classmethod
    def filled(cls, width: int, height: int,
               rgba: tuple[int, int, int, int] = (0, 0, 0, 255)) -> "Raster":
        return cls(width, height, bytes(rgba) * (width * height))

    @classmethod
    def from_channels(cls, array) -> "Raster":
        arr = np.ascontiguousarray(array, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[2] != 4:
            raise ValueError(f"expected an RGBA array, got shape {arr.shape}")
        return cls(arr.shape[1], arr.shape[0], arr.tobytes())

    def channels(self) -> np.ndarray:
        """Pixels as a writable (height, width, 4) uint8 array."""
        flat = np.frombuffer(self.pixels, dtype=np.uint8)
        return flat.reshape(self.height, self.width, 4).copy()


@dataclass(frozen=True)
class ComposeLayer:
    """One overlay layer: what to draw, where, and how to blend it.

    ``opacity`` applies to every pixel; with ``use_alpha`` the layer's
    alpha plane additionally scales it per pixel.
    """

    raster: Raster
    placement: Rect2D
    opacity: float = 1.0
    use_alpha: bool = False


def compose(background: Raster,
            layers: Sequence[ComposeLayer]) -> Raster:
    """Blend ``layers`` over ``background`` in list order.

    Each channel mixes as alpha*src + (1-alpha)*dst, rounded half away
    from zero, so an opacity-0 layer is a byte-exact no-op and an opaque
    full-frame layer replaces the background outright.  Placements must
    match their raster's size and lie inside the background.
    """
    out = background.channels().astype(np.float64)
    for index, layer in enumerate(layers):
        x, y = int(layer.placement.x), int(layer.placement.y)
        w, h = int(layer.placement.width), int(layer.placement.height)
        if (w, h) != (layer.raster.width, layer.raster.height):
            raise PlacementError(
                f"layer {index} placement is {w}x{h} but its raster is "
                f"{layer.raster.width}x{layer.raster.height}")
        if x < 0 or y < 0 or x + w > background.width \
                or y + h > background.height:
            raise PlacementError(
                f"layer {index} at ({x}, {y}) size {w}x{h} falls outside "
                f"the {background.width}x{background.height} background")
        if not 0.0 <= layer.opacity <= 1.0:
            raise DataError(
                f"layer {index} opacity {layer.opacity} outside [0, 1]",
                code="OPACITY_OUT_OF_RANGE")
        src = layer.raster.channels().astype(np.float64)
        alpha = np.full((h, w, 1), float(layer.opacity))
        if layer.use_alpha:
            alpha = alpha * (src[:, :, 3:4] / 255.0)
        window = out[y:y + h, x:x + w, :]
        # Values are non-negative, so floor(v + 0.5) rounds half away
        # from zero.
        out[y:y + h, x:x + w, :] = np.floor(
            alpha * src + (1.0 - alpha) * window + 0.5)
    return Raster.from_channels(out.astype(np.uint8))


def write_ppm(raster: Raster) -> bytes:
    """Binary P6 bytes of the RGB channels (alpha has its own sidecar)."""
    header = f"P6\n{raster.width} {raster.height}\n255\n".encode("ascii")
    return header + raster.channels()[:, :, :3].tobytes()


def write_alpha_pgm(raster: Raster) -> bytes:
    """Binary P5 bytes of the alpha plane."""
    header = f"P5\n{raster.width} {raster.height}\n255\n".encode("ascii")
    return header + raster.channels()[:, :, 3].tobytes()


def _parse_pnm(data: bytes, magic: bytes, channels: int):
    if data[:2] != magic:
        raise RasterFormatError(
            f"expected {magic.decode('ascii')} data, got {data[:2]!r}")
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data):
            byte = data[pos:pos + 1]
            if byte == b"#":
                end = data.find(b"\n", pos)
                pos = len(data) if end < 0 else end
            elif byte.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise RasterFormatError("truncated header")
        try:
            fields.append(int(data[start:pos]))
        except ValueError:
            raise RasterFormatError(
                f"non-numeric header field {data[start:pos]!r}") from None
    pos += 1  # the single whitespace byte separating header from samples
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise RasterFormatError(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise RasterFormatError(f"only maxval 255 is supported, got {maxval}")
    body = data[pos:]
    expected = width * height * channels
    if len(body) != expected:
        raise RasterFormatError(
            f"sample data holds {len(body)} bytes, expected {expected}")
    grid = np.frombuffer(body, dtype=np.uint8).reshape(height, width,
                                                       channels)
    return width, height, grid


def read_ppm(ppm: bytes, alpha_pgm: Optional[bytes] = None) -> Raster:
    """Raster from binary P6 bytes, plus an optional P5 alpha sidecar.

    Without a sidecar the alpha plane is fully opaque.
    """
    width, height, rgb = _parse_pnm(ppm, b"P6", 3)
    if alpha_pgm is None:
        alpha = np.full((height, width, 1), 255, dtype=np.uint8)
    else:
        aw, ah, alpha = _parse_pnm(alpha_pgm, b"P5", 1)
        if (aw, ah) != (width, height):
            raise RasterFormatError(
                f"alpha plane is {aw}x{ah}, image is {width}x{height}")
    return Raster(width, height,
                  np.concatenate([rgb, alpha], axis=2).tobytes())


# ---------------------------------------------------------------------------
# viewpoint switching


@dataclass(frozen=True)
class PlaybackState:
    """Where playback currently stands.

    ``pending_window_ms`` counts down the time the user has left to pick
    a switch target; when it reaches zero during a tick, the current
    viewpoint's default rule fires.  None means no window is armed.
    """

    current_viewpoint_id: str
    media_time_ms: int = 0
    loop_count: int = 0
    orientation: ViewingOrientation = ViewingOrientation()
    pending_window_ms: Optional[int] = None

    def __post_init__(self):
        if self.media_time_ms < 0:
            raise ValueError(
                f"media_time_ms must be >= 0, got {self.media_time_ms}")
        if self.pending_window_ms is not None and self.pending_window_ms < 0:
            raise ValueError(
                f"pending_window_ms must be >= 0, got "
                f"{self.pending_window_ms}")


def _viewpoint(p: Presentation, viewpoint_id: str) -> Viewpoint:
    try:
        return p.viewpoint(viewpoint_id)
    except KeyError:
        raise UsageError(f"unknown viewpoint {viewpoint_id!r}",
                         code="VIEWPOINT_UNKNOWN") from None


def enter_viewpoint(p: Presentation, viewpoint_id: str,
                    media_time_ms: int = 0,
                    orientation: ViewingOrientation = ViewingOrientation(),
                    ) -> PlaybackState:
    """Fresh playback state inside ``viewpoint_id``.

    Arms the selection window when the viewpoint's default switch rule
    carries one.
    """
    vp = _viewpoint(p, viewpoint_id)
    default = vp.default_rule()
    window = default.selection_window_ms if default is not None else None
    return PlaybackState(viewpoint_id, media_time_ms, 0, orientation, window)


def switch_viewpoint(p: Presentation, state: PlaybackState,
                     rule: SwitchRule) -> PlaybackState:
    """Apply ``rule`` from the current viewpoint.

    Media time carries over per the rule's timeline mode, the loop
    counter restarts, and any pending selection window is cleared.
    Overlay on/off state lives outside PlaybackState and so survives the
    switch.
    """
    current = _viewpoint(p, state.current_viewpoint_id)
    if rule not in current.switch_rules:
        raise UsageError(
            f"rule targeting {rule.target_viewpoint_id!r} does not belong "
            f"to viewpoint {current.viewpoint_id!r}")
    _viewpoint(p, rule.target_viewpoint_id)
    if rule.timeline_mode is TimelineMode.CONTINUE_TIME:
        time_ms = state.media_time_ms
    elif rule.timeline_mode is TimelineMode.RESET_TO_ZERO:
        time_ms = 0
    else:
        time_ms = rule.offset_ms if rule.offset_ms is not None else 0
    return replace(state, current_viewpoint_id=rule.target_viewpoint_id,
                   media_time_ms=time_ms, loop_count=0,
                   pending_window_ms=None)


def arm_selection_window(p: Presentation,
                         state: PlaybackState) -> PlaybackState:
    """State with the current viewpoint's selection window armed.

    Unchanged when the viewpoint has no default rule or the rule has no
    window.
    """
    default = _viewpoint(p, state.current_viewpoint_id).default_rule()
    if default is None or default.selection_window_ms is None:
        return state
    return replace(state, pending_window_ms=default.selection_window_ms)


def _rule_for_target(vp: Viewpoint, target_id: str) -> SwitchRule:
    for rule in vp.switch_rules:
        if rule.target_viewpoint_id == target_id:
            return rule
    raise UsageError(
        f"viewpoint {vp.viewpoint_id!r} has no rule targeting "
        f"{target_id!r}")


def _advance_media(p: Presentation, state: PlaybackState, duration,
                   events: list[dict]) -> PlaybackState:
    """Advance media time, wrapping through the viewpoint's loop."""
    if duration <= 0:
        return state
    vp = _viewpoint(p, state.current_viewpoint_id)
    time_ms = state.media_time_ms + duration
    loops = state.loop_count
    loop = vp.loop
    if loop is not None:
        start, end = loop.loop_start_ms, loop.loop_end_ms
        span = end - start
        if span > 0 and state.media_time_ms < end <= time_ms:
            first = end - state.media_time_ms
            extra = duration - first
            needed = 1 + extra // span
            if loop.max_loops == 0:
                wraps = needed
            else:
                wraps = min(needed, max(loop.max_loops - loops, 0))
            if wraps > 0:
                if wraps == needed:
                    time_ms = start + extra % span
                else:
                    # Loop budget exhausted mid-advance: wrap the allowed
                    # number of times, then run past the loop end.
                    time_ms = start + extra - (wraps - 1) * span
                loops += wraps
                events.append({"event": "loop",
                               "viewpoint": vp.viewpoint_id,
                               "wraps": wraps,
                               "loop_count": loops,
                               "media_time_ms": time_ms})
    return replace(state, media_time_ms=time_ms, loop_count=loops)


def tick_events(p: Presentation, state: PlaybackState, dt_ms,
                user_choice: Optional[str] = None,
                ) -> tuple[PlaybackState, list[dict]]:
    """Advance playback, also returning the JSON-ready events that fired.

    ``user_choice`` names a target viewpoint and applies the matching
    switch rule of the current viewpoint immediately, before time
    advances.  A pending selection window counts down during the tick;
    if it lapses, the viewpoint's default rule fires at that instant and
    the remainder of the tick runs in the target viewpoint.
    """
    if dt_ms < 0:
        raise UsageError(f"dt_ms must be >= 0, got {dt_ms}")
    events: list[dict] = []
    if dt_ms == 0 and user_choice is None:
        return state, events
    if user_choice is not None:
        vp = _viewpoint(p, state.current_viewpoint_id)
        state = switch_viewpoint(p, state, _rule_for_target(vp, user_choice))
        events.append({"event": "switch", "reason": "user_choice",
                       "viewpoint": state.current_viewpoint_id,
                       "media_time_ms": state.media_time_ms})
    window = state.pending_window_ms
    if window is not None and dt_ms >= window:
        state = _advance_media(p, state, window, events)
        state = replace(state, pending_window_ms=None)
        dt_ms -= window
        default = _viewpoint(p, state.current_viewpoint_id).default_rule()
        if default is not None:
            state = switch_viewpoint(p, state, default)
            events.append({"event": "switch", "reason": "window_expired",
                           "viewpoint": state.current_viewpoint_id,
                           "media_time_ms": state.media_time_ms})
        else:
            events.append({"event": "window_expired",
                           "viewpoint": state.current_viewpoint_id,
                           "media_time_ms": state.media_time_ms})
    elif window is not None:
        state = replace(state, pending_window_ms=window - dt_ms)
    return _advance_media(p, state, dt_ms, events), events


def tick(p: Presentation, state: PlaybackState, dt_ms,
         user_choice: Optional[str] = None) -> PlaybackState:
    """Advance playback by ``dt_ms``; see tick_events for the rules."""
    state, _ = tick_events(p, state, dt_ms, user_choice)
    return state


def run_script(p: Presentation, state: PlaybackState,
               script: Iterable[tuple[int, Optional[str]]],
               ) -> tuple[PlaybackState, list[dict]]:
    """Run (dt_ms, user_choice) steps, concatenating the fired events."""
    events: list[dict] = []
    for dt_ms, choice in script:
        state, fired = tick_events(p, state, dt_ms, choice)
        events.extend(fired)
    return state, events


# ---------------------------------------------------------------------------
# GPS selection


def haversine_distance_m(a: GpsPosition, b: GpsPosition) -> float:
    """Great-circle distance in meters on the mean-radius Earth sphere.

    Altitude is ignored; this picks among viewpoints, it does not
    navigate.
    """
    lat1, lon1, lat2, lon2 = map(
        math.radians, (a.latitude, a.longitude, b.latitude, b.longitude))
    h = (math.sin((lat2 - lat1) / 2.0) ** 2
         + math.cos(lat1) * math.cos(lat2)
         * math.sin((lon2 - lon1) / 2.0) ** 2)
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def select_viewpoint_by_gps(viewpoints: Iterable[Viewpoint],
                            device: GpsPosition) -> str:
    """Id of the GPS-bearing viewpoint nearest to the device.

    Distance ties go to the lexicographically smaller viewpoint id;
    viewpoints without GPS are never candidates.
    """
    best = None
    for vp in viewpoints:
        if vp.gps is None:
            continue
        key = (haversine_distance_m(vp.gps, device), vp.viewpoint_id)
        if best is None or key < best:
            best = key
    if best is None:
        raise NoGpsCandidateError("no viewpoint carries a GPS position")
    return best[1]


# ---------------------------------------------------------------------------
# timed metadata sampling


class _BeforeFirstSample:
    """Sentinel: the query time precedes the track's first sample."""

    __slots__ = ()

    def __repr__(self):
        return "BEFORE_FIRST_SAMPLE"


BEFORE_FIRST_SAMPLE = _BeforeFirstSample()


def sample_timed_metadata(track: TimedMetadataTrack, t_ms):
    """The payload in effect at ``t_ms``.

    Sampling is piecewise constant and inclusive at sample times: the
    last sample with time <= t applies.  Ahead of the first sample the
    BEFORE_FIRST_SAMPLE sentinel is returned so callers can fall back to
    their defaults.
    """
    if not track.samples:
        raise UsageError(f"track {track.track_id} has no samples")
    times = [s.time_ms for s in track.samples]
    index = bisect_right(times, t_ms) - 1
    if index < 0:
        return BEFORE_FIRST_SAMPLE
    return track.samples[index].payload


def overlay_states_at(p: Presentation, t_ms,
                      switched_on: Optional[Mapping[int, bool]] = None,
                      ) -> dict[int, OverlayState]:
    """Overlay states at ``t_ms``, merged with the user's toggles.

    Every overlay starts active; overlay-controls tracks override that
    from their first sample at or before ``t_ms`` onward.  ``switched_on``
    carries the user's on/off choices (default on).
    """
    toggles = dict(switched_on or {})
    active = {o.overlay_id: True for o in p.overlays}
    for track in p.timed_metadata:
        if track.kind is not MetadataKind.OVERLAY_CONTROLS:
            continue
        if not track.samples:
            continue
        payload = sample_timed_metadata(track, t_ms)
        if payload is BEFORE_FIRST_SAMPLE:
            continue
        for entry in payload.entries:
            if entry.overlay_id in active:
                active[entry.overlay_id] = entry.active
    return {overlay_id: OverlayState(flag, toggles.get(overlay_id, True))
            for overlay_id, flag in active.items()}
