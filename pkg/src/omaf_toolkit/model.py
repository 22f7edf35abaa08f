"""Document model for omnidirectional presentations.

The types below mirror the metadata an OMAF 2nd-edition presentation
carries: track facts for conformance checking, viewpoints with switching
and looping rules, overlays with source/rendering/interaction data,
timed metadata tracks, sub-picture tile groups, and the viewing space.

Values are immutable.  Constructors never validate cross-references;
`validate_presentation` walks a document and reports every violation as
a `ValidationIssue` so that callers can collect all problems in one
pass.  Angle normalization is likewise explicit (see
`geometry.normalize_orientation`), never implicit.

The JSON manifest produced by `presentation_to_manifest` mirrors these
types field for field; `presentation_from_manifest` inverts it.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field
from enum import Enum
from functools import total_ordering
from typing import Optional, Union

from .errors import ParseError
from .geometry import PictureDims, Rect2D, SphereRegion, ViewingOrientation


class ManifestError(ParseError):
    """Raised when a JSON manifest does not match the documented schema."""


# ---------------------------------------------------------------------------
# enumerations


class MediaKind(str, Enum):
    VIDEO = "video"
    AUDIO = "audio"
    IMAGE = "image"
    TIMED_TEXT = "timed_text"
    TIMED_METADATA = "timed_metadata"


class Codec(str, Enum):
    HEVC_MAIN10 = "HEVC_Main10"
    AVC_PROGRESSIVE_HIGH = "AVC_ProgressiveHigh"
    AVC_HIGH = "AVC_High"
    JPEG = "JPEG"
    MPEGH_LC = "MPEGH_LC"
    AAC_HEV2 = "AAC_HEv2"
    IMSC1_TEXT = "IMSC1_Text"
    IMSC1_IMAGE = "IMSC1_Image"
    WEBVTT = "WebVTT"
    METADATA = "metadata"


class Projection(str, Enum):
    ERP = "ERP"
    CMP = "CMP"
    FISHEYE = "fisheye"
    MESH = "mesh"
    NONE = "none"


class TimelineMode(str, Enum):
    CONTINUE_TIME = "continue_time"
    RESET_TO_ZERO = "reset_to_zero"
    OFFSET = "offset"


class OverlaySourceKind(str, Enum):
    VIDEO_TRACK = "video_track"
    IMAGE_ITEM = "image_item"
    REGION_OF_TRACK = "region_of_track"
    REGION_OF_IMAGE = "region_of_image"
    RECOMMENDED_VIEWPORT = "recommended_viewport"
    EXTERNAL = "external"


class OverlayRenderingKind(str, Enum):
    VIEWPORT_RELATIVE = "viewport_relative"
    SPHERE_RELATIVE_OMNI = "sphere_relative_omni"
    SPHERE_RELATIVE_2D = "sphere_relative_2d"
    MESH_3D = "mesh_3d"


class ControlKind(str, Enum):
    MOVE = "move"
    RESIZE = "resize"
    ROTATE = "rotate"
    SWITCH_ON_OFF = "switch_on_off"
    CHANGE_OPACITY = "change_opacity"


class ControlsTiming(str, Enum):
    STATIC = "static"
    TIMED = "timed"


class MetadataKind(str, Enum):
    INITIAL_VIEWING_ORIENTATION = "initial_viewing_orientation"
    RECOMMENDED_VIEWPORT = "recommended_viewport"
    RWQR = "rwqr"
    ERP_REGION = "erp_region"
    DYNAMIC_VIEWPOINT = "dynamic_viewpoint"
    OVERLAY_CONTROLS = "overlay_controls"


class ValueKind(str, Enum):
    QUALITY_RANK = "quality_rank"
    PRIORITY = "priority"
    HEATMAP = "heatmap"


class ViewingSpaceShape(str, Enum):
    SPHERE = "sphere"
    CUBOID = "cuboid"


#: codecs that carry a profile level
LEVELED_CODECS = frozenset(
    {
        Codec.HEVC_MAIN10,
        Codec.AVC_PROGRESSIVE_HIGH,
        Codec.AVC_HIGH,
        Codec.MPEGH_LC,
        Codec.AAC_HEV2,
    }
)

#: codecs admissible per media kind
KIND_CODECS = {
    MediaKind.VIDEO: frozenset(
        {Codec.HEVC_MAIN10, Codec.AVC_PROGRESSIVE_HIGH, Codec.AVC_HIGH}
    ),
    MediaKind.IMAGE: frozenset({Codec.HEVC_MAIN10, Codec.JPEG}),
    MediaKind.AUDIO: frozenset({Codec.MPEGH_LC, Codec.AAC_HEV2}),
    MediaKind.TIMED_TEXT: frozenset(
        {Codec.IMSC1_TEXT, Codec.IMSC1_IMAGE, Codec.WEBVTT}
    ),
    MediaKind.TIMED_METADATA: frozenset({Codec.METADATA}),
}


# ---------------------------------------------------------------------------
# leaf value types


@total_ordering
@dataclass(frozen=True)
class Level:
    """Codec profile level such as 5.1, compared as integer pairs."""

    major: int
    minor: int = 0

    @classmethod
    def parse(cls, text: str) -> "Level":
        head, _, tail = str(text).partition(".")
        try:
            return cls(int(head), int(tail) if tail else 0)
        except ValueError as exc:
            raise ManifestError(f"bad level {text!r}") from exc

    def __str__(self) -> str:
        return f"{self.major}.{self.minor}"

    def __lt__(self, other: "Level") -> bool:
        return (self.major, self.minor) < (other.major, other.minor)


@dataclass(frozen=True)
class GpsPosition:
    """Geographic position in degrees; altitude in meters when known."""

    latitude: float
    longitude: float
    altitude: Optional[float] = None


@dataclass(frozen=True)
class NormalizedRect:
    """Rectangle in fractions of a reference surface, top-left origin."""

    x: float
    y: float
    width: float
    height: float


@dataclass(frozen=True)
class PlanePosition:
    """Placement of a planar overlay inside the unit sphere."""

    center: ViewingOrientation
    distance: float
    width: float
    height: float


@dataclass(frozen=True)
class RotationYpr:
    """Yaw/pitch/roll of a viewpoint's axes against the common frame."""

    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0


# ---------------------------------------------------------------------------
# tracks


@dataclass(frozen=True)
class TrackDescriptor:
    """Codec/profile facts about one media track.

    `level` is present exactly for codecs in LEVELED_CODECS, `projection`
    exactly for visual kinds, and `coverage` only for projected video or
    images; `validate_presentation` enforces all three rules.
    """

    track_id: int
    media_kind: MediaKind
    codec: Codec
    level: Optional[Level] = None
    projection: Optional[Projection] = None
    stereo: bool = False
    dims: Optional[PictureDims] = None
    coverage: Optional[SphereRegion] = None
    sample_rate_hz: Optional[int] = None


# ---------------------------------------------------------------------------
# viewpoints


@dataclass(frozen=True)
class LoopInfo:
    """Playback repetition window; max_loops 0 means unbounded."""

    loop_start_ms: int
    loop_end_ms: int
    max_loops: int = 0


@dataclass(frozen=True)
class SwitchRule:
    """One way to leave a viewpoint for `target_viewpoint_id`.

    `activation_region` is the user-selectable hotspot, if any.  A rule
    with `is_default` fires when a selection window lapses without user
    input.  `offset_ms` is meaningful only for the `offset` timeline
    mode.
    """

    target_viewpoint_id: str
    timeline_mode: TimelineMode = TimelineMode.CONTINUE_TIME
    activation_region: Optional[SphereRegion] = None
    offset_ms: Optional[int] = None
    is_default: bool = False
    selection_window_ms: Optional[int] = None


@dataclass(frozen=True)
class Viewpoint:
    """One omnidirectional camera position within the presentation."""

    viewpoint_id: str
    label: str = ""
    position_xyz: tuple[int, int, int] = (0, 0, 0)
    gps: Optional[GpsPosition] = None
    orientation: RotationYpr = RotationYpr()
    north_offset: Optional[float] = None
    group_id: int = 0
    switch_rules: tuple[SwitchRule, ...] = ()
    loop: Optional[LoopInfo] = None
    dynamic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "position_xyz", tuple(self.position_xyz))
        object.__setattr__(self, "switch_rules", tuple(self.switch_rules))

    def default_rule(self) -> Optional[SwitchRule]:
        for rule in self.switch_rules:
            if rule.is_default:
                return rule
        return None


# ---------------------------------------------------------------------------
# overlays


@dataclass(frozen=True)
class OverlaySource:
    """What an overlay shows: a track, an image item, a region of
    either, a recommended-viewport track, or an external resource."""

    kind: OverlaySourceKind
    ref_id: Optional[int] = None
    region: Optional[Rect2D] = None


@dataclass(frozen=True)
class OverlayRendering:
    """Where an overlay is drawn; exactly one placement field is set,
    matching `kind` (mesh_3d carries no placement here)."""

    kind: OverlayRenderingKind
    viewport_rect: Optional[NormalizedRect] = None
    sphere_position: Optional[SphereRegion] = None
    plane_position: Optional[PlanePosition] = None


@dataclass(frozen=True)
class OverlayProperties:
    """Rendering properties; priority 0 marks an essential overlay."""

    layering_order: int = 0
    opacity: float = 1.0
    priority: int = 0
    has_alpha_plane: bool = False


@dataclass(frozen=True)
class OverlayInteraction:
    """User interactions the content author permits on an overlay."""

    allowed_controls: frozenset[ControlKind] = frozenset()
    label: Optional[str] = None
    toggle_region: Optional[SphereRegion] = None

    def __post_init__(self):
        object.__setattr__(
            self, "allowed_controls", frozenset(self.allowed_controls)
        )


@dataclass(frozen=True)
class Overlay:
    overlay_id: int
    source: OverlaySource
    rendering: OverlayRendering
    properties: OverlayProperties = OverlayProperties()
    interaction: OverlayInteraction = OverlayInteraction()
    controls_timing: ControlsTiming = ControlsTiming.STATIC


# ---------------------------------------------------------------------------
# timed metadata


@dataclass(frozen=True)
class RwqrEntry:
    """Quality rank for one sphere or 2D region; lower rank is better."""

    region: Union[SphereRegion, Rect2D]
    quality_rank: int


@dataclass(frozen=True)
class RwqrPayload:
    entries: tuple[RwqrEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))


@dataclass(frozen=True)
class ErpRegionPayload:
    """Per-cell values over a rectangular grid mapped onto the ERP
    picture, row-major."""

    grid_cols: int
    grid_rows: int
    cell_values: tuple[float, ...]
    value_kind: ValueKind

    def __post_init__(self):
        object.__setattr__(self, "cell_values", tuple(self.cell_values))


@dataclass(frozen=True)
class DynamicViewpointPayload:
    """Time-varying position of a dynamic viewpoint."""

    viewpoint_id: str
    position_xyz: tuple[int, int, int]
    gps: Optional[GpsPosition] = None

    def __post_init__(self):
        object.__setattr__(self, "position_xyz", tuple(self.position_xyz))


@dataclass(frozen=True)
class OverlayControlEntry:
    overlay_id: int
    active: bool
    opacity: Optional[float] = None


@dataclass(frozen=True)
class OverlayControlsPayload:
    entries: tuple[OverlayControlEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))


#: payload python type accepted for each metadata kind
PAYLOAD_TYPES = {
    MetadataKind.INITIAL_VIEWING_ORIENTATION: ViewingOrientation,
    MetadataKind.RECOMMENDED_VIEWPORT: SphereRegion,
    MetadataKind.RWQR: RwqrPayload,
    MetadataKind.ERP_REGION: ErpRegionPayload,
    MetadataKind.DYNAMIC_VIEWPOINT: DynamicViewpointPayload,
    MetadataKind.OVERLAY_CONTROLS: OverlayControlsPayload,
}


@dataclass(frozen=True)
class MetadataSample:
    time_ms: int
    payload: object


@dataclass(frozen=True)
class TimedMetadataTrack:
    track_id: int
    kind: MetadataKind
    samples: tuple[MetadataSample, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))


# ---------------------------------------------------------------------------
# tile groups and viewing space


@dataclass(frozen=True)
class TileMember:
    """One sub-picture track and its slot in the full-picture grid."""

    track_id: int
    grid_position: tuple[int, int]
    source_rect: Rect2D

    def __post_init__(self):
        object.__setattr__(self, "grid_position", tuple(self.grid_position))


@dataclass(frozen=True)
class TileGroup:
    group_id: int
    members: tuple[TileMember, ...]

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))


@dataclass(frozen=True)
class ViewingSpace:
    """Valid head positions: a sphere (one radius) or a cuboid (three
    half-extents), in millimeters."""

    shape: ViewingSpaceShape
    extent_mm: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "extent_mm", tuple(self.extent_mm))


# ---------------------------------------------------------------------------
# the root document


@dataclass(frozen=True)
class Presentation:
    """Root of an omnidirectional presentation document.

    `extras` holds (position, raw bytes) pairs for container boxes the
    serializer did not recognize, so that foreign data survives a
    decode/encode round trip untouched.
    """

    brands: frozenset[str] = frozenset()
    tracks: tuple[TrackDescriptor, ...] = ()
    viewpoints: tuple[Viewpoint, ...] = ()
    overlays: tuple[Overlay, ...] = ()
    timed_metadata: tuple[TimedMetadataTrack, ...] = ()
    tile_groups: tuple[TileGroup, ...] = ()
    viewing_space: Optional[ViewingSpace] = None
    extras: tuple[tuple[int, bytes], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "brands", frozenset(self.brands))
        for name in ("tracks", "viewpoints", "overlays", "timed_metadata",
                     "tile_groups", "extras"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def viewpoint(self, viewpoint_id: str) -> Viewpoint:
        for vp in self.viewpoints:
            if vp.viewpoint_id == viewpoint_id:
                return vp
        raise KeyError(viewpoint_id)

    def overlay(self, overlay_id: int) -> Overlay:
        for ov in self.overlays:
            if ov.overlay_id == overlay_id:
                return ov
        raise KeyError(overlay_id)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" or "warning"
    code: str
    message: str
    path: str

    def as_dict(self) -> dict:
        return {
            "severity": self.severity,
            "code": self.code,
            "message": self.message,
            "path": self.path,
        }


def error_count(report: list[ValidationIssue]) -> int:
    return sum(1 for issue in report if issue.severity == "error")


def rect_partition_bounds(rects) -> Optional[Rect2D]:
    """Bounding rectangle if `rects` tile it exactly, else None.

    Exact tiling means: all rectangles have positive size, none overlap,
    and their union fills the bounding box without gaps.
    """
    rects = list(rects)
    if not rects:
        return None
    for r in rects:
        if r.width <= 0 or r.height <= 0:
            return None
    x0 = min(r.x for r in rects)
    y0 = min(r.y for r in rects)
    x1 = max(r.x + r.width for r in rects)
    y1 = max(r.y + r.height for r in rects)
    area = sum(r.width * r.height for r in rects)
    if area != (x1 - x0) * (y1 - y0):
        return None
    for i, a in enumerate(rects):
        for b in rects[i + 1:]:
            if (a.x < b.x + b.width and b.x < a.x + a.width
                    and a.y < b.y + b.height and b.y < a.y + a.height):
                return None
    return Rect2D(x0, y0, x1 - x0, y1 - y0)


class _Report:
    def __init__(self):
        self.issues: list[ValidationIssue] = []

    def error(self, code: str, message: str, path: str):
        self.issues.append(ValidationIssue("error", code, message, path))

    def warn(self, code: str, message: str, path: str):
        self.issues.append(ValidationIssue("warning", code, message, path))


def _check_region(rep: _Report, region: SphereRegion, path: str):
    c = region.center
    if not (-180 <= c.azimuth < 180 and -90 <= c.elevation <= 90
            and -180 <= c.tilt < 180):
        rep.error("ANGLE_OUT_OF_RANGE", "region center not normalized", path)
    if not (0 < region.azimuth_range <= 360):
        rep.error("ANGLE_OUT_OF_RANGE",
                  f"azimuth_range {region.azimuth_range} not in (0, 360]",
                  path)
    if not (0 < region.elevation_range <= 180):
        rep.error("ANGLE_OUT_OF_RANGE",
                  f"elevation_range {region.elevation_range} not in (0, 180]",
                  path)


def _check_rect(rep: _Report, rect: Rect2D, path: str,
                dims: Optional[PictureDims] = None):
    if rect.width <= 0 or rect.height <= 0 or rect.x < 0 or rect.y < 0:
        rep.error("RECT_INVALID",
                  f"rect {rect.x},{rect.y} {rect.width}x{rect.height} "
                  "has non-positive size or negative origin", path)
    elif dims is not None and not rect.fits_within(dims):
        rep.error("RECT_OUT_OF_BOUNDS",
                  f"rect exceeds the {dims.width}x{dims.height} picture",
                  path)


def _check_gps(rep: _Report, gps: GpsPosition, path: str):
    if not (-90 <= gps.latitude <= 90):
        rep.error("GPS_OUT_OF_RANGE",
                  f"latitude {gps.latitude} not in [-90, 90]", path)
    if not (-180 <= gps.longitude < 180):
        rep.error("GPS_OUT_OF_RANGE",
                  f"longitude {gps.longitude} not in [-180, 180)", path)


def _check_track(rep: _Report, track: TrackDescriptor, path: str):
    if track.track_id <= 0:
        rep.error("ID_NOT_POSITIVE",
                  f"track_id {track.track_id} must be positive",
                  f"{path}.track_id")
    if track.codec not in KIND_CODECS[track.media_kind]:
        rep.error("CODEC_KIND_MISMATCH",
                  f"codec {track.codec.value} not valid for "
                  f"{track.media_kind.value} tracks", f"{path}.codec")
    has_level = track.level is not None
    if has_level != (track.codec in LEVELED_CODECS):
        code = "LEVEL_UNEXPECTED" if has_level else "LEVEL_MISSING"
        rep.error(code,
                  f"codec {track.codec.value} "
                  f"{'carries no' if has_level else 'requires a'} level",
                  f"{path}.level")
    visual = track.media_kind in (MediaKind.VIDEO, MediaKind.IMAGE)
    if (track.projection is not None) != visual:
        code = "PROJECTION_MISSING" if visual else "PROJECTION_UNEXPECTED"
        rep.error(code,
                  "projection is required for video/image tracks "
                  "and only for them", f"{path}.projection")
    if track.coverage is not None:
        if track.projection not in (Projection.ERP, Projection.CMP):
            rep.error("COVERAGE_UNEXPECTED",
                      "coverage requires ERP or CMP projection",
                      f"{path}.coverage")
        else:
            _check_region(rep, track.coverage, f"{path}.coverage")
    if track.dims is not None:
        if track.dims.width <= 0 or track.dims.height <= 0:
            rep.error("DIMS_INVALID",
                      f"dims {track.dims.width}x{track.dims.height} "
                      "must be positive", f"{path}.dims")
        elif (track.projection is Projection.ERP
                and track.dims.width != 2 * track.dims.height):
            rep.warn("ERP_ASPECT",
                     f"ERP picture {track.dims.width}x{track.dims.height} "
                     "is not 2:1", f"{path}.dims")
    if track.sample_rate_hz is not None and track.sample_rate_hz <= 0:
        rep.error("SAMPLE_RATE_INVALID",
                  f"sample_rate_hz {track.sample_rate_hz} must be positive",
                  f"{path}.sample_rate_hz")


def _check_viewpoint(rep: _Report, p: Presentation, vp: Viewpoint, path: str,
                     viewpoint_ids: set):
    if not vp.viewpoint_id:
        rep.error("ID_EMPTY", "viewpoint_id must be non-empty",
                  f"{path}.viewpoint_id")
    if vp.gps is not None:
        _check_gps(rep, vp.gps, f"{path}.gps")
    default_seen = False
    for j, rule in enumerate(vp.switch_rules):
        rpath = f"{path}.switch_rules[{j}]"
        if rule.target_viewpoint_id not in viewpoint_ids:
            rep.error("DANGLING_REF",
                      f"switch target {rule.target_viewpoint_id!r} "
                      "is not a viewpoint", f"{rpath}.target_viewpoint_id")
        if rule.activation_region is not None:
            _check_region(rep, rule.activation_region,
                          f"{rpath}.activation_region")
        needs_offset = rule.timeline_mode is TimelineMode.OFFSET
        if (rule.offset_ms is not None) != needs_offset:
            rep.error("OFFSET_MODE_MISMATCH",
                      "offset_ms is required exactly for the offset "
                      "timeline mode", f"{rpath}.offset_ms")
        elif needs_offset and rule.offset_ms < 0:
            rep.error("OFFSET_INVALID",
                      f"offset_ms {rule.offset_ms} must be >= 0",
                      f"{rpath}.offset_ms")
        if rule.is_default:
            if default_seen:
                rep.error("MULTIPLE_DEFAULT_RULES",
                          "viewpoint has more than one default switch rule",
                          f"{rpath}.is_default")
            default_seen = True
        if (rule.selection_window_ms is not None
                and rule.selection_window_ms <= 0):
            rep.error("SELECTION_WINDOW_INVALID",
                      f"selection_window_ms {rule.selection_window_ms} "
                      "must be > 0", f"{rpath}.selection_window_ms")
    if vp.loop is not None:
        lp = vp.loop
        if not (0 <= lp.loop_start_ms < lp.loop_end_ms) or lp.max_loops < 0:
            rep.error("LOOP_RANGE_INVALID",
                      f"loop [{lp.loop_start_ms}, {lp.loop_end_ms}) "
                      f"max_loops {lp.max_loops} is ill-formed",
                      f"{path}.loop")
    if vp.dynamic:
        serviced = any(
            tm.kind is MetadataKind.DYNAMIC_VIEWPOINT
            and any(s.payload.viewpoint_id == vp.viewpoint_id
                    for s in tm.samples
                    if isinstance(s.payload, DynamicViewpointPayload))
            for tm in p.timed_metadata)
        if not serviced:
            rep.error("DYNAMIC_NO_TRACK",
                      f"dynamic viewpoint {vp.viewpoint_id!r} has no "
                      "dynamic_viewpoint metadata track", f"{path}.dynamic")


def _source_target_kinds(kind: OverlaySourceKind):
    if kind in (OverlaySourceKind.VIDEO_TRACK,
                OverlaySourceKind.REGION_OF_TRACK):
        return (MediaKind.VIDEO,)
    if kind in (OverlaySourceKind.IMAGE_ITEM,
                OverlaySourceKind.REGION_OF_IMAGE):
        return (MediaKind.IMAGE,)
    return ()


def _check_overlay(rep: _Report, p: Presentation, ov: Overlay, path: str,
                   tracks_by_id: dict):
    if ov.overlay_id <= 0:
        rep.error("ID_NOT_POSITIVE",
                  f"overlay_id {ov.overlay_id} must be positive",
                  f"{path}.overlay_id")
    src = ov.source
    spath = f"{path}.source"
    external = src.kind is OverlaySourceKind.EXTERNAL
    if external:
        if src.ref_id is not None:
            rep.error("SOURCE_FIELDS_MISMATCH",
                      "external sources carry no ref_id", f"{spath}.ref_id")
    elif src.ref_id is None:
        rep.error("SOURCE_FIELDS_MISMATCH",
                  f"{src.kind.value} sources require ref_id",
                  f"{spath}.ref_id")
    elif src.kind is OverlaySourceKind.RECOMMENDED_VIEWPORT:
        target = next((tm for tm in p.timed_metadata
                       if tm.track_id == src.ref_id), None)
        if target is None:
            rep.error("DANGLING_REF",
                      f"ref_id {src.ref_id} is not a timed metadata track",
                      f"{spath}.ref_id")
        elif target.kind is not MetadataKind.RECOMMENDED_VIEWPORT:
            rep.error("REF_KIND_MISMATCH",
                      f"track {src.ref_id} is a {target.kind.value} track, "
                      "not recommended_viewport", f"{spath}.ref_id")
    else:
        target = tracks_by_id.get(src.ref_id)
        wanted = _source_target_kinds(src.kind)
        if target is None:
            rep.error("DANGLING_REF",
                      f"ref_id {src.ref_id} is not a track",
                      f"{spath}.ref_id")
        elif wanted and target.media_kind not in wanted:
            rep.error("REF_KIND_MISMATCH",
                      f"track {src.ref_id} is {target.media_kind.value}, "
                      f"expected {wanted[0].value}", f"{spath}.ref_id")
    needs_region = src.kind in (OverlaySourceKind.REGION_OF_TRACK,
                                OverlaySourceKind.REGION_OF_IMAGE)
    if (src.region is not None) != needs_region:
        rep.error("SOURCE_FIELDS_MISMATCH",
                  "source region is required exactly for region_of_* kinds",
                  f"{spath}.region")
    elif needs_region:
        target = tracks_by_id.get(src.ref_id)
        dims = target.dims if target is not None else None
        _check_rect(rep, src.region, f"{spath}.region", dims)

    rnd = ov.rendering
    rpath = f"{path}.rendering"
    expected = {
        OverlayRenderingKind.VIEWPORT_RELATIVE: "viewport_rect",
        OverlayRenderingKind.SPHERE_RELATIVE_OMNI: "sphere_position",
        OverlayRenderingKind.SPHERE_RELATIVE_2D: "plane_position",
        OverlayRenderingKind.MESH_3D: None,
    }[rnd.kind]
    for name in ("viewport_rect", "sphere_position", "plane_position"):
        present = getattr(rnd, name) is not None
        if present != (name == expected):
            rep.error("RENDERING_FIELDS_MISMATCH",
                      f"{rnd.kind.value} rendering "
                      f"{'requires' if name == expected else 'excludes'} "
                      f"{name}", f"{rpath}.{name}")
    if rnd.viewport_rect is not None:
        vr = rnd.viewport_rect
        ok = (0 <= vr.x and 0 <= vr.y and vr.width > 0 and vr.height > 0
              and vr.x + vr.width <= 1 and vr.y + vr.height <= 1)
        if not ok:
            rep.error("VIEWPORT_RECT_INVALID",
                      "viewport_rect must lie within the unit square with "
                      "positive size", f"{rpath}.viewport_rect")
    if rnd.sphere_position is not None:
        _check_region(rep, rnd.sphere_position, f"{rpath}.sphere_position")
    if rnd.plane_position is not None:
        pp = rnd.plane_position
        if not (0 < pp.distance <= 1):
            rep.error("DISTANCE_OUT_OF_RANGE",
                      f"plane distance {pp.distance} not in (0, 1]",
                      f"{rpath}.plane_position.distance")
        if pp.width <= 0 or pp.height <= 0:
            rep.error("PLANE_SIZE_INVALID",
                      "plane width/height must be positive",
                      f"{rpath}.plane_position")

    props = ov.properties
    if not (0 <= props.opacity <= 1):
        rep.error("OPACITY_OUT_OF_RANGE",
                  f"opacity {props.opacity} not in [0, 1]",
                  f"{path}.properties.opacity")
    if props.priority < 0:
        rep.error("PRIORITY_NEGATIVE",
                  f"priority {props.priority} must be >= 0",
                  f"{path}.properties.priority")

    inter = ov.interaction
    if inter.toggle_region is not None:
        if ControlKind.SWITCH_ON_OFF not in inter.allowed_controls:
            rep.error("TOGGLE_WITHOUT_SWITCH",
                      "toggle_region requires the switch_on_off control",
                      f"{path}.interaction.toggle_region")
        _check_region(rep, inter.toggle_region,
                      f"{path}.interaction.toggle_region")

    if ov.controls_timing is ControlsTiming.TIMED:
        serviced = any(
            tm.kind is MetadataKind.OVERLAY_CONTROLS
            and any(isinstance(s.payload, OverlayControlsPayload)
                    and any(e.overlay_id == ov.overlay_id
                            for e in s.payload.entries)
                    for s in tm.samples)
            for tm in p.timed_metadata)
        if not serviced:
            rep.error("TIMED_CONTROLS_NO_TRACK",
                      f"overlay {ov.overlay_id} has timed controls but no "
                      "overlay_controls metadata track mentions it",
                      f"{path}.controls_timing")


def _check_payload(rep: _Report, p: Presentation, kind: MetadataKind,
                   payload, path: str, viewpoint_ids: set, overlay_ids: set):
    expected = PAYLOAD_TYPES[kind]
    if not isinstance(payload, expected):
        rep.error("PAYLOAD_KIND_MISMATCH",
                  f"{kind.value} sample carries "
                  f"{type(payload).__name__}, not {expected.__name__}", path)
        return
    if kind is MetadataKind.INITIAL_VIEWING_ORIENTATION:
        if not payload.is_normalized():
            rep.error("ANGLE_OUT_OF_RANGE",
                      "orientation sample not normalized", path)
    elif kind is MetadataKind.RECOMMENDED_VIEWPORT:
        _check_region(rep, payload, path)
    elif kind is MetadataKind.RWQR:
        if not payload.entries:
            rep.error("RWQR_EMPTY", "rwqr sample has no entries", path)
        for k, entry in enumerate(payload.entries):
            epath = f"{path}.entries[{k}]"
            if entry.quality_rank <= 0:
                rep.error("RWQR_RANK_INVALID",
                          f"quality_rank {entry.quality_rank} must be "
                          "positive", f"{epath}.quality_rank")
            if isinstance(entry.region, SphereRegion):
                _check_region(rep, entry.region, f"{epath}.region")
            else:
                _check_rect(rep, entry.region, f"{epath}.region")
    elif kind is MetadataKind.ERP_REGION:
        if payload.grid_cols <= 0 or payload.grid_rows <= 0:
            rep.error("GRID_SIZE_MISMATCH",
                      "grid dimensions must be positive", path)
        elif len(payload.cell_values) != payload.grid_cols * payload.grid_rows:
            rep.error("GRID_SIZE_MISMATCH",
                      f"{len(payload.cell_values)} cell values for a "
                      f"{payload.grid_cols}x{payload.grid_rows} grid", path)
        for k, value in enumerate(payload.cell_values):
            if payload.value_kind is ValueKind.HEATMAP:
                bad = not (value >= 0)
            elif payload.value_kind is ValueKind.QUALITY_RANK:
                bad = value != int(value) or value < 1
            else:
                bad = value != int(value) or value < 0
            if bad:
                rep.error("CELL_VALUE_INVALID",
                          f"cell value {value} invalid for "
                          f"{payload.value_kind.value}",
                          f"{path}.cell_values[{k}]")
    elif kind is MetadataKind.DYNAMIC_VIEWPOINT:
        if payload.viewpoint_id not in viewpoint_ids:
            rep.error("DANGLING_REF",
                      f"sample references unknown viewpoint "
                      f"{payload.viewpoint_id!r}", f"{path}.viewpoint_id")
        if payload.gps is not None:
            _check_gps(rep, payload.gps, f"{path}.gps")
    elif kind is MetadataKind.OVERLAY_CONTROLS:
        for k, entry in enumerate(payload.entries):
            epath = f"{path}.entries[{k}]"
            if entry.overlay_id not in overlay_ids:
                rep.error("DANGLING_REF",
                          f"control entry references unknown overlay "
                          f"{entry.overlay_id}", f"{epath}.overlay_id")
            if entry.opacity is not None and not (0 <= entry.opacity <= 1):
                rep.error("OPACITY_OUT_OF_RANGE",
                          f"opacity {entry.opacity} not in [0, 1]",
                          f"{epath}.opacity")


def validate_presentation(p: Presentation) -> list[ValidationIssue]:
    """Check every document invariant; problems become report entries.

    The report lists issues in document order and is deterministic: the
    same presentation always yields the same report.  An empty error
    list (warnings aside) means the document is well-formed.
    """
    rep = _Report()
    viewpoint_ids = {vp.viewpoint_id for vp in p.viewpoints}
    overlay_ids = {ov.overlay_id for ov in p.overlays}
    tracks_by_id = {t.track_id: t for t in p.tracks}

    for i, brand in enumerate(sorted(p.brands)):
        if not brand:
            rep.error("ID_EMPTY", "brand string must be non-empty",
                      f"brands[{i}]")

    seen_tracks: set[int] = set()
    for i, track in enumerate(p.tracks):
        path = f"tracks[{i}]"
        if track.track_id in seen_tracks:
            rep.error("DUPLICATE_ID", f"track_id {track.track_id} reused",
                      f"{path}.track_id")
        seen_tracks.add(track.track_id)
        _check_track(rep, track, path)

    seen_vps: set[str] = set()
    for i, vp in enumerate(p.viewpoints):
        path = f"viewpoints[{i}]"
        if vp.viewpoint_id in seen_vps:
            rep.error("DUPLICATE_ID",
                      f"viewpoint_id {vp.viewpoint_id!r} reused",
                      f"{path}.viewpoint_id")
        seen_vps.add(vp.viewpoint_id)
        _check_viewpoint(rep, p, vp, path, viewpoint_ids)

    seen_ovs: set[int] = set()
    for i, ov in enumerate(p.overlays):
        path = f"overlays[{i}]"
        if ov.overlay_id in seen_ovs:
            rep.error("DUPLICATE_ID", f"overlay_id {ov.overlay_id} reused",
                      f"{path}.overlay_id")
        seen_ovs.add(ov.overlay_id)
        _check_overlay(rep, p, ov, path, tracks_by_id)

    for i, tm in enumerate(p.timed_metadata):
        path = f"timed_metadata[{i}]"
        if tm.track_id in seen_tracks:
            rep.error("DUPLICATE_ID",
                      f"track_id {tm.track_id} reused by metadata track",
                      f"{path}.track_id")
        seen_tracks.add(tm.track_id)
        if tm.track_id <= 0:
            rep.error("ID_NOT_POSITIVE",
                      f"track_id {tm.track_id} must be positive",
                      f"{path}.track_id")
        prev = None
        for j, sample in enumerate(tm.samples):
            spath = f"{path}.samples[{j}]"
            if sample.time_ms < 0:
                rep.error("SAMPLE_TIME_NEGATIVE",
                          f"sample time {sample.time_ms} is negative",
                          f"{spath}.time_ms")
            if prev is not None and sample.time_ms <= prev:
                rep.error("SAMPLE_TIMES_NOT_INCREASING",
                          f"sample time {sample.time_ms} does not increase "
                          f"past {prev}", f"{spath}.time_ms")
            prev = sample.time_ms
            _check_payload(rep, p, tm.kind, sample.payload,
                           f"{spath}.payload", viewpoint_ids, overlay_ids)

    seen_groups: set[int] = set()
    for i, group in enumerate(p.tile_groups):
        path = f"tile_groups[{i}]"
        if group.group_id in seen_groups:
            rep.error("DUPLICATE_ID", f"group_id {group.group_id} reused",
                      f"{path}.group_id")
        seen_groups.add(group.group_id)
        positions = set()
        for j, member in enumerate(group.members):
            mpath = f"{path}.members[{j}]"
            target = tracks_by_id.get(member.track_id)
            if target is None:
                rep.error("DANGLING_REF",
                          f"member track {member.track_id} does not exist",
                          f"{mpath}.track_id")
            elif target.media_kind is not MediaKind.VIDEO:
                rep.error("REF_KIND_MISMATCH",
                          f"member track {member.track_id} is "
                          f"{target.media_kind.value}, expected video",
                          f"{mpath}.track_id")
            if member.grid_position in positions:
                rep.error("TILE_NOT_PARTITION",
                          f"grid position {member.grid_position} reused",
                          f"{mpath}.grid_position")
            positions.add(member.grid_position)
            _check_rect(rep, member.source_rect, f"{mpath}.source_rect")
        if group.members and rect_partition_bounds(
                m.source_rect for m in group.members) is None:
            rep.error("TILE_NOT_PARTITION",
                      "member rects do not tile a rectangle exactly",
                      f"{path}.members")

    if p.viewing_space is not None:
        vs = p.viewing_space
        wanted = 1 if vs.shape is ViewingSpaceShape.SPHERE else 3
        if len(vs.extent_mm) != wanted or any(e <= 0 for e in vs.extent_mm):
            rep.error("VIEWING_SPACE_INVALID",
                      f"{vs.shape.value} viewing space needs {wanted} "
                      "positive extent(s)", "viewing_space.extent_mm")

    return rep.issues


# ---------------------------------------------------------------------------
# JSON manifest


def _orientation_to_json(o: ViewingOrientation) -> dict:
    return {"azimuth": o.azimuth, "elevation": o.elevation, "tilt": o.tilt}


def _region_to_json(r: SphereRegion) -> dict:
    return {
        "center": _orientation_to_json(r.center),
        "azimuth_range": r.azimuth_range,
        "elevation_range": r.elevation_range,
    }


def _rect_to_json(r: Rect2D) -> dict:
    return {"x": r.x, "y": r.y, "width": r.width, "height": r.height}


def _gps_to_json(g: GpsPosition) -> dict:
    out = {"latitude": g.latitude, "longitude": g.longitude}
    if g.altitude is not None:
        out["altitude"] = g.altitude
    return out


def _payload_to_json(kind: MetadataKind, payload) -> dict:
    if kind is MetadataKind.INITIAL_VIEWING_ORIENTATION:
        return _orientation_to_json(payload)
    if kind is MetadataKind.RECOMMENDED_VIEWPORT:
        return _region_to_json(payload)
    if kind is MetadataKind.RWQR:
        return {"entries": [
            {"region": (_region_to_json(e.region)
                        if isinstance(e.region, SphereRegion)
                        else _rect_to_json(e.region)),
             "quality_rank": e.quality_rank}
            for e in payload.entries]}
    if kind is MetadataKind.ERP_REGION:
        return {
            "grid_cols": payload.grid_cols,
            "grid_rows": payload.grid_rows,
            "cell_values": list(payload.cell_values),
            "value_kind": payload.value_kind.value,
        }
    if kind is MetadataKind.DYNAMIC_VIEWPOINT:
        out = {"viewpoint_id": payload.viewpoint_id,
               "position_xyz": list(payload.position_xyz)}
        if payload.gps is not None:
            out["gps"] = _gps_to_json(payload.gps)
        return out
    entries = []
    for e in payload.entries:
        entry = {"overlay_id": e.overlay_id, "active": e.active}
        if e.opacity is not None:
            entry["opacity"] = e.opacity
        entries.append(entry)
    return {"entries": entries}


def presentation_to_manifest(p: Presentation) -> dict:
    """Render a Presentation as the documented JSON manifest object."""
    out: dict = {"brands": sorted(p.brands)}
    out["tracks"] = []
    for t in p.tracks:
        entry: dict = {
            "track_id": t.track_id,
            "media_kind": t.media_kind.value,
            "codec": t.codec.value,
            "stereo": t.stereo,
        }
        if t.level is not None:
            entry["level"] = str(t.level)
        if t.projection is not None:
            entry["projection"] = t.projection.value
        if t.dims is not None:
            entry["dims"] = {"width": t.dims.width, "height": t.dims.height}
        if t.coverage is not None:
            entry["coverage"] = _region_to_json(t.coverage)
        if t.sample_rate_hz is not None:
            entry["sample_rate_hz"] = t.sample_rate_hz
        out["tracks"].append(entry)
    out["viewpoints"] = []
    for vp in p.viewpoints:
        entry = {
            "viewpoint_id": vp.viewpoint_id,
            "label": vp.label,
            "position_xyz": list(vp.position_xyz),
            "orientation": {"yaw": vp.orientation.yaw,
                            "pitch": vp.orientation.pitch,
                            "roll": vp.orientation.roll},
            "group_id": vp.group_id,
            "dynamic": vp.dynamic,
            "switch_rules": [],
        }
        if vp.gps is not None:
            entry["gps"] = _gps_to_json(vp.gps)
        if vp.north_offset is not None:
            entry["north_offset"] = vp.north_offset
        for rule in vp.switch_rules:
            rj = {
                "target_viewpoint_id": rule.target_viewpoint_id,
                "timeline_mode": rule.timeline_mode.value,
                "is_default": rule.is_default,
            }
            if rule.activation_region is not None:
                rj["activation_region"] = _region_to_json(
                    rule.activation_region)
            if rule.offset_ms is not None:
                rj["offset_ms"] = rule.offset_ms
            if rule.selection_window_ms is not None:
                rj["selection_window_ms"] = rule.selection_window_ms
            entry["switch_rules"].append(rj)
        if vp.loop is not None:
            entry["loop"] = {
                "loop_start_ms": vp.loop.loop_start_ms,
                "loop_end_ms": vp.loop.loop_end_ms,
                "max_loops": vp.loop.max_loops,
            }
        out["viewpoints"].append(entry)
    out["overlays"] = []
    for ov in p.overlays:
        source: dict = {"kind": ov.source.kind.value}
        if ov.source.ref_id is not None:
            source["ref_id"] = ov.source.ref_id
        if ov.source.region is not None:
            source["region"] = _rect_to_json(ov.source.region)
        rendering: dict = {"kind": ov.rendering.kind.value}
        if ov.rendering.viewport_rect is not None:
            vr = ov.rendering.viewport_rect
            rendering["viewport_rect"] = {"x": vr.x, "y": vr.y,
                                          "width": vr.width,
                                          "height": vr.height}
        if ov.rendering.sphere_position is not None:
            rendering["sphere_position"] = _region_to_json(
                ov.rendering.sphere_position)
        if ov.rendering.plane_position is not None:
            pp = ov.rendering.plane_position
            rendering["plane_position"] = {
                "center": _orientation_to_json(pp.center),
                "distance": pp.distance,
                "width": pp.width,
                "height": pp.height,
            }
        interaction: dict = {
            "allowed_controls": sorted(
                c.value for c in ov.interaction.allowed_controls),
        }
        if ov.interaction.label is not None:
            interaction["label"] = ov.interaction.label
        if ov.interaction.toggle_region is not None:
            interaction["toggle_region"] = _region_to_json(
                ov.interaction.toggle_region)
        out["overlays"].append({
            "overlay_id": ov.overlay_id,
            "source": source,
            "rendering": rendering,
            "properties": {
                "layering_order": ov.properties.layering_order,
                "opacity": ov.properties.opacity,
                "priority": ov.properties.priority,
                "has_alpha_plane": ov.properties.has_alpha_plane,
            },
            "interaction": interaction,
            "controls_timing": ov.controls_timing.value,
        })
    out["timed_metadata"] = [
        {
            "track_id": tm.track_id,
            "kind": tm.kind.value,
            "samples": [
                {"time_ms": s.time_ms,
                 "payload": _payload_to_json(tm.kind, s.payload)}
                for s in tm.samples],
        }
        for tm in p.timed_metadata]
    out["tile_groups"] = [
        {
            "group_id": g.group_id,
            "members": [
                {"track_id": m.track_id,
                 "grid_position": list(m.grid_position),
                 "source_rect": _rect_to_json(m.source_rect)}
                for m in g.members],
        }
        for g in p.tile_groups]
    if p.viewing_space is not None:
        out["viewing_space"] = {
            "shape": p.viewing_space.shape.value,
            "extent_mm": list(p.viewing_space.extent_mm),
        }
    if p.extras:
        out["extras"] = [
            {"index": index, "data": base64.b64encode(blob).decode("ascii")}
            for index, blob in p.extras]
    return out


class _Fields:
    """One manifest object; get() tracks unknown keys strictly."""

    def __init__(self, obj, path: str):
        if not isinstance(obj, dict):
            raise ManifestError(f"{path}: expected an object")
        self.obj = obj
        self.path = path
        self.read: set[str] = set()

    def get(self, key, default=None, required=False):
        self.read.add(key)
        if key not in self.obj:
            if required:
                raise ManifestError(f"{self.path}: missing key {key!r}")
            return default
        return self.obj[key]

    def done(self):
        unknown = set(self.obj) - self.read
        if unknown:
            raise ManifestError(
                f"{self.path}: unknown key(s) {sorted(unknown)}")


def _enum_from(enum_cls, value, path: str):
    try:
        return enum_cls(value)
    except ValueError as exc:
        raise ManifestError(f"{path}: bad value {value!r}") from exc


def _orientation_from_json(obj, path: str) -> ViewingOrientation:
    f = _Fields(obj, path)
    o = ViewingOrientation(f.get("azimuth", 0.0), f.get("elevation", 0.0),
                           f.get("tilt", 0.0))
    f.done()
    return o


def _region_from_json(obj, path: str) -> SphereRegion:
    f = _Fields(obj, path)
    r = SphereRegion(
        _orientation_from_json(f.get("center", required=True),
                               f"{path}.center"),
        f.get("azimuth_range", 360.0),
        f.get("elevation_range", 180.0),
    )
    f.done()
    return r


def _rect_from_json(obj, path: str) -> Rect2D:
    f = _Fields(obj, path)
    r = Rect2D(f.get("x", required=True), f.get("y", required=True),
               f.get("width", required=True), f.get("height", required=True))
    f.done()
    return r


def _gps_from_json(obj, path: str) -> GpsPosition:
    f = _Fields(obj, path)
    g = GpsPosition(f.get("latitude", required=True),
                    f.get("longitude", required=True),
                    f.get("altitude"))
    f.done()
    return g


def _payload_from_json(kind: MetadataKind, obj, path: str):
    if kind is MetadataKind.INITIAL_VIEWING_ORIENTATION:
        return _orientation_from_json(obj, path)
    if kind is MetadataKind.RECOMMENDED_VIEWPORT:
        return _region_from_json(obj, path)
    f = _Fields(obj, path)
    if kind is MetadataKind.RWQR:
        entries = []
        for k, ej in enumerate(f.get("entries", required=True)):
            ef = _Fields(ej, f"{path}.entries[{k}]")
            rj = ef.get("region", required=True)
            region = (_region_from_json(rj, f"{path}.entries[{k}].region")
                      if isinstance(rj, dict) and "center" in rj
                      else _rect_from_json(rj, f"{path}.entries[{k}].region"))
            entries.append(RwqrEntry(region,
                                     ef.get("quality_rank", required=True)))
            ef.done()
        payload = RwqrPayload(tuple(entries))
    elif kind is MetadataKind.ERP_REGION:
        payload = ErpRegionPayload(
            f.get("grid_cols", required=True),
            f.get("grid_rows", required=True),
            tuple(f.get("cell_values", required=True)),
            _enum_from(ValueKind, f.get("value_kind", required=True),
                       f"{path}.value_kind"),
        )
    elif kind is MetadataKind.DYNAMIC_VIEWPOINT:
        gps = f.get("gps")
        payload = DynamicViewpointPayload(
            f.get("viewpoint_id", required=True),
            tuple(f.get("position_xyz", required=True)),
            _gps_from_json(gps, f"{path}.gps") if gps is not None else None,
        )
    else:
        entries = []
        for k, ej in enumerate(f.get("entries", required=True)):
            ef = _Fields(ej, f"{path}.entries[{k}]")
            entries.append(OverlayControlEntry(
                ef.get("overlay_id", required=True),
                ef.get("active", required=True),
                ef.get("opacity")))
            ef.done()
        payload = OverlayControlsPayload(tuple(entries))
    f.done()
    return payload


def presentation_from_manifest(obj) -> Presentation:
    """Build a Presentation from a manifest object (strict schema)."""
    root = _Fields(obj, "$")
    tracks = []
    for i, tj in enumerate(root.get("tracks", [])):
        f = _Fields(tj, f"tracks[{i}]")
        level = f.get("level")
        dims = f.get("dims")
        coverage = f.get("coverage")
        projection = f.get("projection")
        tracks.append(TrackDescriptor(
            track_id=f.get("track_id", required=True),
            media_kind=_enum_from(MediaKind, f.get("media_kind",
                                                   required=True),
                                  f"tracks[{i}].media_kind"),
            codec=_enum_from(Codec, f.get("codec", required=True),
                             f"tracks[{i}].codec"),
            level=Level.parse(level) if level is not None else None,
            projection=(_enum_from(Projection, projection,
                                   f"tracks[{i}].projection")
                        if projection is not None else None),
            stereo=f.get("stereo", False),
            dims=(PictureDims(dims["width"], dims["height"])
                  if dims is not None else None),
            coverage=(_region_from_json(coverage, f"tracks[{i}].coverage")
                      if coverage is not None else None),
            sample_rate_hz=f.get("sample_rate_hz"),
        ))
        f.done()
    viewpoints = []
    for i, vj in enumerate(root.get("viewpoints", [])):
        vpath = f"viewpoints[{i}]"
        f = _Fields(vj, vpath)
        rules = []
        for j, rj in enumerate(f.get("switch_rules", [])):
            rf = _Fields(rj, f"{vpath}.switch_rules[{j}]")
            region = rf.get("activation_region")
            rules.append(SwitchRule(
                target_viewpoint_id=rf.get("target_viewpoint_id",
                                           required=True),
                timeline_mode=_enum_from(
                    TimelineMode, rf.get("timeline_mode", "continue_time"),
                    f"{vpath}.switch_rules[{j}].timeline_mode"),
                activation_region=(
                    _region_from_json(
                        region, f"{vpath}.switch_rules[{j}].activation_region")
                    if region is not None else None),
                offset_ms=rf.get("offset_ms"),
                is_default=rf.get("is_default", False),
                selection_window_ms=rf.get("selection_window_ms"),
            ))
            rf.done()
        gps = f.get("gps")
        loop = f.get("loop")
        orientation = f.get("orientation")
        if orientation is not None:
            of = _Fields(orientation, f"{vpath}.orientation")
            rot = RotationYpr(of.get("yaw", 0.0), of.get("pitch", 0.0),
                              of.get("roll", 0.0))
            of.done()
        else:
            rot = RotationYpr()
        if loop is not None:
            lf = _Fields(loop, f"{vpath}.loop")
            loop_info = LoopInfo(lf.get("loop_start_ms", required=True),
                                 lf.get("loop_end_ms", required=True),
                                 lf.get("max_loops", 0))
            lf.done()
        else:
            loop_info = None
        viewpoints.append(Viewpoint(
            viewpoint_id=f.get("viewpoint_id", required=True),
            label=f.get("label", ""),
            position_xyz=tuple(f.get("position_xyz", (0, 0, 0))),
            gps=_gps_from_json(gps, f"{vpath}.gps")
            if gps is not None else None,
            orientation=rot,
            north_offset=f.get("north_offset"),
            group_id=f.get("group_id", 0),
            switch_rules=tuple(rules),
            loop=loop_info,
            dynamic=f.get("dynamic", False),
        ))
        f.done()
    overlays = []
    for i, oj in enumerate(root.get("overlays", [])):
        opath = f"overlays[{i}]"
        f = _Fields(oj, opath)
        sf = _Fields(f.get("source", required=True), f"{opath}.source")
        region = sf.get("region")
        source = OverlaySource(
            kind=_enum_from(OverlaySourceKind, sf.get("kind", required=True),
                            f"{opath}.source.kind"),
            ref_id=sf.get("ref_id"),
            region=(_rect_from_json(region, f"{opath}.source.region")
                    if region is not None else None),
        )
        sf.done()
        rf = _Fields(f.get("rendering", required=True), f"{opath}.rendering")
        vr = rf.get("viewport_rect")
        sp = rf.get("sphere_position")
        pp = rf.get("plane_position")
        if vr is not None:
            vf = _Fields(vr, f"{opath}.rendering.viewport_rect")
            viewport_rect = NormalizedRect(
                vf.get("x", required=True), vf.get("y", required=True),
                vf.get("width", required=True),
                vf.get("height", required=True))
            vf.done()
        else:
            viewport_rect = None
        if pp is not None:
            pf = _Fields(pp, f"{opath}.rendering.plane_position")
            plane = PlanePosition(
                _orientation_from_json(pf.get("center", required=True),
                                       f"{opath}.rendering.plane_position"
                                       ".center"),
                pf.get("distance", required=True),
                pf.get("width", required=True),
                pf.get("height", required=True))
            pf.done()
        else:
            plane = None
        rendering = OverlayRendering(
            kind=_enum_from(OverlayRenderingKind,
                            rf.get("kind", required=True),
                            f"{opath}.rendering.kind"),
            viewport_rect=viewport_rect,
            sphere_position=(
                _region_from_json(sp, f"{opath}.rendering.sphere_position")
                if sp is not None else None),
            plane_position=plane,
        )
        rf.done()
        props = f.get("properties", {})
        pf = _Fields(props, f"{opath}.properties")
        properties = OverlayProperties(
            layering_order=pf.get("layering_order", 0),
            opacity=pf.get("opacity", 1.0),
            priority=pf.get("priority", 0),
            has_alpha_plane=pf.get("has_alpha_plane", False),
        )
        pf.done()
        inter = f.get("interaction", {})
        jf = _Fields(inter, f"{opath}.interaction")
        toggle = jf.get("toggle_region")
        interaction = OverlayInteraction(
            allowed_controls=frozenset(
                _enum_from(ControlKind, c,
                           f"{opath}.interaction.allowed_controls")
                for c in jf.get("allowed_controls", [])),
            label=jf.get("label"),
            toggle_region=(
                _region_from_json(toggle, f"{opath}.interaction.toggle_region")
                if toggle is not None else None),
        )
        jf.done()
        overlays.append(Overlay(
            overlay_id=f.get("overlay_id", required=True),
            source=source,
            rendering=rendering,
            properties=properties,
            interaction=interaction,
            controls_timing=_enum_from(ControlsTiming,
                                       f.get("controls_timing", "static"),
                                       f"{opath}.controls_timing"),
        ))
        f.done()
    timed_metadata = []
    for i, mj in enumerate(root.get("timed_metadata", [])):
        mpath = f"timed_metadata[{i}]"
        f = _Fields(mj, mpath)
        kind = _enum_from(MetadataKind, f.get("kind", required=True),
                          f"{mpath}.kind")
        samples = []
        for j, sj in enumerate(f.get("samples", [])):
            sf = _Fields(sj, f"{mpath}.samples[{j}]")
            samples.append(MetadataSample(
                sf.get("time_ms", required=True),
                _payload_from_json(kind, sf.get("payload", required=True),
                                   f"{mpath}.samples[{j}].payload")))
            sf.done()
        timed_metadata.append(TimedMetadataTrack(
            track_id=f.get("track_id", required=True),
            kind=kind,
            samples=tuple(samples)))
        f.done()
    tile_groups = []
    for i, gj in enumerate(root.get("tile_groups", [])):
        gpath = f"tile_groups[{i}]"
        f = _Fields(gj, gpath)
        members = []
        for j, mj in enumerate(f.get("members", [])):
            mf = _Fields(mj, f"{gpath}.members[{j}]")
            members.append(TileMember(
                mf.get("track_id", required=True),
                tuple(mf.get("grid_position", required=True)),
                _rect_from_json(mf.get("source_rect", required=True),
                                f"{gpath}.members[{j}].source_rect")))
            mf.done()
        tile_groups.append(TileGroup(f.get("group_id", required=True),
                                     tuple(members)))
        f.done()
    vs = root.get("viewing_space")
    if vs is not None:
        vf = _Fields(vs, "viewing_space")
        viewing_space = ViewingSpace(
            _enum_from(ViewingSpaceShape, vf.get("shape", required=True),
                       "viewing_space.shape"),
            tuple(vf.get("extent_mm", required=True)))
        vf.done()
    else:
        viewing_space = None
    extras = []
    for i, ej in enumerate(root.get("extras", [])):
        ef = _Fields(ej, f"extras[{i}]")
        extras.append((ef.get("index", required=True),
                       base64.b64decode(ef.get("data", required=True))))
        ef.done()
    p = Presentation(
        brands=frozenset(root.get("brands", [])),
        tracks=tuple(tracks),
        viewpoints=tuple(viewpoints),
        overlays=tuple(overlays),
        timed_metadata=tuple(timed_metadata),
        tile_groups=tuple(tile_groups),
        viewing_space=viewing_space,
        extras=tuple(extras),
    )
    root.done()
    return p
