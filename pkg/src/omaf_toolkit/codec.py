"""Binary serialization of presentations as a box-structured container.

The file layout (the "OMB format", normatively described in
docs/format.md) borrows the ISOBMFF box idea: every structure is a
32-bit big-endian size (covering the 8-byte header), a four-byte type
code, and a payload of raw fields or child boxes.  The layout is this
project's own; the type codes do not claim to match ISO/IEC 23090-2.

Angles travel as signed 32-bit fixed point in units of 2^-16 degrees.
`quantize_presentation` applies exactly that rounding in memory, so
`decode_presentation(encode_presentation(p))` equals `quantize(p)` for
every valid presentation.  All other floats are raw IEEE 754 doubles
and round-trip bit-exactly.

Unknown top-level boxes are kept as opaque bytes in
`Presentation.extras` together with their stream position and are
re-emitted verbatim on encode.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from typing import Union

from .errors import DataError, OmafToolkitError, ParseError
from .geometry import PictureDims, Rect2D, SphereRegion, ViewingOrientation
from . import model
from .model import (
    Codec,
    ControlKind,
    ControlsTiming,
    DynamicViewpointPayload,
    ErpRegionPayload,
    GpsPosition,
    Level,
    LoopInfo,
    MediaKind,
    MetadataKind,
    MetadataSample,
    NormalizedRect,
    Overlay,
    OverlayControlEntry,
    OverlayControlsPayload,
    OverlayInteraction,
    OverlayProperties,
    OverlayRendering,
    OverlayRenderingKind,
    OverlaySource,
    OverlaySourceKind,
    PlanePosition,
    Presentation,
    Projection,
    RotationYpr,
    RwqrEntry,
    RwqrPayload,
    SwitchRule,
    TileGroup,
    TileMember,
    TimedMetadataTrack,
    TimelineMode,
    TrackDescriptor,
    ValueKind,
    Viewpoint,
    ViewingSpace,
    ViewingSpaceShape,
    validate_presentation,
)

ANGLE_SCALE = 1 << 16
MAX_PAYLOAD = 2**32 - 9
MAX_STRING = 0xFFFF

#: box types the presentation codec understands, in canonical file order
HEADER_FOURCC = b"omhd"
TRACK_FOURCC = b"trkd"
VIEWPOINT_FOURCC = b"vwpt"
OVERLAY_FOURCC = b"ovly"
METADATA_FOURCC = b"tmtd"
TILEGROUP_FOURCC = b"tilg"
VIEWINGSPACE_FOURCC = b"vwsp"

#: box types whose payload is a box sequence rather than raw fields
CONTAINER_FOURCCS = frozenset({METADATA_FOURCC})

_KNOWN_TOPLEVEL = frozenset({
    HEADER_FOURCC, TRACK_FOURCC, VIEWPOINT_FOURCC, OVERLAY_FOURCC,
    METADATA_FOURCC, TILEGROUP_FOURCC, VIEWINGSPACE_FOURCC,
})


class BoxParseError(ParseError):
    """Structural damage in a box stream, located by byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class FieldDecodeError(ParseError):
    """A known box whose payload does not match its documented layout."""

    def __init__(self, fourcc: bytes, field: str, message: str):
        name = fourcc.decode("ascii", "replace")
        super().__init__(f"'{name}' box, field {field!r}: {message}")
        self.fourcc = fourcc
        self.field = field


class CapacityError(OmafToolkitError):
    """A value does not fit the fixed-width wire representation."""


class EncodeRefusedError(DataError):
    """Refusal to serialize a presentation that fails validation."""

    def __init__(self, report):
        errors = [i for i in report if i.severity == "error"]
        codes = sorted({i.code for i in errors})
        super().__init__(
            f"presentation has {len(errors)} validation error(s): "
            + ", ".join(codes))
        self.report = report


# ---------------------------------------------------------------------------
# generic box layer


@dataclass(frozen=True)
class Box:
    """One container box: a type code plus raw bytes or child boxes."""

    fourcc: bytes
    payload: Union[bytes, tuple["Box", ...]]

    def __post_init__(self):
        if len(self.fourcc) != 4:
            raise ValueError("fourcc must be exactly 4 bytes")
        if not isinstance(self.payload, bytes):
            object.__setattr__(self, "payload", tuple(self.payload))


def decode_box_tree(data: bytes, containers=frozenset()) -> list[Box]:
    """Split a byte string into boxes, recursing into `containers`.

    Unknown box types stay opaque.  Consumes the entire input; any
    structural damage raises BoxParseError with the byte offset.
    """
    return _decode_boxes(data, 0, containers)


def _decode_boxes(data: bytes, base: int, containers) -> list[Box]:
    boxes = []
    offset = 0
    while offset < len(data):
        if len(data) - offset < 8:
            raise BoxParseError("trailing bytes shorter than a box header",
                                base + offset)
        size = struct.unpack_from(">I", data, offset)[0]
        if size < 8:
            raise BoxParseError(f"box size {size} below the 8-byte minimum",
                                base + offset)
        if size > len(data) - offset:
            raise BoxParseError(
                f"box size {size} exceeds the {len(data) - offset} "
                "remaining bytes", base + offset)
        fourcc = bytes(data[offset + 4:offset + 8])
        body = bytes(data[offset + 8:offset + size])
        if fourcc in containers:
            children = _decode_boxes(body, base + offset + 8, containers)
            boxes.append(Box(fourcc, tuple(children)))
        else:
            boxes.append(Box(fourcc, body))
        offset += size
    return boxes


def encode_box_tree(boxes) -> bytes:
    """Serialize boxes back to bytes, computing sizes bottom-up."""
    out = bytearray()
    for box in boxes:
        if isinstance(box.payload, bytes):
            body = box.payload
        else:
            body = encode_box_tree(box.payload)
        if len(body) > MAX_PAYLOAD:
            raise CapacityError(
                f"'{box.fourcc.decode('ascii', 'replace')}' payload of "
                f"{len(body)} bytes exceeds the 32-bit size field")
        out += struct.pack(">I", len(body) + 8)
        out += box.fourcc
        out += body
    return bytes(out)


# ---------------------------------------------------------------------------
# field readers and writers


def _angle_to_fixed(degrees: float) -> int:
    fixed = round(degrees * ANGLE_SCALE)
    if not (-(1 << 31) <= fixed < (1 << 31)):
        raise CapacityError(f"angle {degrees} overflows 32-bit fixed point")
    return fixed


def quantize_angle(degrees: float) -> float:
    """The value an angle becomes after an encode/decode round trip."""
    return _angle_to_fixed(degrees) / ANGLE_SCALE


class _Writer:
    def __init__(self):
        self.buf = bytearray()

    def u8(self, value):
        self.buf += struct.pack(">B", value)

    def u16(self, value):
        self.buf += struct.pack(">H", value)

    def u32(self, value):
        self.buf += struct.pack(">I", value)

    def u64(self, value):
        self.buf += struct.pack(">Q", value)

    def i32(self, value):
        self.buf += struct.pack(">i", value)

    def f64(self, value):
        self.buf += struct.pack(">d", value)

    def angle(self, degrees):
        self.buf += struct.pack(">i", _angle_to_fixed(degrees))

    def string(self, text: str):
        raw = text.encode("utf-8")
        if len(raw) > MAX_STRING:
            raise CapacityError(
                f"string of {len(raw)} UTF-8 bytes exceeds the 16-bit "
                "length prefix")
        self.u16(len(raw))
        self.buf += raw

    def flag(self, present) -> bool:
        self.u8(1 if present else 0)
        return bool(present)

    def orientation(self, o: ViewingOrientation):
        self.angle(o.azimuth)
        self.angle(o.elevation)
        self.angle(o.tilt)

    def region(self, r: SphereRegion):
        self.orientation(r.center)
        self.angle(r.azimuth_range)
        self.angle(r.elevation_range)

    def rect(self, r: Rect2D):
        self.i32(r.x)
        self.i32(r.y)
        self.u32(r.width)
        self.u32(r.height)

    def gps(self, g: GpsPosition):
        self.f64(g.latitude)
        self.f64(g.longitude)
        if self.flag(g.altitude is not None):
            self.f64(g.altitude)

    def bytes_of(self) -> bytes:
        return bytes(self.buf)


class _Reader:
    def __init__(self, fourcc: bytes, data: bytes):
        self.fourcc = fourcc
        self.data = data
        self.pos = 0

    def fail(self, field: str, message: str):
        raise FieldDecodeError(self.fourcc, field, message)

    def _take(self, field: str, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            self.fail(field, f"payload ends {self.pos + size - len(self.data)}"
                             " byte(s) early")
        value = struct.unpack_from(fmt, self.data, self.pos)[0]
        self.pos += size
        return value

    def u8(self, field):
        return self._take(field, ">B")

    def u16(self, field):
        return self._take(field, ">H")

    def u32(self, field):
        return self._take(field, ">I")

    def u64(self, field):
        return self._take(field, ">Q")

    def i32(self, field):
        return self._take(field, ">i")

    def f64(self, field):
        return self._take(field, ">d")

    def angle(self, field) -> float:
        return self.i32(field) / ANGLE_SCALE

    def string(self, field) -> str:
        length = self.u16(field)
        if self.pos + length > len(self.data):
            self.fail(field, "string text truncated")
        raw = self.data[self.pos:self.pos + length]
        self.pos += length
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            self.fail(field, "string is not valid UTF-8")

    def flag(self, field) -> bool:
        value = self.u8(field)
        if value > 1:
            self.fail(field, f"presence flag must be 0 or 1, got {value}")
        return bool(value)

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def enum(self, field, table):
        code = self.u8(field)
        try:
            return table[code]
        except KeyError:
            self.fail(field, f"unknown code {code}")

    def orientation(self, field) -> ViewingOrientation:
        return ViewingOrientation(self.angle(field), self.angle(field),
                                  self.angle(field))

    def region(self, field) -> SphereRegion:
        return SphereRegion(self.orientation(field), self.angle(field),
                            self.angle(field))

    def rect(self, field) -> Rect2D:
        return Rect2D(self.i32(field), self.i32(field), self.u32(field),
                      self.u32(field))

    def gps(self, field) -> GpsPosition:
        lat = self.f64(field)
        lon = self.f64(field)
        alt = self.f64(field) if self.flag(field) else None
        return GpsPosition(lat, lon, alt)

    def done(self):
        if self.pos != len(self.data):
            self.fail("(end)", f"{len(self.data) - self.pos} unexpected "
                               "trailing byte(s)")


# ---------------------------------------------------------------------------
# enum wire codes (stable; documented in docs/format.md)


def _codes(*members):
    to_wire = {member: code for code, member in enumerate(members)}
    from_wire = dict(enumerate(members))
    return to_wire, from_wire


_MEDIA_KIND_W, _MEDIA_KIND_R = _codes(
    MediaKind.VIDEO, MediaKind.AUDIO, MediaKind.IMAGE, MediaKind.TIMED_TEXT,
    MediaKind.TIMED_METADATA)
_CODEC_W, _CODEC_R = _codes(
    Codec.HEVC_MAIN10, Codec.AVC_PROGRESSIVE_HIGH, Codec.AVC_HIGH,
    Codec.JPEG, Codec.MPEGH_LC, Codec.AAC_HEV2, Codec.IMSC1_TEXT,
    Codec.IMSC1_IMAGE, Codec.WEBVTT, Codec.METADATA)
_PROJECTION_W, _PROJECTION_R = _codes(
    Projection.ERP, Projection.CMP, Projection.FISHEYE, Projection.MESH,
    Projection.NONE)
_TIMELINE_W, _TIMELINE_R = _codes(
    TimelineMode.CONTINUE_TIME, TimelineMode.RESET_TO_ZERO,
    TimelineMode.OFFSET)
_SOURCE_KIND_W, _SOURCE_KIND_R = _codes(
    OverlaySourceKind.VIDEO_TRACK, OverlaySourceKind.IMAGE_ITEM,
    OverlaySourceKind.REGION_OF_TRACK, OverlaySourceKind.REGION_OF_IMAGE,
    OverlaySourceKind.RECOMMENDED_VIEWPORT, OverlaySourceKind.EXTERNAL)
_RENDER_KIND_W, _RENDER_KIND_R = _codes(
    OverlayRenderingKind.VIEWPORT_RELATIVE,
    OverlayRenderingKind.SPHERE_RELATIVE_OMNI,
    OverlayRenderingKind.SPHERE_RELATIVE_2D, OverlayRenderingKind.MESH_3D)
_TIMING_W, _TIMING_R = _codes(ControlsTiming.STATIC, ControlsTiming.TIMED)
_METADATA_KIND_W, _METADATA_KIND_R = _codes(
    MetadataKind.INITIAL_VIEWING_ORIENTATION,
    MetadataKind.RECOMMENDED_VIEWPORT, MetadataKind.RWQR,
    MetadataKind.ERP_REGION, MetadataKind.DYNAMIC_VIEWPOINT,
    MetadataKind.OVERLAY_CONTROLS)
_VALUE_KIND_W, _VALUE_KIND_R = _codes(
    ValueKind.QUALITY_RANK, ValueKind.PRIORITY, ValueKind.HEATMAP)
_SHAPE_W, _SHAPE_R = _codes(ViewingSpaceShape.SPHERE,
                            ViewingSpaceShape.CUBOID)

_CONTROL_BITS = {
    ControlKind.MOVE: 1,
    ControlKind.RESIZE: 2,
    ControlKind.ROTATE: 4,
    ControlKind.SWITCH_ON_OFF: 8,
    ControlKind.CHANGE_OPACITY: 16,
}


# ---------------------------------------------------------------------------
# quantization


def _quantize_orientation(o: ViewingOrientation) -> ViewingOrientation:
    return ViewingOrientation(quantize_angle(o.azimuth),
                              quantize_angle(o.elevation),
                              quantize_angle(o.tilt))


def _quantize_region(r: SphereRegion) -> SphereRegion:
    return SphereRegion(_quantize_orientation(r.center),
                        quantize_angle(r.azimuth_range),
                        quantize_angle(r.elevation_range))


def _quantize_opt_region(r):
    return _quantize_region(r) if r is not None else None


def _quantize_payload(kind: MetadataKind, payload):
    if kind is MetadataKind.INITIAL_VIEWING_ORIENTATION:
        return _quantize_orientation(payload)
    if kind is MetadataKind.RECOMMENDED_VIEWPORT:
        return _quantize_region(payload)
    if kind is MetadataKind.RWQR:
        return RwqrPayload(tuple(
            replace(e, region=(_quantize_region(e.region)
                               if isinstance(e.region, SphereRegion)
                               else e.region))
            for e in payload.entries))
    return payload


def quantize_presentation(p: Presentation) -> Presentation:
    """Round every angle to the 2^-16-degree wire precision."""
    tracks = tuple(
        replace(t, coverage=_quantize_opt_region(t.coverage))
        for t in p.tracks)
    viewpoints = tuple(
        replace(
            vp,
            orientation=RotationYpr(quantize_angle(vp.orientation.yaw),
                                    quantize_angle(vp.orientation.pitch),
                                    quantize_angle(vp.orientation.roll)),
            north_offset=(quantize_angle(vp.north_offset)
                          if vp.north_offset is not None else None),
            switch_rules=tuple(
                replace(rule, activation_region=_quantize_opt_region(
                    rule.activation_region))
                for rule in vp.switch_rules))
        for vp in p.viewpoints)
    overlays = tuple(
        replace(
            ov,
            rendering=replace(
                ov.rendering,
                sphere_position=_quantize_opt_region(
                    ov.rendering.sphere_position),
                plane_position=(
                    replace(ov.rendering.plane_position,
                            center=_quantize_orientation(
                                ov.rendering.plane_position.center))
                    if ov.rendering.plane_position is not None else None)),
            interaction=replace(
                ov.interaction,
                toggle_region=_quantize_opt_region(
                    ov.interaction.toggle_region)))
        for ov in p.overlays)
    timed_metadata = tuple(
        replace(tm, samples=tuple(
            MetadataSample(s.time_ms, _quantize_payload(tm.kind, s.payload))
            for s in tm.samples))
        for tm in p.timed_metadata)
    return replace(p, tracks=tracks, viewpoints=viewpoints,
                   overlays=overlays, timed_metadata=timed_metadata)


# ---------------------------------------------------------------------------
# per-box encoders


def _encode_header(p: Presentation) -> Box:
    w = _Writer()
    w.u8(1)
    brands = sorted(p.brands)
    w.u32(len(brands))
    for brand in brands:
        w.string(brand)
    return Box(HEADER_FOURCC, w.bytes_of())


def _encode_track(t: TrackDescriptor) -> Box:
    w = _Writer()
    w.u32(t.track_id)
    w.u8(_MEDIA_KIND_W[t.media_kind])
    w.u8(_CODEC_W[t.codec])
    w.u8(1 if t.stereo else 0)
    if w.flag(t.level is not None):
        w.u8(t.level.major)
        w.u8(t.level.minor)
    if w.flag(t.projection is not None):
        w.u8(_PROJECTION_W[t.projection])
    if w.flag(t.dims is not None):
        w.u32(t.dims.width)
        w.u32(t.dims.height)
    if w.flag(t.coverage is not None):
        w.region(t.coverage)
    if w.flag(t.sample_rate_hz is not None):
        w.u32(t.sample_rate_hz)
    return Box(TRACK_FOURCC, w.bytes_of())


def _encode_viewpoint(vp: Viewpoint) -> Box:
    w = _Writer()
    w.string(vp.viewpoint_id)
    w.string(vp.label)
    for coord in vp.position_xyz:
        w.i32(coord)
    if w.flag(vp.gps is not None):
        w.gps(vp.gps)
    w.angle(vp.orientation.yaw)
    w.angle(vp.orientation.pitch)
    w.angle(vp.orientation.roll)
    if w.flag(vp.north_offset is not None):
        w.angle(vp.north_offset)
    w.i32(vp.group_id)
    w.u8(1 if vp.dynamic else 0)
    if w.flag(vp.loop is not None):
        w.u64(vp.loop.loop_start_ms)
        w.u64(vp.loop.loop_end_ms)
        w.u32(vp.loop.max_loops)
    w.u32(len(vp.switch_rules))
    for rule in vp.switch_rules:
        w.string(rule.target_viewpoint_id)
        w.u8(_TIMELINE_W[rule.timeline_mode])
        if w.flag(rule.activation_region is not None):
            w.region(rule.activation_region)
        if w.flag(rule.offset_ms is not None):
            w.u64(rule.offset_ms)
        w.u8(1 if rule.is_default else 0)
        if w.flag(rule.selection_window_ms is not None):
            w.u32(rule.selection_window_ms)
    return Box(VIEWPOINT_FOURCC, w.bytes_of())


def _encode_overlay(ov: Overlay) -> Box:
    w = _Writer()
    w.u32(ov.overlay_id)
    w.u8(_SOURCE_KIND_W[ov.source.kind])
    if w.flag(ov.source.ref_id is not None):
        w.u32(ov.source.ref_id)
    if w.flag(ov.source.region is not None):
        w.rect(ov.source.region)
    rnd = ov.rendering
    w.u8(_RENDER_KIND_W[rnd.kind])
    if w.flag(rnd.viewport_rect is not None):
        vr = rnd.viewport_rect
        w.f64(vr.x)
        w.f64(vr.y)
        w.f64(vr.width)
        w.f64(vr.height)
    if w.flag(rnd.sphere_position is not None):
        w.region(rnd.sphere_position)
    if w.flag(rnd.plane_position is not None):
        pp = rnd.plane_position
        w.orientation(pp.center)
        w.f64(pp.distance)
        w.f64(pp.width)
        w.f64(pp.height)
    w.i32(ov.properties.layering_order)
    w.f64(ov.properties.opacity)
    w.u32(ov.properties.priority)
    w.u8(1 if ov.properties.has_alpha_plane else 0)
    w.u8(sum(_CONTROL_BITS[c] for c in ov.interaction.allowed_controls))
    if w.flag(ov.interaction.label is not None):
        w.string(ov.interaction.label)
    if w.flag(ov.interaction.toggle_region is not None):
        w.region(ov.interaction.toggle_region)
    w.u8(_TIMING_W[ov.controls_timing])
    return Box(OVERLAY_FOURCC, w.bytes_of())


def _encode_sample(kind: MetadataKind, sample: MetadataSample) -> Box:
    w = _Writer()
    w.u64(sample.time_ms)
    payload = sample.payload
    if kind is MetadataKind.INITIAL_VIEWING_ORIENTATION:
        w.orientation(payload)
    elif kind is MetadataKind.RECOMMENDED_VIEWPORT:
        w.region(payload)
    elif kind is MetadataKind.RWQR:
        w.u32(len(payload.entries))
        for entry in payload.entries:
            if isinstance(entry.region, SphereRegion):
                w.u8(0)
                w.region(entry.region)
            else:
                w.u8(1)
                w.rect(entry.region)
            w.u32(entry.quality_rank)
    elif kind is MetadataKind.ERP_REGION:
        w.u32(payload.grid_cols)
        w.u32(payload.grid_rows)
        w.u8(_VALUE_KIND_W[payload.value_kind])
        for value in payload.cell_values:
            w.f64(value)
    elif kind is MetadataKind.DYNAMIC_VIEWPOINT:
        w.string(payload.viewpoint_id)
        for coord in payload.position_xyz:
            w.i32(coord)
        if w.flag(payload.gps is not None):
            w.gps(payload.gps)
    else:
        w.u32(len(payload.entries))
        for entry in payload.entries:
            w.u32(entry.overlay_id)
            w.u8(1 if entry.active else 0)
            if w.flag(entry.opacity is not None):
                w.f64(entry.opacity)
    return Box(b"samp", w.bytes_of())


def _encode_metadata(tm: TimedMetadataTrack) -> Box:
    head = _Writer()
    head.u32(tm.track_id)
    head.u8(_METADATA_KIND_W[tm.kind])
    children = [Box(b"tmhd", head.bytes_of())]
    children += [_encode_sample(tm.kind, s) for s in tm.samples]
    return Box(METADATA_FOURCC, tuple(children))


def _encode_tile_group(g: TileGroup) -> Box:
    w = _Writer()
    w.u32(g.group_id)
    w.u32(len(g.members))
    for member in g.members:
        w.u32(member.track_id)
        w.i32(member.grid_position[0])
        w.i32(member.grid_position[1])
        w.rect(member.source_rect)
    return Box(TILEGROUP_FOURCC, w.bytes_of())


def _encode_viewing_space(vs: ViewingSpace) -> Box:
    w = _Writer()
    w.u8(_SHAPE_W[vs.shape])
    w.u8(len(vs.extent_mm))
    for extent in vs.extent_mm:
        w.u32(extent)
    return Box(VIEWINGSPACE_FOURCC, w.bytes_of())


def encode_presentation(p: Presentation) -> bytes:
    """Serialize a valid presentation to OMB bytes.

    Raises EncodeRefusedError when validation reports any error;
    warnings do not block encoding.
    """
    report = validate_presentation(p)
    if model.error_count(report):
        raise EncodeRefusedError(report)
    boxes = [_encode_header(p)]
    boxes += [_encode_track(t) for t in p.tracks]
    boxes += [_encode_viewpoint(vp) for vp in p.viewpoints]
    boxes += [_encode_overlay(ov) for ov in p.overlays]
    boxes += [_encode_metadata(tm) for tm in p.timed_metadata]
    boxes += [_encode_tile_group(g) for g in p.tile_groups]
    if p.viewing_space is not None:
        boxes.append(_encode_viewing_space(p.viewing_space))
    for index, blob in sorted(p.extras):
        extra = decode_box_tree(blob)
        boxes[min(index, len(boxes)):min(index, len(boxes))] = extra
    return encode_box_tree(boxes)


# ---------------------------------------------------------------------------
# per-box decoders


def _decode_header(box: Box):
    r = _Reader(box.fourcc, box.payload)
    version = r.u8("version")
    if version != 1:
        r.fail("version", f"unsupported format version {version}")
    count = r.u32("brand_count")
    brands = []
    for i in range(count):
        brands.append(r.string(f"brand[{i}]"))
    r.done()
    return frozenset(brands)


def _decode_track(box: Box) -> TrackDescriptor:
    r = _Reader(box.fourcc, box.payload)
    track_id = r.u32("track_id")
    media_kind = r.enum("media_kind", _MEDIA_KIND_R)
    codec = r.enum("codec", _CODEC_R)
    stereo = r.flag("stereo")
    level = (Level(r.u8("level.major"), r.u8("level.minor"))
             if r.flag("has_level") else None)
    projection = (r.enum("projection", _PROJECTION_R)
                  if r.flag("has_projection") else None)
    dims = (PictureDims(r.u32("dims.width"), r.u32("dims.height"))
            if r.flag("has_dims") else None)
    coverage = r.region("coverage") if r.flag("has_coverage") else None
    sample_rate = r.u32("sample_rate_hz") if r.flag("has_sample_rate") \
        else None
    r.done()
    return TrackDescriptor(track_id, media_kind, codec, level, projection,
                           stereo, dims, coverage, sample_rate)


def _decode_viewpoint(box: Box) -> Viewpoint:
    r = _Reader(box.fourcc, box.payload)
    viewpoint_id = r.string("viewpoint_id")
    label = r.string("label")
    position = (r.i32("position.x"), r.i32("position.y"), r.i32("position.z"))
    gps = r.gps("gps") if r.flag("has_gps") else None
    orientation = RotationYpr(r.angle("yaw"), r.angle("pitch"),
                              r.angle("roll"))
    north = r.angle("north_offset") if r.flag("has_north_offset") else None
    group_id = r.i32("group_id")
    dynamic = r.flag("dynamic")
    loop = None
    if r.flag("has_loop"):
        loop = LoopInfo(r.u64("loop_start_ms"), r.u64("loop_end_ms"),
                        r.u32("max_loops"))
    rules = []
    for i in range(r.u32("rule_count")):
        name = f"switch_rules[{i}]"
        target = r.string(f"{name}.target")
        mode = r.enum(f"{name}.timeline_mode", _TIMELINE_R)
        region = (r.region(f"{name}.activation_region")
                  if r.flag(f"{name}.has_region") else None)
        offset = r.u64(f"{name}.offset_ms") if r.flag(f"{name}.has_offset") \
            else None
        is_default = r.flag(f"{name}.is_default")
        window = (r.u32(f"{name}.selection_window_ms")
                  if r.flag(f"{name}.has_window") else None)
        rules.append(SwitchRule(target, mode, region, offset, is_default,
                                window))
    r.done()
    return Viewpoint(viewpoint_id, label, position, gps, orientation, north,
                     group_id, tuple(rules), loop, dynamic)


def _decode_overlay(box: Box) -> Overlay:
    r = _Reader(box.fourcc, box.payload)
    overlay_id = r.u32("overlay_id")
    source_kind = r.enum("source.kind", _SOURCE_KIND_R)
    ref_id = r.u32("source.ref_id") if r.flag("source.has_ref") else None
    region = r.rect("source.region") if r.flag("source.has_region") else None
    render_kind = r.enum("rendering.kind", _RENDER_KIND_R)
    viewport_rect = None
    if r.flag("rendering.has_viewport_rect"):
        viewport_rect = NormalizedRect(
            r.f64("viewport_rect.x"), r.f64("viewport_rect.y"),
            r.f64("viewport_rect.width"), r.f64("viewport_rect.height"))
    sphere_position = (r.region("rendering.sphere_position")
                       if r.flag("rendering.has_sphere_position") else None)
    plane = None
    if r.flag("rendering.has_plane_position"):
        plane = PlanePosition(
            r.orientation("plane_position.center"),
            r.f64("plane_position.distance"), r.f64("plane_position.width"),
            r.f64("plane_position.height"))
    layering = r.i32("properties.layering_order")
    opacity = r.f64("properties.opacity")
    priority = r.u32("properties.priority")
    has_alpha = r.flag("properties.has_alpha_plane")
    bits = r.u8("interaction.controls")
    if bits >= 32:
        r.fail("interaction.controls", f"unknown control bits {bits:#x}")
    controls = frozenset(c for c, bit in _CONTROL_BITS.items() if bits & bit)
    label = r.string("interaction.label") \
        if r.flag("interaction.has_label") else None
    toggle = r.region("interaction.toggle_region") \
        if r.flag("interaction.has_toggle_region") else None
    timing = r.enum("controls_timing", _TIMING_R)
    r.done()
    return Overlay(
        overlay_id,
        OverlaySource(source_kind, ref_id, region),
        OverlayRendering(render_kind, viewport_rect, sphere_position, plane),
        OverlayProperties(layering, opacity, priority, has_alpha),
        OverlayInteraction(controls, label, toggle),
        timing)


def _decode_sample(kind: MetadataKind, box: Box) -> MetadataSample:
    r = _Reader(b"samp", box.payload)
    time_ms = r.u64("time_ms")
    if kind is MetadataKind.INITIAL_VIEWING_ORIENTATION:
        payload = r.orientation("orientation")
    elif kind is MetadataKind.RECOMMENDED_VIEWPORT:
        payload = r.region("region")
    elif kind is MetadataKind.RWQR:
        entries = []
        for i in range(r.u32("entry_count")):
            shape = r.u8(f"entries[{i}].region_type")
            if shape == 0:
                region = r.region(f"entries[{i}].region")
            elif shape == 1:
                region = r.rect(f"entries[{i}].region")
            else:
                r.fail(f"entries[{i}].region_type",
                       f"unknown region type {shape}")
            entries.append(RwqrEntry(region, r.u32(f"entries[{i}].rank")))
        payload = RwqrPayload(tuple(entries))
    elif kind is MetadataKind.ERP_REGION:
        cols = r.u32("grid_cols")
        rows = r.u32("grid_rows")
        value_kind = r.enum("value_kind", _VALUE_KIND_R)
        if cols * rows > r.remaining() // 8:
            r.fail("cell_values",
                   f"{cols}x{rows} grid exceeds the sample payload")
        values = tuple(r.f64(f"cell_values[{i}]")
                       for i in range(cols * rows))
        payload = ErpRegionPayload(cols, rows, values, value_kind)
    elif kind is MetadataKind.DYNAMIC_VIEWPOINT:
        viewpoint_id = r.string("viewpoint_id")
        position = (r.i32("position.x"), r.i32("position.y"),
                    r.i32("position.z"))
        gps = r.gps("gps") if r.flag("has_gps") else None
        payload = DynamicViewpointPayload(viewpoint_id, position, gps)
    else:
        entries = []
        for i in range(r.u32("entry_count")):
            overlay_id = r.u32(f"entries[{i}].overlay_id")
            active = r.flag(f"entries[{i}].active")
            opacity = (r.f64(f"entries[{i}].opacity")
                       if r.flag(f"entries[{i}].has_opacity") else None)
            entries.append(OverlayControlEntry(overlay_id, active, opacity))
        payload = OverlayControlsPayload(tuple(entries))
    r.done()
    return MetadataSample(time_ms, payload)


def _decode_metadata(box: Box) -> TimedMetadataTrack:
    children = box.payload
    if not children or children[0].fourcc != b"tmhd":
        raise FieldDecodeError(box.fourcc, "tmhd",
                               "first child must be a tmhd box")
    r = _Reader(b"tmhd", children[0].payload)
    track_id = r.u32("track_id")
    kind = r.enum("kind", _METADATA_KIND_R)
    r.done()
    samples = []
    for child in children[1:]:
        if child.fourcc != b"samp":
            raise FieldDecodeError(
                box.fourcc, "samples",
                f"unexpected '{child.fourcc.decode('ascii', 'replace')}' "
                "child box")
        samples.append(_decode_sample(kind, child))
    return TimedMetadataTrack(track_id, kind, tuple(samples))


def _decode_tile_group(box: Box) -> TileGroup:
    r = _Reader(box.fourcc, box.payload)
    group_id = r.u32("group_id")
    members = []
    for i in range(r.u32("member_count")):
        name = f"members[{i}]"
        members.append(TileMember(
            r.u32(f"{name}.track_id"),
            (r.i32(f"{name}.col"), r.i32(f"{name}.row")),
            r.rect(f"{name}.source_rect")))
    r.done()
    return TileGroup(group_id, tuple(members))


def _decode_viewing_space(box: Box) -> ViewingSpace:
    r = _Reader(box.fourcc, box.payload)
    shape = r.enum("shape", _SHAPE_R)
    extents = tuple(r.u32(f"extent_mm[{i}]")
                    for i in range(r.u8("extent_count")))
    r.done()
    return ViewingSpace(shape, extents)


def decode_presentation(data: bytes) -> Presentation:
    """Parse OMB bytes back into a Presentation.

    Unknown top-level boxes land in `extras` with their position;
    anything structurally wrong inside a known box raises a parse error
    naming the box and field.
    """
    boxes = decode_box_tree(data, containers=CONTAINER_FOURCCS)
    brands = None
    tracks = []
    viewpoints = []
    overlays = []
    timed_metadata = []
    tile_groups = []
    viewing_space = None
    extras = []
    for index, box in enumerate(boxes):
        if box.fourcc == HEADER_FOURCC:
            if brands is not None:
                raise FieldDecodeError(box.fourcc, "(box)",
                                       "duplicate header box")
            brands = _decode_header(box)
        elif box.fourcc == TRACK_FOURCC:
            tracks.append(_decode_track(box))
        elif box.fourcc == VIEWPOINT_FOURCC:
            viewpoints.append(_decode_viewpoint(box))
        elif box.fourcc == OVERLAY_FOURCC:
            overlays.append(_decode_overlay(box))
        elif box.fourcc == METADATA_FOURCC:
            timed_metadata.append(_decode_metadata(box))
        elif box.fourcc == TILEGROUP_FOURCC:
            tile_groups.append(_decode_tile_group(box))
        elif box.fourcc == VIEWINGSPACE_FOURCC:
            if viewing_space is not None:
                raise FieldDecodeError(box.fourcc, "(box)",
                                       "duplicate viewing space box")
            viewing_space = _decode_viewing_space(box)
        else:
            extras.append((index, encode_box_tree([box])))
    if brands is None:
        raise FieldDecodeError(HEADER_FOURCC, "(box)",
                               "missing header box")
    return Presentation(
        brands=brands,
        tracks=tuple(tracks),
        viewpoints=tuple(viewpoints),
        overlays=tuple(overlays),
        timed_metadata=tuple(timed_metadata),
        tile_groups=tuple(tile_groups),
        viewing_space=viewing_space,
        extras=tuple(extras),
    )
