"""Minimal DASH MPD generation and parsing with OMAF descriptors.

Only a small slice of the MPD grammar is produced here, documented in
docs/mpd-subset.md.  Two OMAF-specific descriptors are carried:

* VWPT (viewpoint information), written as a ``Viewpoint`` element on each
  adaptation set holding a viewpoint's background media.
* OVLY (overlay information), written as a ``SupplementalProperty`` element
  on each adaptation set holding an overlay-source track, so a client can
  tell overlay media apart from background media straight from the MPD.

The scheme URNs default to documented placeholders
(``urn:example:omaf:vwpt`` / ``urn:example:omaf:ovly``) so manifests are
clearly marked as experimental; both are configurable for interop tests
against other tools.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from enum import Enum

from .errors import DataError, ParseError
from .model import (
    GpsPosition,
    MediaKind,
    OverlaySourceKind,
    Presentation,
    error_count,
    validate_presentation,
)

DASH_NAMESPACE = "urn:mpeg:dash:schema:mpd:2011"
MPD_PROFILE = "urn:mpeg:dash:profile:isoff-on-demand:2011"

DEFAULT_VWPT_URN = "urn:example:omaf:vwpt"
DEFAULT_OVLY_URN = "urn:example:omaf:ovly"


class MpdParseError(ParseError):
    """The MPD text or one of its descriptor values could not be read."""

    code = "MPD_PARSE"


class MpdRefusedError(DataError):
    """generate_mpd was handed a presentation with validation errors."""

    code = "MPD_REFUSED"

    def __init__(self, report):
        codes = sorted({i.code for i in report if i.severity == "error"})
        super().__init__(
            "presentation has validation errors: " + ", ".join(codes))
        self.report = report


class ContentKind(str, Enum):
    """What an adaptation set carries."""

    BACKGROUND = "background"
    OVERLAY = "overlay"
    AUDIO = "audio"
    METADATA = "metadata"


# contentType attribute values per content kind (and back).
_CONTENT_TYPES = {
    ContentKind.BACKGROUND: "video",
    ContentKind.OVERLAY: "video",
    ContentKind.AUDIO: "audio",
    ContentKind.METADATA: "application",
}


@dataclass(frozen=True)
class VwptDescriptor:
    """Viewpoint information attached to a background adaptation set."""

    viewpoint_id: str
    position_xyz: tuple[float, float, float] = (0.0, 0.0, 0.0)
    group_id: int = 0
    gps: GpsPosition | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "position_xyz",
            tuple(float(c) for c in self.position_xyz))

    def as_dict(self) -> dict:
        gps = None
        if self.gps is not None:
            gps = {"latitude": self.gps.latitude,
                   "longitude": self.gps.longitude,
                   "altitude": self.gps.altitude}
        return {"viewpoint_id": self.viewpoint_id,
                "position_xyz": list(self.position_xyz),
                "group_id": self.group_id,
                "gps": gps}


@dataclass(frozen=True)
class OvlyDescriptor:
    """Overlay information attached to an overlay adaptation set."""

    overlay_ids: tuple[int, ...]
    priorities: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "overlay_ids", tuple(self.overlay_ids))
        if self.priorities is not None:
            object.__setattr__(self, "priorities", tuple(self.priorities))

    def as_dict(self) -> dict:
        return {"overlay_ids": list(self.overlay_ids),
                "priorities": None if self.priorities is None
                else list(self.priorities)}


@dataclass(frozen=True)
class AdaptationSetInfo:
    set_id: str
    content_kind: ContentKind
    representation_ids: tuple[str, ...] = ()
    vwpt: VwptDescriptor | None = None
    ovly: OvlyDescriptor | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "representation_ids", tuple(self.representation_ids))

    def as_dict(self) -> dict:
        return {"id": self.set_id,
                "kind": self.content_kind.value,
                "representations": list(self.representation_ids),
                "vwpt": None if self.vwpt is None else self.vwpt.as_dict(),
                "ovly": None if self.ovly is None else self.ovly.as_dict()}


@dataclass(frozen=True)
class MpdDocument:
    adaptation_sets: tuple[AdaptationSetInfo, ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "adaptation_sets", tuple(self.adaptation_sets))

    def vwpt_descriptors(self) -> tuple[VwptDescriptor, ...]:
        return tuple(a.vwpt for a in self.adaptation_sets
                     if a.vwpt is not None)

    def ovly_descriptors(self) -> tuple[OvlyDescriptor, ...]:
        return tuple(a.ovly for a in self.adaptation_sets
                     if a.ovly is not None)

    def as_dict(self) -> dict:
        return {"adaptation_sets":
                [a.as_dict() for a in self.adaptation_sets]}


# --------------------------------------------------------------------------
# Descriptor value syntax
#
# VWPT: "viewpoint_id,x,y,z,group_id[,lat,lon[,alt]]"
# OVLY: "id,id,..." or "id,id,...;priority,priority,..."

def _number(x: float) -> str:
    # repr() is the shortest string that round-trips the float exactly.
    return repr(float(x))


def vwpt_value(d: VwptDescriptor) -> str:
    parts = [d.viewpoint_id]
    parts.extend(_number(c) for c in d.position_xyz)
    parts.append(str(d.group_id))
    if d.gps is not None:
        parts.append(_number(d.gps.latitude))
        parts.append(_number(d.gps.longitude))
        if d.gps.altitude is not None:
            parts.append(_number(d.gps.altitude))
    return ",".join(parts)


def parse_vwpt_value(value: str) -> VwptDescriptor:
    parts = value.split(",")
    if len(parts) not in (5, 7, 8):
        raise MpdParseError(
            f"VWPT value has {len(parts)} fields, expected 5, 7 or 8",
            code="DESCRIPTOR_VALUE")
    if not parts[0]:
        raise MpdParseError("VWPT value has an empty viewpoint id",
                            code="DESCRIPTOR_VALUE")
    try:
        xyz = tuple(float(s) for s in parts[1:4])
        group_id = int(parts[4])
        gps = None
        if len(parts) >= 7:
            altitude = float(parts[7]) if len(parts) == 8 else None
            gps = GpsPosition(float(parts[5]), float(parts[6]), altitude)
    except ValueError:
        raise MpdParseError(f"VWPT value {value!r} has a malformed number",
                            code="DESCRIPTOR_VALUE") from None
    return VwptDescriptor(parts[0], xyz, group_id, gps)


def ovly_value(d: OvlyDescriptor) -> str:
    ids = ",".join(str(i) for i in d.overlay_ids)
    if d.priorities is None:
        return ids
    return ids + ";" + ",".join(str(p) for p in d.priorities)


def parse_ovly_value(value: str) -> OvlyDescriptor:
    head, sep, tail = value.partition(";")
    try:
        ids = tuple(int(s) for s in head.split(",")) if head else ()
        priorities = tuple(int(s) for s in tail.split(",")) if sep else None
    except ValueError:
        raise MpdParseError(f"OVLY value {value!r} has a malformed id",
                            code="DESCRIPTOR_VALUE") from None
    if not ids:
        raise MpdParseError("OVLY value lists no overlay ids",
                            code="DESCRIPTOR_VALUE")
    if priorities is not None and len(priorities) != len(ids):
        raise MpdParseError(
            f"OVLY lists {len(ids)} ids but {len(priorities)} priorities",
            code="PRIORITY_LEN_MISMATCH")
    return OvlyDescriptor(ids, priorities)


# --------------------------------------------------------------------------
# Document construction

def _clean_id(kind: str, value: str) -> str:
    if "," in value or ";" in value:
        raise DataError(
            f"{kind} id {value!r} cannot appear in a descriptor value "
            "(',' and ';' are reserved)", code="ID_NOT_ENCODABLE")
    return value


def mpd_document(p: Presentation) -> MpdDocument:
    """The adaptation-set layout generate_mpd will serialize for ``p``.

    One background adaptation set is emitted per viewpoint (sharing the
    presentation's background video representations), one overlay set per
    overlay-source track, and one set per audio and timed-metadata track.
    Image items, text tracks and non-track overlay sources have no
    streamable representation in this subset and are omitted.
    """
    report = validate_presentation(p)
    if error_count(report):
        raise MpdRefusedError(report)

    track_sourced = (OverlaySourceKind.VIDEO_TRACK,
                     OverlaySourceKind.REGION_OF_TRACK)
    by_source: dict[int, list] = {}
    for o in p.overlays:
        if o.source.kind in track_sourced:
            by_source.setdefault(o.source.ref_id, []).append(o)

    background = tuple(
        f"trk-{t.track_id}" for t in p.tracks
        if t.media_kind is MediaKind.VIDEO and t.track_id not in by_source)

    sets = []
    if p.viewpoints:
        for vp in p.viewpoints:
            vp_id = _clean_id("viewpoint", vp.viewpoint_id)
            sets.append(AdaptationSetInfo(
                set_id=f"bg-{vp_id}",
                content_kind=ContentKind.BACKGROUND,
                representation_ids=background,
                vwpt=VwptDescriptor(vp_id, vp.position_xyz, vp.group_id,
                                    vp.gps)))
    elif background:
        sets.append(AdaptationSetInfo("bg", ContentKind.BACKGROUND,
                                      background))
    for track_id in sorted(by_source):
        group = sorted(by_source[track_id], key=lambda o: o.overlay_id)
        sets.append(AdaptationSetInfo(
            set_id=f"ovl-{track_id}",
            content_kind=ContentKind.OVERLAY,
            representation_ids=(f"trk-{track_id}",),
            ovly=OvlyDescriptor(
                tuple(o.overlay_id for o in group),
                tuple(o.properties.priority for o in group))))
    for t in p.tracks:
        if t.media_kind is MediaKind.AUDIO:
            sets.append(AdaptationSetInfo(
                f"aud-{t.track_id}", ContentKind.AUDIO,
                (f"trk-{t.track_id}",)))
    for track in p.timed_metadata:
        sets.append(AdaptationSetInfo(
            f"md-{track.track_id}", ContentKind.METADATA,
            (f"trk-{track.track_id}",)))
    return MpdDocument(tuple(sets))


def generate_mpd(p: Presentation, *,
                 vwpt_urn: str = DEFAULT_VWPT_URN,
                 ovly_urn: str = DEFAULT_OVLY_URN) -> str:
    """Serialize ``p`` as MPD text.  Deterministic for identical inputs."""
    doc = mpd_document(p)
    tracks = {f"trk-{t.track_id}": t for t in p.tracks}

    mpd = ET.Element("MPD")
    mpd.set("xmlns", DASH_NAMESPACE)
    mpd.set("profiles", MPD_PROFILE)
    mpd.set("type", "static")
    mpd.set("minBufferTime", "PT2S")
    period = ET.SubElement(mpd, "Period")
    period.set("id", "P0")
    for aset in doc.adaptation_sets:
        el = ET.SubElement(period, "AdaptationSet")
        el.set("id", aset.set_id)
        el.set("contentType", _CONTENT_TYPES[aset.content_kind])
        if aset.vwpt is not None:
            desc = ET.SubElement(el, "Viewpoint")
            desc.set("schemeIdUri", vwpt_urn)
            desc.set("value", vwpt_value(aset.vwpt))
        if aset.ovly is not None:
            desc = ET.SubElement(el, "SupplementalProperty")
            desc.set("schemeIdUri", ovly_urn)
            desc.set("value", ovly_value(aset.ovly))
        for rep_id in aset.representation_ids:
            rep = ET.SubElement(el, "Representation")
            rep.set("id", rep_id)
            track = tracks.get(rep_id)
            if track is None:
                continue
            rep.set("codecs", track.codec.value)
            if track.dims is not None:
                rep.set("width", str(track.dims.width))
                rep.set("height", str(track.dims.height))
            if track.sample_rate_hz is not None:
                rep.set("audioSamplingRate", str(track.sample_rate_hz))
    ET.indent(mpd, space="  ")
    return ('<?xml version="1.0" encoding="utf-8"?>\n'
            + ET.tostring(mpd, encoding="unicode") + "\n")


# --------------------------------------------------------------------------
# Parsing

def _local(tag) -> str:
    # "{namespace}AdaptationSet" -> "AdaptationSet"
    return tag.rsplit("}", 1)[-1] if isinstance(tag, str) else ""


def _infer_kind(el, vwpt, ovly) -> ContentKind:
    if ovly is not None:
        return ContentKind.OVERLAY
    if vwpt is not None:
        return ContentKind.BACKGROUND
    content_type = (el.get("contentType") or "").lower()
    if content_type == "audio":
        return ContentKind.AUDIO
    if content_type in ("application", "text"):
        return ContentKind.METADATA
    return ContentKind.BACKGROUND


def parse_mpd(text: str, *,
              vwpt_urn: str = DEFAULT_VWPT_URN,
              ovly_urn: str = DEFAULT_OVLY_URN) -> MpdDocument:
    """Extract adaptation sets and OMAF descriptors from MPD text.

    Unknown elements and attributes are ignored, so manifests from other
    generators parse as long as they are well-formed XML; adaptation sets
    without OMAF descriptors come back with empty descriptor slots.
    """
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise MpdParseError(f"malformed XML: {exc}",
                            code="XML_SYNTAX") from None
    if _local(root.tag) != "MPD":
        raise MpdParseError(
            f"root element is {_local(root.tag)!r}, expected MPD",
            code="NOT_MPD")
    sets = []
    index = 0
    for el in root.iter():
        if _local(el.tag) != "AdaptationSet":
            continue
        vwpt = None
        ovly = None
        reps = []
        for child in el:
            scheme = child.get("schemeIdUri")
            if scheme == vwpt_urn:
                vwpt = parse_vwpt_value(child.get("value") or "")
            elif scheme == ovly_urn:
                ovly = parse_ovly_value(child.get("value") or "")
            elif _local(child.tag) == "Representation" and child.get("id"):
                reps.append(child.get("id"))
        sets.append(AdaptationSetInfo(
            el.get("id") or f"as-{index}",
            _infer_kind(el, vwpt, ovly),
            tuple(reps), vwpt, ovly))
        index += 1
    return MpdDocument(tuple(sets))
