"""Conformance checking against OMAF media profiles and related specs.

The rule tables below transcribe the OMAF 2nd-edition media profiles
for video, images, audio, and timed text, the VR video operation
points of 3GPP TS 26.118, and the profile recommendations of the VRIF
Guidelines.  A track either satisfies every constraint of a rule or is
reported with the first constraint it misses, checked in the fixed
order codec, level, projection, stereo, sampling rate.

Levels compare as (major, minor) integer pairs, so 5.1 < 5.2 < 6.1 and
there is no 5.1-versus-5.10 float ambiguity.  Rows whose level column
reads "any" carry no level constraint at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import UsageError
from .model import (
    Codec,
    Level,
    MediaKind,
    Presentation,
    Projection,
    TrackDescriptor,
)


@dataclass(frozen=True)
class ProfileRule:
    """One table row: the constraints a track must meet to conform."""

    profile_name: str
    media_kind: MediaKind
    required_codecs: frozenset[Codec]
    max_level: Optional[Level] = None
    allowed_projections: Optional[frozenset[Projection]] = None
    stereo_allowed: Optional[bool] = None
    max_sample_rate_hz: Optional[int] = None


@dataclass(frozen=True)
class ProfileFailure:
    profile: str
    reason: str


@dataclass(frozen=True)
class TrackConformance:
    """Which profiles one track matches, and why the rest failed."""

    track_id: int
    matched: tuple[str, ...]
    unmatched: tuple[ProfileFailure, ...]

    def as_dict(self) -> dict:
        return {
            "track_id": self.track_id,
            "matched": list(self.matched),
            "unmatched": [{"profile": f.profile, "reason": f.reason}
                          for f in self.unmatched],
        }


def _rule(name, kind, codecs, level=None, projections=None, stereo=None,
          rate=None):
    return ProfileRule(
        profile_name=name,
        media_kind=kind,
        required_codecs=frozenset(codecs),
        max_level=Level.parse(level) if level is not None else None,
        allowed_projections=(frozenset(projections)
                             if projections is not None else None),
        stereo_allowed=stereo,
        max_sample_rate_hz=rate,
    )


_ERP = {Projection.ERP}
_ERP_CMP = {Projection.ERP, Projection.CMP}

VIDEO_PROFILES = (
    _rule("HEVC-based viewport-independent OMAF video profile",
          MediaKind.VIDEO, {Codec.HEVC_MAIN10}, "5.1", _ERP),
    _rule("Unconstrained HEVC-based viewport-independent OMAF video profile",
          MediaKind.VIDEO, {Codec.HEVC_MAIN10}, None, _ERP),
    _rule("HEVC-based viewport-dependent OMAF video profile",
          MediaKind.VIDEO, {Codec.HEVC_MAIN10}, "5.1", _ERP_CMP),
    _rule("AVC-based viewport-dependent OMAF video profile",
          MediaKind.VIDEO, {Codec.AVC_PROGRESSIVE_HIGH}, "5.1", _ERP_CMP),
    _rule("Simple tiling OMAF video profile",
          MediaKind.VIDEO, {Codec.HEVC_MAIN10}, None, _ERP_CMP),
    _rule("Advanced tiling OMAF video profile",
          MediaKind.VIDEO, {Codec.HEVC_MAIN10}, None, {Projection.MESH}),
)

IMAGE_PROFILES = (
    _rule("OMAF HEVC image profile", MediaKind.IMAGE,
          {Codec.HEVC_MAIN10}, "5.1"),
    _rule("OMAF legacy image profile", MediaKind.IMAGE, {Codec.JPEG}),
)

AUDIO_PROFILES = (
    _rule("OMAF 3D audio baseline profile", MediaKind.AUDIO,
          {Codec.MPEGH_LC}, "3", rate=48_000),
    _rule("OMAF 2D audio legacy profile", MediaKind.AUDIO,
          {Codec.AAC_HEV2}, "4", rate=48_000),
)

TEXT_PROFILES = (
    _rule("OMAF IMSC1 timed text profile", MediaKind.TIMED_TEXT,
          {Codec.IMSC1_TEXT, Codec.IMSC1_IMAGE}),
    _rule("OMAF WebVTT timed text profile", MediaKind.TIMED_TEXT,
          {Codec.WEBVTT}),
)

OPERATION_POINTS_3GPP = (
    _rule("Basic H.264/AVC", MediaKind.VIDEO, {Codec.AVC_HIGH}, "5.1",
          _ERP, stereo=False),
    _rule("Main H.265/HEVC", MediaKind.VIDEO, {Codec.HEVC_MAIN10}, "5.1",
          _ERP, stereo=True),
    _rule("Main 8K H.265/HEVC", MediaKind.VIDEO, {Codec.HEVC_MAIN10}, "6.1",
          _ERP, stereo=True),
    _rule("Flexible H.265/HEVC", MediaKind.VIDEO, {Codec.HEVC_MAIN10}, "5.1",
          _ERP_CMP, stereo=True),
)

ALL_PROFILE_TABLES = (VIDEO_PROFILES, IMAGE_PROFILES, AUDIO_PROFILES,
                      TEXT_PROFILES, OPERATION_POINTS_3GPP)

#: video profiles the VRIF Guidelines recommend for distribution
VRIF_RECOMMENDED_VIDEO = (
    "HEVC-based viewport-independent OMAF video profile",
    "Unconstrained HEVC-based viewport-independent OMAF video profile",
    "HEVC-based viewport-dependent OMAF video profile",
    "Simple tiling OMAF video profile",
)

#: the subset specifically recommended for 8K content
VRIF_8K_VIDEO = (
    "Unconstrained HEVC-based viewport-independent OMAF video profile",
    "Simple tiling OMAF video profile",
)

VRIF_AUDIO = "OMAF 3D audio baseline profile"

EIGHT_K_WIDTH = 8192


def _check_rule(rule: ProfileRule, t: TrackDescriptor) -> Optional[str]:
    """The first failed constraint of `rule` for `t`, or None on match."""
    if t.codec not in rule.required_codecs:
        return "codec"
    if rule.max_level is not None:
        if t.level is None or t.level > rule.max_level:
            return "level"
    if rule.allowed_projections is not None:
        if t.projection not in rule.allowed_projections:
            return "projection"
    if rule.stereo_allowed is False and t.stereo:
        return "stereo"
    if rule.max_sample_rate_hz is not None:
        if t.sample_rate_hz is not None \
                and t.sample_rate_hz > rule.max_sample_rate_hz:
            return "max sampling rate"
    return None


def _match(rules, t: TrackDescriptor) -> TrackConformance:
    matched = []
    unmatched = []
    for rule in rules:
        reason = _check_rule(rule, t)
        if reason is None:
            matched.append(rule.profile_name)
        else:
            unmatched.append(ProfileFailure(rule.profile_name, reason))
    return TrackConformance(t.track_id, tuple(matched), tuple(unmatched))


def match_video_profiles(t: TrackDescriptor) -> TrackConformance:
    """Evaluate a video track against all six OMAF video profiles."""
    if t.media_kind is not MediaKind.VIDEO:
        raise UsageError(
            f"video profile matching needs a video track, got "
            f"{t.media_kind.value}")
    return _match(VIDEO_PROFILES, t)


def match_image_audio_text_profiles(t: TrackDescriptor) -> TrackConformance:
    """Evaluate an image, audio, or timed-text track against its table."""
    tables = {
        MediaKind.IMAGE: IMAGE_PROFILES,
        MediaKind.AUDIO: AUDIO_PROFILES,
        MediaKind.TIMED_TEXT: TEXT_PROFILES,
    }
    if t.media_kind not in tables:
        raise UsageError(
            f"expected an image, audio, or timed_text track, got "
            f"{t.media_kind.value}")
    return _match(tables[t.media_kind], t)


def match_3gpp_operation_points(t: TrackDescriptor) -> TrackConformance:
    """Evaluate a video track against the 3GPP VR operation points."""
    if t.media_kind is not MediaKind.VIDEO:
        raise UsageError(
            f"operation point matching needs a video track, got "
            f"{t.media_kind.value}")
    return _match(OPERATION_POINTS_3GPP, t)


def conformance_report(p: Presentation,
                       use_3gpp: bool = False) -> list[TrackConformance]:
    """Per-track conformance for every media track of a presentation.

    With `use_3gpp` video tracks are checked against the 3GPP operation
    points instead of the OMAF video profiles; non-video tracks are
    skipped in that mode.  Timed-metadata tracks are never checked.
    """
    report = []
    for t in p.tracks:
        if t.media_kind is MediaKind.VIDEO:
            report.append(match_3gpp_operation_points(t) if use_3gpp
                          else match_video_profiles(t))
        elif not use_3gpp and t.media_kind in (
                MediaKind.IMAGE, MediaKind.AUDIO, MediaKind.TIMED_TEXT):
            report.append(match_image_audio_text_profiles(t))
    return report


# ---------------------------------------------------------------------------
# VRIF Guidelines


@dataclass(frozen=True)
class VrifFinding:
    code: str
    message: str
    profiles: tuple[str, ...] = ()
    track_ids: tuple[int, ...] = ()

    def as_dict(self) -> dict:
        out = {"code": self.code, "message": self.message}
        if self.profiles:
            out["profiles"] = list(self.profiles)
        if self.track_ids:
            out["track_ids"] = list(self.track_ids)
        return out


def _is_full_coverage(t: TrackDescriptor) -> bool:
    if t.coverage is None:
        return True
    return (t.coverage.azimuth_range >= 360
            and t.coverage.elevation_range >= 180)


def vrif_recommendation_report(p: Presentation) -> list[VrifFinding]:
    """Relate a presentation to the VRIF Guidelines recommendations.

    Reports which recommended profiles the tracks can conform to, the
    8K-specific profile recommendations when 8K-wide video is present,
    toolset-brand suggestions for overlays and multiple viewpoints, and
    the FOV-enhanced pattern of one full-coverage stream plus several
    sub-picture streams.
    """
    findings = []
    video_tracks = [t for t in p.tracks if t.media_kind is MediaKind.VIDEO]
    matched_by_track = {t.track_id: frozenset(match_video_profiles(t).matched)
                        for t in video_tracks}
    for profile in VRIF_RECOMMENDED_VIDEO:
        users = tuple(t.track_id for t in video_tracks
                      if profile in matched_by_track[t.track_id])
        if users:
            findings.append(VrifFinding(
                "RECOMMENDED_PROFILE_USABLE",
                f"track(s) {', '.join(map(str, users))} can conform to the "
                f"VRIF-recommended {profile}",
                profiles=(profile,), track_ids=users))
    audio_users = tuple(
        t.track_id for t in p.tracks
        if t.media_kind is MediaKind.AUDIO
        and VRIF_AUDIO in match_image_audio_text_profiles(t).matched)
    if audio_users:
        findings.append(VrifFinding(
            "RECOMMENDED_AUDIO_USABLE",
            f"track(s) {', '.join(map(str, audio_users))} can conform to "
            f"the VRIF-recommended {VRIF_AUDIO}",
            profiles=(VRIF_AUDIO,), track_ids=audio_users))
    eight_k = tuple(t.track_id for t in video_tracks
                    if t.dims is not None
                    and t.dims.width >= EIGHT_K_WIDTH)
    if eight_k:
        findings.append(VrifFinding(
            "EIGHT_K_RECOMMENDATION",
            "8K video present; the VRIF Guidelines specifically recommend "
            + " and ".join(VRIF_8K_VIDEO) + " for 8K",
            profiles=VRIF_8K_VIDEO, track_ids=eight_k))
    if p.overlays:
        findings.append(VrifFinding(
            "OVERLAY_TOOLSET_SUGGESTED",
            "presentation uses overlays; VRIF suggests supporting the "
            "overlay toolset brand"))
    if len(p.viewpoints) >= 2:
        findings.append(VrifFinding(
            "VIEWPOINT_TOOLSET_SUGGESTED",
            "presentation has multiple viewpoints; VRIF suggests "
            "supporting the viewpoint toolset brand"))
    by_codec: dict[Codec, list[TrackDescriptor]] = {}
    for t in video_tracks:
        by_codec.setdefault(t.codec, []).append(t)
    for codec, tracks in sorted(by_codec.items(), key=lambda kv: kv[0].value):
        full = [t for t in tracks if _is_full_coverage(t)]
        partial = [t for t in tracks if not _is_full_coverage(t)]
        if len(full) == 1 and len(partial) >= 2:
            findings.append(VrifFinding(
                "FOV_ENHANCED_PATTERN",
                f"one full-coverage {codec.value} track plus "
                f"{len(partial)} sub-picture tracks match the HEVC-based "
                "FOV enhanced video profile pattern",
                track_ids=tuple(sorted(t.track_id
                                       for t in full + partial))))
    return findings
