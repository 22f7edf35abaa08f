import random

import pytest

from omaf_toolkit.dash import (
    MpdParseError,
    MpdRefusedError,
    ContentKind,
    generate_mpd,
    mpd_document,
    parse_mpd,
    parse_ovly_value,
    parse_vwpt_value,
)
from omaf_toolkit.errors import DataError
from omaf_toolkit.geometry import PictureDims
from omaf_toolkit.model import (
    Codec,
    GpsPosition,
    Level,
    MediaKind,
    NormalizedRect,
    Overlay,
    OverlayProperties,
    OverlayRendering,
    OverlayRenderingKind,
    OverlaySource,
    OverlaySourceKind,
    Presentation,
    Projection,
    TrackDescriptor,
    Viewpoint,
)

from gen import random_presentation


def video_track(track_id, dims=None):
    return TrackDescriptor(track_id, MediaKind.VIDEO, Codec.HEVC_MAIN10,
                           Level(5, 1), Projection.ERP, dims=dims)


def viewport_overlay(overlay_id, source_track, priority=0):
    return Overlay(
        overlay_id,
        OverlaySource(OverlaySourceKind.VIDEO_TRACK, ref_id=source_track),
        OverlayRendering(OverlayRenderingKind.VIEWPORT_RELATIVE,
                         viewport_rect=NormalizedRect(0.1, 0.1, 0.3, 0.3)),
        OverlayProperties(priority=priority))


class TestGenerate:
    def test_empty_presentation_is_minimal(self):
        text = generate_mpd(Presentation())
        assert text.startswith('<?xml version="1.0"')
        assert "AdaptationSet" not in text
        assert parse_mpd(text).adaptation_sets == ()

    def test_one_vwpt_set_per_viewpoint(self):
        p = Presentation(
            tracks=(video_track(1),),
            viewpoints=(Viewpoint("vp1"), Viewpoint("vp2", group_id=7)))
        doc = parse_mpd(generate_mpd(p))
        vwpts = doc.vwpt_descriptors()
        assert [d.viewpoint_id for d in vwpts] == ["vp1", "vp2"]
        assert vwpts[1].group_id == 7
        assert all(a.content_kind is ContentKind.BACKGROUND
                   and a.representation_ids == ("trk-1",)
                   for a in doc.adaptation_sets)

    def test_shared_source_track_yields_one_ovly(self):
        p = Presentation(
            tracks=(video_track(1), video_track(2)),
            overlays=(viewport_overlay(1, 2, priority=0),
                      viewport_overlay(2, 2, priority=3)))
        text = generate_mpd(p)
        assert 'value="1,2;0,3"' in text
        doc = parse_mpd(text)
        (ovly,) = doc.ovly_descriptors()
        assert ovly.overlay_ids == (1, 2)
        assert ovly.priorities == (0, 3)
        kinds = [a.content_kind for a in doc.adaptation_sets]
        assert kinds == [ContentKind.BACKGROUND, ContentKind.OVERLAY]

    def test_invalid_presentation_refused(self):
        p = Presentation(overlays=(viewport_overlay(1, 99),))
        with pytest.raises(MpdRefusedError, match="DANGLING_REF"):
            generate_mpd(p)

    def test_deterministic_output(self):
        p = random_presentation(random.Random(7))
        assert generate_mpd(p) == generate_mpd(p)

    def test_comma_in_viewpoint_id_refused(self):
        p = Presentation(viewpoints=(Viewpoint("a,b"),))
        with pytest.raises(DataError, match="reserved"):
            generate_mpd(p)

    def test_representation_attributes(self):
        p = Presentation(tracks=(
            video_track(1, dims=PictureDims(3840, 1920)),
            TrackDescriptor(2, MediaKind.AUDIO, Codec.MPEGH_LC, Level(3),
                            sample_rate_hz=48_000)))
        text = generate_mpd(p)
        assert 'width="3840"' in text and 'height="1920"' in text
        assert 'audioSamplingRate="48000"' in text
        doc = parse_mpd(text)
        assert [a.content_kind for a in doc.adaptation_sets] == [
            ContentKind.BACKGROUND, ContentKind.AUDIO]

    def test_custom_urns(self):
        p = Presentation(tracks=(video_track(1),),
                         viewpoints=(Viewpoint("vp1"),))
        urn = "urn:mpeg:mpegI:omaf:2018:vwpt"
        text = generate_mpd(p, vwpt_urn=urn)
        assert parse_mpd(text, vwpt_urn=urn).vwpt_descriptors() != ()
        assert parse_mpd(text).vwpt_descriptors() == ()

    def test_gps_carried_in_vwpt(self):
        p = Presentation(
            tracks=(video_track(1),),
            viewpoints=(
                Viewpoint("vp1", gps=GpsPosition(60.17, 24.95)),
                Viewpoint("vp2", gps=GpsPosition(60.17, 24.95, 12.5))))
        vwpts = parse_mpd(generate_mpd(p)).vwpt_descriptors()
        assert vwpts[0].gps == GpsPosition(60.17, 24.95)
        assert vwpts[0].gps.altitude is None
        assert vwpts[1].gps.altitude == 12.5


class TestParse:
    def test_malformed_xml(self):
        with pytest.raises(MpdParseError) as err:
            parse_mpd("<MPD><Period></MPD>")
        assert err.value.code == "XML_SYNTAX"

    def test_wrong_root_element(self):
        with pytest.raises(MpdParseError) as err:
            parse_mpd("<SMIL/>")
        assert err.value.code == "NOT_MPD"

    def test_priority_length_mismatch(self):
        with pytest.raises(MpdParseError) as err:
            parse_ovly_value("1,2;0")
        assert err.value.code == "PRIORITY_LEN_MISMATCH"

    def test_priority_mismatch_inside_document(self):
        text = (
            '<MPD><Period><AdaptationSet id="ovl-9">'
            '<SupplementalProperty schemeIdUri="urn:example:omaf:ovly"'
            ' value="1,2;0"/>'
            "</AdaptationSet></Period></MPD>")
        with pytest.raises(MpdParseError) as err:
            parse_mpd(text)
        assert err.value.code == "PRIORITY_LEN_MISMATCH"

    @pytest.mark.parametrize("value", ["", ";", "1,x", "1;0,a"])
    def test_bad_ovly_values(self, value):
        with pytest.raises(MpdParseError) as err:
            parse_ovly_value(value)
        assert err.value.code == "DESCRIPTOR_VALUE"

    @pytest.mark.parametrize("value", [
        "", "vp1", "vp1,0,0,0", "vp1,0,0,0,0,60", ",0,0,0,0",
        "vp1,x,0,0,0", "vp1,0,0,0,1.5"])
    def test_bad_vwpt_values(self, value):
        with pytest.raises(MpdParseError) as err:
            parse_vwpt_value(value)
        assert err.value.code == "DESCRIPTOR_VALUE"

    def test_plain_dash_mpd_has_no_descriptors(self):
        text = (
            '<MPD xmlns="urn:mpeg:dash:schema:mpd:2011" type="static">'
            '<Period><AdaptationSet id="v" contentType="video" lang="en">'
            '<Role schemeIdUri="urn:mpeg:dash:role:2011" value="main"/>'
            '<Representation id="r1" bandwidth="500000"/>'
            "</AdaptationSet></Period></MPD>")
        doc = parse_mpd(text)
        assert doc.vwpt_descriptors() == ()
        assert doc.ovly_descriptors() == ()
        (aset,) = doc.adaptation_sets
        assert aset.set_id == "v"
        assert aset.representation_ids == ("r1",)
        assert aset.content_kind is ContentKind.BACKGROUND

    def test_unknown_elements_and_attributes_ignored(self):
        text = (
            '<MPD xmlns:x="urn:other" someattr="1"><Gadget/>'
            '<Period><AdaptationSet contentType="audio" x:extra="yes">'
            "<x:Widget>text</x:Widget>"
            '<Representation id="a1"><BaseURL>seg/</BaseURL>'
            "</Representation>"
            "</AdaptationSet></Period></MPD>")
        doc = parse_mpd(text)
        (aset,) = doc.adaptation_sets
        assert aset.content_kind is ContentKind.AUDIO
        assert aset.representation_ids == ("a1",)
        assert aset.set_id == "as-0"

    def test_content_kind_inference(self):
        text = (
            "<MPD><Period>"
            '<AdaptationSet id="m" contentType="application"/>'
            '<AdaptationSet id="t" contentType="text"/>'
            '<AdaptationSet id="v"/>'
            "</Period></MPD>")
        kinds = [a.content_kind for a in parse_mpd(text).adaptation_sets]
        assert kinds == [ContentKind.METADATA, ContentKind.METADATA,
                         ContentKind.BACKGROUND]


class TestRoundTrip:
    def test_parse_generate_identity_on_200_presentations(self):
        for seed in range(200):
            p = random_presentation(random.Random(seed))
            doc = mpd_document(p)
            assert parse_mpd(generate_mpd(p)) == doc, f"seed {seed}"

    def test_every_ovly_id_resolves(self):
        seen_any = False
        for seed in range(200):
            p = random_presentation(random.Random(seed))
            known = {o.overlay_id for o in p.overlays}
            track_sourced = sorted(
                o.overlay_id for o in p.overlays
                if o.source.kind in (OverlaySourceKind.VIDEO_TRACK,
                                     OverlaySourceKind.REGION_OF_TRACK))
            listed = []
            for d in mpd_document(p).ovly_descriptors():
                seen_any = True
                assert set(d.overlay_ids) <= known
                assert len(d.priorities) == len(d.overlay_ids)
                listed.extend(d.overlay_ids)
            assert sorted(listed) == track_sourced
        assert seen_any

    def test_priorities_match_overlay_properties(self):
        p = Presentation(
            tracks=(video_track(1), video_track(2), video_track(3)),
            overlays=(viewport_overlay(5, 2, priority=4),
                      viewport_overlay(3, 2, priority=1),
                      viewport_overlay(9, 3, priority=0)))
        descs = mpd_document(p).ovly_descriptors()
        assert [d.overlay_ids for d in descs] == [(3, 5), (9,)]
        assert [d.priorities for d in descs] == [(1, 4), (0,)]
