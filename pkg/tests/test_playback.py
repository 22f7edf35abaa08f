import itertools
import json
import math
import random

import pytest

from omaf_toolkit.errors import DataError, UsageError
from omaf_toolkit.geometry import Rect2D, SphereRegion, ViewingOrientation
from omaf_toolkit.model import (
    GpsPosition,
    LoopInfo,
    MetadataKind,
    MetadataSample,
    NormalizedRect,
    Overlay,
    OverlayControlEntry,
    OverlayControlsPayload,
    OverlayProperties,
    OverlayRendering,
    OverlayRenderingKind,
    OverlaySource,
    OverlaySourceKind,
    PlanePosition,
    Presentation,
    SwitchRule,
    TimedMetadataTrack,
    TimelineMode,
    Viewpoint,
)
from omaf_toolkit.playback import (
    BEFORE_FIRST_SAMPLE,
    ComposeLayer,
    EssentialOverflowError,
    NoGpsCandidateError,
    OverlayLookupError,
    OverlayState,
    PlacementError,
    PlaybackState,
    Raster,
    RasterFormatError,
    arm_selection_window,
    compose,
    cull_by_priority,
    enter_viewpoint,
    haversine_distance_m,
    overlay_displayed,
    overlay_states_at,
    read_ppm,
    resolve_draw_order,
    run_script,
    sample_timed_metadata,
    select_viewpoint_by_gps,
    switch_viewpoint,
    tick,
    tick_events,
    write_alpha_pgm,
    write_ppm,
)


def overlay(overlay_id, kind=OverlayRenderingKind.VIEWPORT_RELATIVE,
            layering=0, priority=0, distance=0.5):
    if kind is OverlayRenderingKind.VIEWPORT_RELATIVE:
        rendering = OverlayRendering(
            kind, viewport_rect=NormalizedRect(0.1, 0.1, 0.2, 0.2))
    elif kind is OverlayRenderingKind.SPHERE_RELATIVE_2D:
        rendering = OverlayRendering(kind, plane_position=PlanePosition(
            ViewingOrientation(0.0, 0.0), distance, 0.5, 0.5))
    elif kind is OverlayRenderingKind.SPHERE_RELATIVE_OMNI:
        rendering = OverlayRendering(kind, sphere_position=SphereRegion(
            ViewingOrientation(0.0, 0.0), 60.0, 40.0))
    else:
        rendering = OverlayRendering(kind)
    return Overlay(overlay_id, OverlaySource(OverlaySourceKind.EXTERNAL),
                   rendering,
                   OverlayProperties(layering_order=layering,
                                     priority=priority))


def all_on(overlays):
    return {o.overlay_id: OverlayState() for o in overlays}


class TestOverlayDisplay:
    @pytest.mark.parametrize("active,on,shown", [
        (True, True, True),
        (False, True, False),
        (True, False, False),
        (False, False, False),
    ])
    def test_truth_table(self, active, on, shown):
        o = overlay(1)
        states = {1: OverlayState(active=active, switched_on=on)}
        assert overlay_displayed(o, states) is shown

    def test_unknown_overlay_id(self):
        with pytest.raises(OverlayLookupError):
            overlay_displayed(overlay(7), {1: OverlayState()})

    def test_accepts_bare_id(self):
        assert overlay_displayed(3, {3: OverlayState(active=False)}) is False


class TestDrawOrder:
    def test_sphere_before_viewport(self):
        sphere = overlay(2, OverlayRenderingKind.SPHERE_RELATIVE_OMNI)
        viewport = overlay(1)
        order = resolve_draw_order([viewport, sphere], all_on([viewport,
                                                               sphere]))
        assert [o.overlay_id for o in order] == [2, 1]

    def test_farther_plane_drawn_first(self):
        near = overlay(1, OverlayRenderingKind.SPHERE_RELATIVE_2D,
                       distance=0.5)
        far = overlay(2, OverlayRenderingKind.SPHERE_RELATIVE_2D,
                      distance=0.9)
        order = resolve_draw_order([near, far], all_on([near, far]))
        assert [o.overlay_id for o in order] == [2, 1]

    def test_viewport_layering_ascending(self):
        a = overlay(1, layering=2)
        b = overlay(2, layering=1)
        order = resolve_draw_order([a, b], all_on([a, b]))
        assert [o.overlay_id for o in order] == [2, 1]

    def test_equal_distance_uses_layering_then_id(self):
        pool = [
            overlay(3, OverlayRenderingKind.SPHERE_RELATIVE_2D,
                    distance=0.7, layering=1),
            overlay(1, OverlayRenderingKind.SPHERE_RELATIVE_2D,
                    distance=0.7, layering=2),
            overlay(2, OverlayRenderingKind.SPHERE_RELATIVE_2D,
                    distance=0.7, layering=1),
        ]
        order = resolve_draw_order(pool, all_on(pool))
        assert [o.overlay_id for o in order] == [2, 3, 1]

    def test_hidden_overlays_excluded(self):
        a, b = overlay(1), overlay(2)
        states = {1: OverlayState(active=False), 2: OverlayState()}
        order = resolve_draw_order([a, b], states)
        assert [o.overlay_id for o in order] == [2]

    def test_permutation_invariance(self):
        pool = [
            overlay(1, OverlayRenderingKind.SPHERE_RELATIVE_OMNI),
            overlay(2, OverlayRenderingKind.SPHERE_RELATIVE_2D,
                    distance=0.4),
            overlay(3, OverlayRenderingKind.SPHERE_RELATIVE_2D,
                    distance=1.3, layering=5),
            overlay(4, layering=1),
            overlay(5, layering=1),
            overlay(6, OverlayRenderingKind.MESH_3D),
        ]
        states = all_on(pool)
        reference = resolve_draw_order(pool, states)
        for perm in itertools.permutations(pool):
            assert resolve_draw_order(list(perm), states) == reference

    def test_mesh_sits_on_unit_sphere(self):
        mesh = overlay(1, OverlayRenderingKind.MESH_3D)
        inside = overlay(2, OverlayRenderingKind.SPHERE_RELATIVE_2D,
                         distance=0.2)
        order = resolve_draw_order([inside, mesh], all_on([inside, mesh]))
        assert [o.overlay_id for o in order] == [1, 2]


def brute_force_cull(overlays, capacity):
    """Largest essential-preserving subset within capacity, preferring
    the lexicographically smallest (priority, id) profile."""
    essentials = {o.overlay_id for o in overlays
                  if o.properties.priority == 0}
    best = None
    for size in range(len(overlays), -1, -1):
        if size > capacity:
            continue
        for combo in itertools.combinations(overlays, size):
            ids = {o.overlay_id for o in combo}
            if not essentials <= ids:
                continue
            profile = tuple(sorted(
                (o.properties.priority, o.overlay_id) for o in combo))
            if best is None or (-size, profile) < best[0]:
                best = ((-size, profile), ids)
        if best is not None:
            return best[1]
    return None


class TestCull:
    def test_spec_capacity_example(self):
        pool = [overlay(1, priority=0), overlay(2, priority=0),
                overlay(3, priority=3), overlay(4, priority=5)]
        kept = cull_by_priority(pool, 3)
        assert sorted(o.overlay_id for o in kept) == [1, 2, 3]

    def test_capacity_covers_everything(self):
        pool = [overlay(i, priority=i) for i in range(1, 5)]
        assert len(cull_by_priority(pool, 10)) == 4

    def test_essential_overflow(self):
        pool = [overlay(i, priority=0) for i in range(1, 4)]
        with pytest.raises(EssentialOverflowError) as err:
            cull_by_priority(pool, 2)
        assert err.value.code == "ESSENTIAL_OVERFLOW"
        assert "short by 1" in str(err.value)

    def test_negative_capacity(self):
        with pytest.raises(UsageError):
            cull_by_priority([], -1)

    def test_input_order_irrelevant(self):
        rng = random.Random(5)
        pool = [overlay(i, priority=rng.randrange(4)) for i in range(1, 8)]
        reference = cull_by_priority(pool, 4)
        for _ in range(20):
            rng.shuffle(pool)
            assert cull_by_priority(pool, 4) == reference

    def test_matches_brute_force_up_to_six(self):
        rng = random.Random(11)
        for _ in range(200):
            count = rng.randrange(0, 7)
            pool = [overlay(i + 1, priority=rng.randrange(0, 4))
                    for i in range(count)]
            capacity = rng.randrange(0, 8)
            expected = brute_force_cull(pool, capacity)
            if expected is None:
                with pytest.raises(EssentialOverflowError):
                    cull_by_priority(pool, capacity)
            else:
                kept = {o.overlay_id
                        for o in cull_by_priority(pool, capacity)}
                assert kept == expected


def blend_oracle(background, layers):
    """Scalar reimplementation of the documented blend formula."""
    px = bytearray(background.pixels)
    for layer in layers:
        x, y = int(layer.placement.x), int(layer.placement.y)
        w, h = int(layer.placement.width), int(layer.placement.height)
        for row in range(h):
            for col in range(w):
                src_at = 4 * (row * w + col)
                dst_at = 4 * ((y + row) * background.width + (x + col))
                alpha = layer.opacity
                if layer.use_alpha:
                    alpha *= layer.raster.pixels[src_at + 3] / 255.0
                for c in range(4):
                    value = (alpha * layer.raster.pixels[src_at + c]
                             + (1.0 - alpha) * px[dst_at + c])
                    px[dst_at + c] = math.floor(value + 0.5)
    return bytes(px)


def random_raster(rng, width, height):
    return Raster(width, height,
                  bytes(rng.randrange(256) for _ in range(4 * width * height)))


class TestCompose:
    def test_opacity_zero_is_identity(self):
        rng = random.Random(1)
        bg = random_raster(rng, 8, 6)
        layer = ComposeLayer(random_raster(rng, 4, 4), Rect2D(2, 1, 4, 4),
                             opacity=0.0)
        assert compose(bg, [layer]).pixels == bg.pixels

    def test_empty_layer_list_is_identity(self):
        bg = random_raster(random.Random(2), 5, 5)
        assert compose(bg, []).pixels == bg.pixels

    def test_opaque_full_frame_replaces_background(self):
        rng = random.Random(3)
        bg = random_raster(rng, 6, 4)
        src = random_raster(rng, 6, 4)
        layer = ComposeLayer(src, Rect2D(0, 0, 6, 4), opacity=1.0)
        assert compose(bg, [layer]).pixels == src.pixels

    def test_half_white_over_black_rounds_up(self):
        bg = Raster.filled(2, 2, (0, 0, 0, 255))
        white = Raster.filled(2, 2, (255, 255, 255, 255))
        out = compose(bg, [ComposeLayer(white, Rect2D(0, 0, 2, 2),
                                        opacity=0.5)])
        # 0.5 * 255 = 127.5, which rounds away from zero to 128.
        assert out.pixels[0:3] == bytes((128, 128, 128))

    def test_per_pixel_alpha_scales_opacity(self):
        bg = Raster.filled(1, 1, (0, 0, 0, 255))
        src = Raster(1, 1, bytes((200, 100, 40, 128)))
        out = compose(bg, [ComposeLayer(src, Rect2D(0, 0, 1, 1),
                                        opacity=1.0, use_alpha=True)])
        alpha = 128 / 255
        expected = tuple(math.floor(alpha * c + 0.5)
                         for c in (200, 100, 40))
        assert tuple(out.pixels[0:3]) == expected

    def test_layers_apply_in_list_order(self):
        bg = Raster.filled(2, 2, (0, 0, 0, 255))
        red = Raster.filled(2, 2, (255, 0, 0, 255))
        blue = Raster.filled(2, 2, (0, 0, 255, 255))
        rect = Rect2D(0, 0, 2, 2)
        out = compose(bg, [ComposeLayer(red, rect), ComposeLayer(blue, rect)])
        assert out.pixels[0:4] == bytes((0, 0, 255, 255))

    def test_matches_scalar_oracle(self):
        rng = random.Random(17)
        for _ in range(25):
            bg = random_raster(rng, 16, 12)
            layers = []
            for _ in range(rng.randrange(1, 4)):
                w, h = rng.randrange(1, 8), rng.randrange(1, 8)
                x = rng.randrange(0, 16 - w + 1)
                y = rng.randrange(0, 12 - h + 1)
                layers.append(ComposeLayer(
                    random_raster(rng, w, h), Rect2D(x, y, w, h),
                    opacity=rng.random(), use_alpha=rng.random() < 0.5))
            assert compose(bg, layers).pixels == blend_oracle(bg, layers)

    def test_out_of_bounds_placement(self):
        bg = Raster.filled(8, 8)
        layer = ComposeLayer(Raster.filled(4, 4), Rect2D(6, 0, 4, 4))
        with pytest.raises(PlacementError):
            compose(bg, [layer])

    def test_placement_size_must_match_raster(self):
        bg = Raster.filled(8, 8)
        layer = ComposeLayer(Raster.filled(4, 4), Rect2D(0, 0, 3, 4))
        with pytest.raises(PlacementError):
            compose(bg, [layer])

    def test_opacity_out_of_range(self):
        bg = Raster.filled(2, 2)
        layer = ComposeLayer(Raster.filled(2, 2), Rect2D(0, 0, 2, 2),
                             opacity=1.5)
        with pytest.raises(DataError) as err:
            compose(bg, [layer])
        assert err.value.code == "OPACITY_OUT_OF_RANGE"

    def test_painter_order_for_two_quads(self):
        # The draw order must paint the farther plane first so the nearer
        # one ends up visible, exactly as a painter's algorithm would.
        near = overlay(1, OverlayRenderingKind.SPHERE_RELATIVE_2D,
                       distance=0.5)
        far = overlay(2, OverlayRenderingKind.SPHERE_RELATIVE_2D,
                      distance=0.9)
        colors = {1: (255, 0, 0, 255), 2: (0, 0, 255, 255)}
        bg = Raster.filled(4, 4, (0, 0, 0, 255))
        layers = [
            ComposeLayer(Raster.filled(4, 4, colors[o.overlay_id]),
                         Rect2D(0, 0, 4, 4))
            for o in resolve_draw_order([near, far], all_on([near, far]))]
        out = compose(bg, layers)
        assert out.pixels[0:4] == bytes((255, 0, 0, 255))


class TestRasterIo:
    def test_ppm_round_trip_with_alpha(self):
        raster = random_raster(random.Random(23), 9, 5)
        back = read_ppm(write_ppm(raster), write_alpha_pgm(raster))
        assert back == raster

    def test_ppm_without_sidecar_is_opaque(self):
        raster = random_raster(random.Random(29), 3, 3)
        back = read_ppm(write_ppm(raster))
        assert back.pixels[3::4] == b"\xff" * 9

    def test_header_comments_are_skipped(self):
        data = b"P6\n# made by hand\n2 1\n255\n" + bytes(6)
        raster = read_ppm(data)
        assert (raster.width, raster.height) == (2, 1)

    @pytest.mark.parametrize("data", [
        b"P5\n2 2\n255\n" + bytes(12),
        b"P6\n2 2\n65535\n" + bytes(12),
        b"P6\n2 2\n255\n" + bytes(5),
        b"P6\n2 2\n255\n" + bytes(13),
        b"P6\n0 2\n255\n",
        b"P6\n2 2\n",
    ])
    def test_malformed_ppm_rejected(self, data):
        with pytest.raises(RasterFormatError):
            read_ppm(data)

    def test_alpha_dims_must_match(self):
        raster = Raster.filled(2, 2)
        alpha = b"P5\n3 2\n255\n" + bytes(6)
        with pytest.raises(RasterFormatError):
            read_ppm(write_ppm(raster), alpha)

    def test_raster_buffer_length_checked(self):
        with pytest.raises(ValueError):
            Raster(2, 2, bytes(15))


def switch_presentation():
    vp1 = Viewpoint("vp1", switch_rules=(
        SwitchRule("vp2", TimelineMode.CONTINUE_TIME, is_default=True,
                   selection_window_ms=3000),
        SwitchRule("vp3", TimelineMode.RESET_TO_ZERO),
        SwitchRule("vp4", TimelineMode.OFFSET, offset_ms=1500),
    ), loop=LoopInfo(1000, 2000))
    vp2 = Viewpoint("vp2", switch_rules=(SwitchRule("vp1"),))
    vp3 = Viewpoint("vp3", loop=LoopInfo(0, 500, max_loops=2))
    vp4 = Viewpoint("vp4")
    return Presentation(viewpoints=(vp1, vp2, vp3, vp4))


class TestSwitchViewpoint:
    def setup_method(self):
        self.p = switch_presentation()
        self.vp1 = self.p.viewpoint("vp1")

    def test_continue_time(self):
        state = PlaybackState("vp1", 5000)
        out = switch_viewpoint(self.p, state, self.vp1.switch_rules[0])
        assert out.current_viewpoint_id == "vp2"
        assert out.media_time_ms == 5000

    def test_reset_to_zero(self):
        state = PlaybackState("vp1", 5000)
        out = switch_viewpoint(self.p, state, self.vp1.switch_rules[1])
        assert out.media_time_ms == 0

    def test_offset(self):
        state = PlaybackState("vp1", 5000)
        out = switch_viewpoint(self.p, state, self.vp1.switch_rules[2])
        assert out.media_time_ms == 1500

    def test_loop_count_resets_and_window_clears(self):
        state = PlaybackState("vp1", 5000, loop_count=3,
                              pending_window_ms=700)
        out = switch_viewpoint(self.p, state, self.vp1.switch_rules[0])
        assert out.loop_count == 0
        assert out.pending_window_ms is None

    def test_foreign_rule_rejected(self):
        state = PlaybackState("vp2", 0)
        with pytest.raises(UsageError):
            switch_viewpoint(self.p, state, self.vp1.switch_rules[0])

    def test_missing_target_rejected(self):
        p = Presentation(viewpoints=(
            Viewpoint("vp1", switch_rules=(SwitchRule("gone"),)),))
        with pytest.raises(UsageError):
            switch_viewpoint(p, PlaybackState("vp1", 0),
                             p.viewpoint("vp1").switch_rules[0])


class TestTick:
    def setup_method(self):
        self.p = switch_presentation()

    def test_loop_wrap_example(self):
        state = PlaybackState("vp1", 1900)
        out = tick(self.p, state, 200)
        assert out.media_time_ms == 1100
        assert out.loop_count == 1

    def test_multiple_wraps_in_one_tick(self):
        state = PlaybackState("vp1", 1900)
        out = tick(self.p, state, 3600)
        # 100 ms to the loop end, then three full spans plus 500 ms.
        assert out.loop_count == 4
        assert out.media_time_ms == 1500

    def test_bounded_loop_exhausts(self):
        state = PlaybackState("vp3", 0)
        out = tick(self.p, state, 1800)
        assert out.loop_count == 2
        assert out.media_time_ms == 800

    def test_dt_zero_is_identity(self):
        state = PlaybackState("vp1", 1234, pending_window_ms=0)
        assert tick(self.p, state, 0) == state

    def test_negative_dt_rejected(self):
        with pytest.raises(UsageError):
            tick(self.p, PlaybackState("vp1", 0), -1)

    def test_window_expiry_fires_default_rule(self):
        state = enter_viewpoint(self.p, "vp1", 1500)
        assert state.pending_window_ms == 3000
        out, events = tick_events(self.p, state, 4000)
        assert out.current_viewpoint_id == "vp2"
        assert out.pending_window_ms is None
        kinds = [e["event"] for e in events]
        assert kinds == ["loop", "switch"]
        switch = events[-1]
        assert switch["reason"] == "window_expired"
        # 3000 ms inside the loop from 1500: wraps at 2000 twice, landing
        # at 1500 again; continue_time carries that into vp2, then the
        # leftover 1000 ms plays there.
        assert out.media_time_ms == 2500

    def test_user_choice_applies_immediately(self):
        state = enter_viewpoint(self.p, "vp1", 800)
        out, events = tick_events(self.p, state, 100, user_choice="vp3")
        assert out.current_viewpoint_id == "vp3"
        assert out.media_time_ms == 100  # reset to zero, then 100 ms
        assert events[0]["reason"] == "user_choice"

    def test_unknown_user_choice_rejected(self):
        state = PlaybackState("vp1", 0)
        with pytest.raises(UsageError):
            tick(self.p, state, 100, user_choice="vp9")

    def test_window_counts_down_without_expiry(self):
        state = PlaybackState("vp1", 0, pending_window_ms=3000)
        out = tick(self.p, state, 1000)
        assert out.pending_window_ms == 2000
        assert out.current_viewpoint_id == "vp1"

    def test_expiry_without_default_rule_just_clears(self):
        state = PlaybackState("vp2", 100, pending_window_ms=50)
        out, events = tick_events(self.p, state, 200)
        assert out.current_viewpoint_id == "vp2"
        assert out.pending_window_ms is None
        assert events[0]["event"] == "window_expired"

    def test_arm_selection_window(self):
        state = PlaybackState("vp1", 0)
        assert arm_selection_window(self.p, state).pending_window_ms == 3000
        state = PlaybackState("vp2", 0)
        assert arm_selection_window(self.p, state) == state

    def test_events_are_json_serializable(self):
        state = enter_viewpoint(self.p, "vp1", 1900)
        _, events = run_script(self.p, state,
                               [(200, None), (4000, None), (100, "vp1")])
        json.dumps(events)

    def test_tick_split_invariance(self):
        rng = random.Random(43)
        ids = [vp.viewpoint_id for vp in self.p.viewpoints]
        for _ in range(500):
            state = PlaybackState(
                rng.choice(ids), rng.randrange(0, 4000),
                loop_count=rng.randrange(0, 3),
                pending_window_ms=rng.choice(
                    [None, 0, rng.randrange(1, 5000)]))
            total = rng.randrange(0, 6000)
            cut = rng.randrange(0, total + 1)
            combined = tick(self.p, state, total)
            split = tick(self.p, tick(self.p, state, cut), total - cut)
            assert combined == split


class TestGpsSelection:
    def test_exact_position_wins(self):
        vps = (Viewpoint("vp1", gps=GpsPosition(60.17, 24.94)),
               Viewpoint("vp2", gps=GpsPosition(61.5, 23.76)))
        assert select_viewpoint_by_gps(vps, GpsPosition(60.17, 24.94)) \
            == "vp1"

    def test_tie_breaks_to_smaller_id(self):
        here = GpsPosition(10.0, 10.0)
        vps = (Viewpoint("b", gps=here), Viewpoint("a", gps=here))
        assert select_viewpoint_by_gps(vps, GpsPosition(11.0, 10.0)) == "a"

    def test_gpsless_viewpoints_excluded(self):
        vps = (Viewpoint("a"),
               Viewpoint("b", gps=GpsPosition(0.0, 0.0)))
        assert select_viewpoint_by_gps(vps, GpsPosition(50.0, 50.0)) == "b"

    def test_no_candidates(self):
        with pytest.raises(NoGpsCandidateError) as err:
            select_viewpoint_by_gps((Viewpoint("a"),), GpsPosition(0, 0))
        assert err.value.code == "NO_CANDIDATE"

    def test_known_distance_helsinki_tampere(self):
        d = haversine_distance_m(GpsPosition(60.1699, 24.9384),
                                 GpsPosition(61.4981, 23.7610))
        assert 155_000 < d < 170_000

    def test_antipodal_distance_is_half_circumference(self):
        d = haversine_distance_m(GpsPosition(0.0, 0.0),
                                 GpsPosition(0.0, 180.0))
        assert abs(d - math.pi * 6_371_000.0) < 1e-6

    def test_matches_brute_force_scan(self):
        rng = random.Random(71)
        for _ in range(100):
            vps = []
            for i in range(rng.randrange(1, 51)):
                gps = None
                if rng.random() < 0.8:
                    gps = GpsPosition(rng.uniform(-90, 90),
                                      rng.uniform(-180, 180))
                vps.append(Viewpoint(f"vp{i:02d}", gps=gps))
            device = GpsPosition(rng.uniform(-90, 90),
                                 rng.uniform(-180, 180))
            scored = sorted(
                (haversine_distance_m(vp.gps, device), vp.viewpoint_id)
                for vp in vps if vp.gps is not None)
            if not scored:
                with pytest.raises(NoGpsCandidateError):
                    select_viewpoint_by_gps(vps, device)
            else:
                assert select_viewpoint_by_gps(vps, device) == scored[0][1]


def controls_track(track_id, samples):
    return TimedMetadataTrack(track_id, MetadataKind.OVERLAY_CONTROLS,
                              tuple(MetadataSample(t, payload)
                                    for t, payload in samples))


class TestTimedMetadata:
    def setup_method(self):
        self.track = TimedMetadataTrack(
            9, MetadataKind.INITIAL_VIEWING_ORIENTATION,
            (MetadataSample(0, ViewingOrientation(10.0, 0.0)),
             MetadataSample(1000, ViewingOrientation(20.0, 0.0)),
             MetadataSample(2500, ViewingOrientation(30.0, 0.0))))

    def test_step_semantics(self):
        assert sample_timed_metadata(self.track, 500).azimuth == 10.0

    def test_inclusive_at_sample_time(self):
        assert sample_timed_metadata(self.track, 1000).azimuth == 20.0

    def test_before_first_sample(self):
        assert sample_timed_metadata(self.track, -1) is BEFORE_FIRST_SAMPLE

    def test_after_last_sample(self):
        assert sample_timed_metadata(self.track, 10_000).azimuth == 30.0

    def test_empty_track_rejected(self):
        empty = TimedMetadataTrack(1, MetadataKind.RECOMMENDED_VIEWPORT)
        with pytest.raises(UsageError):
            sample_timed_metadata(empty, 0)

    def test_matches_linear_scan(self):
        rng = random.Random(3)
        times = sorted(rng.sample(range(0, 10_000), 20))
        track = TimedMetadataTrack(
            1, MetadataKind.INITIAL_VIEWING_ORIENTATION,
            tuple(MetadataSample(t, ViewingOrientation(float(i), 0.0))
                  for i, t in enumerate(times)))
        for _ in range(200):
            t = rng.randrange(-100, 10_100)
            latest = None
            for sample in track.samples:
                if sample.time_ms <= t:
                    latest = sample
            got = sample_timed_metadata(track, t)
            if latest is None:
                assert got is BEFORE_FIRST_SAMPLE
            else:
                assert got == latest.payload


class TestOverlayStatesAt:
    def setup_method(self):
        self.p = Presentation(
            overlays=(overlay(1), overlay(2)),
            timed_metadata=(controls_track(5, [
                (1000, OverlayControlsPayload(
                    (OverlayControlEntry(1, False),))),
                (2000, OverlayControlsPayload(
                    (OverlayControlEntry(1, True),
                     OverlayControlEntry(2, False)))),
            ]),))

    def test_defaults_before_first_sample(self):
        states = overlay_states_at(self.p, 0)
        assert states == {1: OverlayState(), 2: OverlayState()}

    def test_controls_apply_from_sample_time(self):
        states = overlay_states_at(self.p, 1500)
        assert states[1].active is False
        assert states[2].active is True
        states = overlay_states_at(self.p, 2000)
        assert states[1].active is True
        assert states[2].active is False

    def test_user_toggles_merge(self):
        states = overlay_states_at(self.p, 0, switched_on={2: False})
        assert overlay_displayed(1, states) is True
        assert overlay_displayed(2, states) is False
