"""End-to-end acceptance checks, one test per release criterion.

Each test prints a single ``ACCEPTANCE <n> PASS/FAIL`` line (bypassing
output capture so the verdicts always appear in the run log) and pins
both the tolerances and a wall-clock budget for its workload.
"""

import dataclasses
import itertools
import math
import random
import time
from contextlib import contextmanager

import numpy as np

from omaf_toolkit import codec, dash
from omaf_toolkit.errors import ParseError
from omaf_toolkit.geometry import (
    FULL_SPHERE_STERADIANS,
    PictureDims,
    Rect2D,
    SphereRegion,
    ViewingOrientation,
    erp_pixel_to_sphere,
    erp_sphere_to_pixel,
    region_contains_arrays,
    region_overlap_fraction,
    region_solid_angle,
    wrap_degrees,
)
from omaf_toolkit.model import GpsPosition, Level, Projection, Viewpoint
from omaf_toolkit.playback import (
    ComposeLayer,
    EssentialOverflowError,
    NoGpsCandidateError,
    OverlayState,
    compose,
    cull_by_priority,
    enter_viewpoint,
    haversine_distance_m,
    overlay_displayed,
    select_viewpoint_by_gps,
    tick,
)
from omaf_toolkit.strategy import (
    cell_overlaps,
    select_tiles,
    simulate_session,
    weighted_mean_rank,
)

from gen import random_presentation, random_tile_problem, random_trace
from test_conformance import ALL_RULES, match_any, track_for_rule
from test_playback import brute_force_cull, overlay, random_raster, \
    switch_presentation
from test_strategy import (
    PINNED_GREEDY_MEAN_RANK,
    PINNED_OPTIMAL_MEAN_RANK,
    PINNED_RATIO,
    cost_bounds,
    exhaustive_optimum,
    make_grid,
    make_variants,
)


@contextmanager
def criterion(number, description, cap_seconds, capsys):
    start = time.perf_counter()
    passed = False
    try:
        yield
        passed = True
    finally:
        elapsed = time.perf_counter() - start
        verdict = "PASS" if passed and elapsed < cap_seconds else "FAIL"
        with capsys.disabled():
            print(f"ACCEPTANCE {number} {verdict}: {description} "
                  f"({elapsed:.2f}s, cap {cap_seconds:.0f}s)")
    assert elapsed < cap_seconds, \
        f"criterion {number} took {elapsed:.2f}s, cap {cap_seconds}s"


def _failure_reason(result, rule):
    return next(f.reason for f in result.unmatched
                if f.profile == rule.profile_name)


def test_criterion_1_conformance_tables(capsys):
    with criterion(1, "profile tables match and mutations fail",
                   1.0, capsys):
        for rule in ALL_RULES:
            track = track_for_rule(rule)
            assert rule.profile_name in match_any(rule, track).matched

            if rule.max_level is not None:
                bumped = dataclasses.replace(
                    track, level=Level(rule.max_level.major + 1, 0))
                result = match_any(rule, bumped)
                assert rule.profile_name not in result.matched
                assert _failure_reason(result, rule) == "level"

            if rule.allowed_projections is not None:
                outside = next(
                    p for p in (Projection.FISHEYE, Projection.MESH,
                                Projection.ERP)
                    if p not in rule.allowed_projections)
                swapped = dataclasses.replace(track, projection=outside)
                result = match_any(rule, swapped)
                assert rule.profile_name not in result.matched
                assert _failure_reason(result, rule) == "projection"

            if rule.stereo_allowed is False:
                flipped = dataclasses.replace(track, stereo=True)
                result = match_any(rule, flipped)
                assert rule.profile_name not in result.matched
                assert _failure_reason(result, rule) == "stereo"


def test_criterion_2_codec_round_trip_and_fuzz(capsys):
    with criterion(2, "1000 round trips + 10000-buffer decode fuzz",
                   30.0, capsys):
        rng = random.Random(20260824)
        encoded = b""
        for _ in range(1000):
            p = random_presentation(rng)
            encoded = codec.encode_presentation(p)
            assert codec.decode_presentation(encoded) \
                == codec.quantize_presentation(p)

        structured_errors = 0
        for _ in range(10_000):
            if rng.random() < 0.5:
                buf = rng.randbytes(rng.randrange(0, 65))
            else:
                cut = rng.randrange(0, min(len(encoded), 200) + 1)
                buf = bytearray(encoded[:cut])
                for _ in range(rng.randrange(0, 4)):
                    if buf:
                        buf[rng.randrange(len(buf))] = rng.randrange(256)
                buf = bytes(buf)
            try:
                codec.decode_box_tree(buf, codec.CONTAINER_FOURCCS)
            except ParseError:
                structured_errors += 1
        # a fuzz run that never errors is not exercising anything
        assert structured_errors > 1000


def _sizable_region(rng):
    center = ViewingOrientation(rng.uniform(-180.0, 180.0),
                                rng.uniform(-50.0, 50.0))
    return SphereRegion(center, rng.uniform(60.0, 160.0),
                        rng.uniform(40.0, 100.0))


def test_criterion_3_geometry(capsys):
    with criterion(3, "ERP round trip, solid angle, Monte-Carlo overlap",
                   10.0, capsys):
        rng = random.Random(31)
        dims_pool = (PictureDims(3840, 1920), PictureDims(4096, 2048),
                     PictureDims(7680, 3840))
        for _ in range(1000):
            o = ViewingOrientation(rng.uniform(-180.0, 180.0),
                                   rng.uniform(-89.9, 89.9))
            dims = dims_pool[rng.randrange(len(dims_pool))]
            u, v = erp_sphere_to_pixel(o, dims)
            back = erp_pixel_to_sphere(u, v, dims)
            assert abs(wrap_degrees(back.azimuth - o.azimuth)) < 1e-9
            assert abs(back.elevation - o.elevation) < 1e-9

        full = SphereRegion(ViewingOrientation(0.0, 0.0), 360.0, 180.0)
        assert math.isclose(region_solid_angle(full),
                            FULL_SPHERE_STERADIANS, rel_tol=1e-12)

        # one million uniform sphere points shared by all twenty pairs
        mc = np.random.default_rng(17)
        azimuths = mc.uniform(-180.0, 180.0, 1_000_000)
        elevations = np.degrees(np.arcsin(
            mc.uniform(-1.0, 1.0, 1_000_000)))
        for _ in range(20):
            a, b = _sizable_region(rng), _sizable_region(rng)
            in_a = region_contains_arrays(a, azimuths, elevations)
            hits_a = int(np.count_nonzero(in_a))
            assert hits_a > 10_000
            in_b = region_contains_arrays(b, azimuths, elevations)
            oracle = np.count_nonzero(in_a & in_b) / hits_a
            assert abs(region_overlap_fraction(a, b) - oracle) <= 0.02


def test_criterion_4_overlay_semantics(capsys):
    with criterion(4, "overlay truth table, exhaustive cull, "
                      "compose identities", 5.0, capsys):
        ov = overlay(1)
        for active in (False, True):
            for on in (False, True):
                states = {1: OverlayState(active=active, switched_on=on)}
                assert overlay_displayed(ov, states) == (active and on)

        for count in range(7):
            for priorities in itertools.product((0, 1, 2), repeat=count):
                overlays = [overlay(i + 1, priority=pri)
                            for i, pri in enumerate(priorities)]
                for capacity in range(count + 1):
                    oracle = brute_force_cull(overlays, capacity)
                    if oracle is None:
                        try:
                            cull_by_priority(overlays, capacity)
                            assert False, "expected essential overflow"
                        except EssentialOverflowError:
                            pass
                    else:
                        kept = cull_by_priority(overlays, capacity)
                        assert {o.overlay_id for o in kept} == oracle

        rng = random.Random(44)
        background = random_raster(rng, 32, 16)
        source = random_raster(rng, 32, 16)
        patch = random_raster(rng, 8, 8)
        full = Rect2D(0, 0, 32, 16)
        invisible = compose(background, [
            ComposeLayer(patch, Rect2D(5, 3, 8, 8), opacity=0.0)])
        assert invisible.pixels == background.pixels
        replaced = compose(background, [
            ComposeLayer(source, full, opacity=1.0)])
        assert replaced.pixels == source.pixels


def test_criterion_5_playback_determinism(capsys):
    with criterion(5, "tick-split invariance and GPS nearest oracle",
                   5.0, capsys):
        p = switch_presentation()
        rng = random.Random(5)
        viewpoint_ids = [vp.viewpoint_id for vp in p.viewpoints]
        for _ in range(1000):
            state = enter_viewpoint(
                p, viewpoint_ids[rng.randrange(len(viewpoint_ids))],
                media_time_ms=rng.randrange(0, 3000))
            if rng.random() < 0.5:
                state = dataclasses.replace(
                    state, pending_window_ms=rng.randrange(1, 4000))
            total = rng.randrange(0, 5000)
            first = rng.randrange(0, total + 1)
            whole = tick(p, state, total)
            split = tick(p, tick(p, state, first), total - first)
            assert whole == split

        for _ in range(100):
            count = rng.randrange(1, 9)
            viewpoints = []
            for i in range(count):
                gps = None
                if rng.random() < 0.8:
                    gps = GpsPosition(rng.uniform(-80.0, 80.0),
                                      rng.uniform(-180.0, 180.0))
                viewpoints.append(Viewpoint(f"vp{i}", gps=gps))
            device = GpsPosition(rng.uniform(-80.0, 80.0),
                                 rng.uniform(-180.0, 180.0))
            tagged = [(haversine_distance_m(vp.gps, device),
                       vp.viewpoint_id)
                      for vp in viewpoints if vp.gps is not None]
            if not tagged:
                try:
                    select_viewpoint_by_gps(viewpoints, device)
                    assert False, "expected no candidate"
                except NoGpsCandidateError:
                    pass
            else:
                assert select_viewpoint_by_gps(viewpoints, device) \
                    == min(tagged)[1]


def test_criterion_6_dash_round_trip(capsys):
    with criterion(6, "MPD descriptor round trip + priority mismatch",
                   5.0, capsys):
        rng = random.Random(6)
        for _ in range(200):
            p = random_presentation(rng)
            doc = dash.parse_mpd(dash.generate_mpd(p))
            assert doc == dash.mpd_document(p)

        mismatched = ('<?xml version="1.0" encoding="utf-8"?>'
                      '<MPD xmlns="urn:mpeg:dash:schema:mpd:2011">'
                      '<Period><AdaptationSet>'
                      '<SupplementalProperty '
                      'schemeIdUri="urn:example:omaf:ovly" '
                      'value="1,2;0"/>'
                      '</AdaptationSet></Period></MPD>')
        try:
            dash.parse_mpd(mismatched)
            assert False, "expected rejection"
        except ParseError as exc:
            assert exc.code == "PRIORITY_LEN_MISMATCH"


def test_criterion_7_simulator(capsys):
    with criterion(7, "pinned greedy ratio, invariants, trace session",
                   30.0, capsys):
        group = make_grid(4, 2)
        variants = make_variants(group, random.Random(2026))
        cheapest, best = cost_bounds(variants)
        budget = cheapest + (best - cheapest) // 4
        orientation = ViewingOrientation(30.0, 10.0)
        overlaps = cell_overlaps(orientation, group)
        greedy = weighted_mean_rank(
            select_tiles(orientation, group, variants, budget), overlaps)
        optimal = exhaustive_optimum(variants, overlaps, budget)
        assert math.isclose(greedy, PINNED_GREEDY_MEAN_RANK,
                            rel_tol=1e-12)
        assert math.isclose(optimal, PINNED_OPTIMAL_MEAN_RANK,
                            rel_tol=1e-12)
        assert greedy / optimal <= PINNED_RATIO * (1.0 + 1e-12)

        rng = random.Random(7)
        for _ in range(500):
            case_group, case_variants, _ = random_tile_problem(rng)
            low, high = cost_bounds(case_variants)
            case_budget = rng.randrange(low, high + 100_000)
            o = ViewingOrientation(rng.uniform(-180.0, 179.0),
                                   rng.uniform(-89.0, 89.0))
            selection = select_tiles(o, case_group, case_variants,
                                     case_budget)
            assert set(selection) \
                == {m.grid_position for m in case_group.members}
            assert sum(v.bitrate_bps for v in selection.values()) \
                <= case_budget

        trace = random_trace(rng, 1000, 600_000)
        session_start = time.perf_counter()
        metrics = simulate_session(trace, group, variants, budget, 1000)
        session_elapsed = time.perf_counter() - session_start
        assert len(metrics) \
            == max(1, math.ceil((trace[-1][0] - trace[0][0]) / 1000))
        assert session_elapsed < 5.0, \
            f"1000-sample session took {session_elapsed:.2f}s"
