"""Viewport-dependent streaming simulator.

Given a tile grid over an ERP picture, per-tile quality variants, a
bandwidth budget, and a viewing orientation, pick one variant per grid
cell: every cell always receives at least its cheapest variant (the
mixed-quality tiling model requires full coverage), then cells are
upgraded toward their best quality rank in descending order of how much
of the viewport they cover.  The upgrade schedule is fixed, and the walk
stops at the first step the budget cannot afford, which makes selections
monotone in the budget.  Greedy selection is deliberate and not claimed
optimal; the regression tests pin its quality ratio against exhaustive
search on small instances.

Also here: heatmap-biased ranking from ERP-region metadata, the
tile-binding layout description, and a per-segment session simulator
with CSV/JSON interchange.  Everything is a pure function; per-segment
work is independent and could be parallelized, results merge in segment
order.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import DataError, ParseError, UsageError
from .geometry import (
    DEFAULT_OVERLAP_SAMPLES,
    Rect2D,
    SphereRegion,
    ViewingOrientation,
    normalize_orientation,
    region_contains_arrays,
    region_sample_grid,
    viewport_region,
)
from .model import ErpRegionPayload, TileGroup, ValueKind, \
    rect_partition_bounds

DEFAULT_FOV = (90.0, 90.0)

Cell = tuple[int, int]


class BudgetInfeasibleError(DataError):
    """Even the cheapest full-coverage selection exceeds the budget."""

    code = "BUDGET_INFEASIBLE"

    def __init__(self, required_bps: int, budget_bps: int):
        super().__init__(
            f"cheapest full selection needs {required_bps} bps, "
            f"budget is {budget_bps}")
        self.required_bps = required_bps
        self.budget_bps = budget_bps


class GridMismatchError(DataError):
    """A heatmap grid does not tile the tile-group grid."""

    code = "GRID_MISMATCH"


class TileLayoutError(DataError):
    """Tile source rectangles overlap or leave gaps."""

    code = "TILE_LAYOUT"


@dataclass(frozen=True)
class QualityVariant:
    """One encoding of one grid cell; lower quality_rank is better."""

    track_id: int
    grid_position: Cell
    quality_rank: int
    bitrate_bps: int

    def __post_init__(self):
        object.__setattr__(self, "grid_position",
                           tuple(self.grid_position))
        if self.quality_rank < 1:
            raise ValueError(
                f"quality_rank must be >= 1, got {self.quality_rank}")
        if self.bitrate_bps <= 0:
            raise ValueError(
                f"bitrate_bps must be positive, got {self.bitrate_bps}")


@dataclass(frozen=True)
class TileBinding:
    """One cell of the merged-picture layout.

    Coordinates are in full-picture space: the selected source track
    supplies the samples for ``dest_rect``.  Placement is identity by
    construction (``source_rect == dest_rect``), only the source track
    varies with the selection.
    """

    grid_position: Cell
    source_track_id: int
    source_rect: Rect2D
    dest_rect: Rect2D


@dataclass(frozen=True)
class SegmentMetrics:
    """What one segment of a simulated session received."""

    index: int
    start_ms: int
    selections: tuple[QualityVariant, ...]
    total_bitrate_bps: int
    bytes: int
    mean_rank: float
    best_rank_coverage: float

    def as_dict(self) -> dict:
        return {
            "segment": self.index,
            "start_ms": self.start_ms,
            "bitrate_bps": self.total_bitrate_bps,
            "bytes": self.bytes,
            "mean_rank": self.mean_rank,
            "best_rank_coverage": self.best_rank_coverage,
            "selection": [
                {"cell": list(v.grid_position), "track_id": v.track_id,
                 "quality_rank": v.quality_rank,
                 "bitrate_bps": v.bitrate_bps}
                for v in self.selections],
        }


# ---------------------------------------------------------------------------
# cell geometry and viewport overlap


def cell_regions(tile_group: TileGroup) -> dict[Cell, SphereRegion]:
    """Sphere region of each grid cell under the ERP mapping.

    The members' source rectangles must tile their bounding box exactly;
    that box is taken as the full ERP picture, so the cell regions
    partition the sphere.
    """
    members = tile_group.members
    bounds = rect_partition_bounds(m.source_rect for m in members)
    if bounds is None:
        raise TileLayoutError(
            f"tile group {tile_group.group_id} rectangles do not tile "
            "their bounding box")
    regions = {}
    for m in members:
        r = m.source_rect
        # Inverse ERP of the rect corners: x spans azimuth linearly
        # right-to-left, y spans elevation top-to-bottom.
        az_hi = (0.5 - (r.x - bounds.x) / bounds.width) * 360.0
        az_lo = (0.5 - (r.x - bounds.x + r.width) / bounds.width) * 360.0
        el_hi = (0.5 - (r.y - bounds.y) / bounds.height) * 180.0
        el_lo = (0.5 - (r.y - bounds.y + r.height) / bounds.height) * 180.0
        regions[m.grid_position] = SphereRegion(
            ViewingOrientation((az_hi + az_lo) / 2.0,
                               (el_hi + el_lo) / 2.0),
            az_hi - az_lo, el_hi - el_lo)
    return regions


def cell_overlaps(orientation: ViewingOrientation, tile_group: TileGroup,
                  hfov: float = DEFAULT_FOV[0],
                  vfov: float = DEFAULT_FOV[1],
                  samples: tuple[int, int] = DEFAULT_OVERLAP_SAMPLES,
                  ) -> dict[Cell, float]:
    """Fraction of the viewport falling into each cell.

    Equal to region_overlap_fraction(viewport, cell_region) per cell,
    sharing one viewport sample grid across all cells.
    """
    o = normalize_orientation(orientation.azimuth, orientation.elevation,
                              orientation.tilt)
    viewport = viewport_region(o, hfov, vfov)
    az_off, el = region_sample_grid(viewport, samples)
    az = az_off + viewport.center.azimuth
    overlaps = {}
    for cell, region in cell_regions(tile_group).items():
        inside = region_contains_arrays(region, az, el)
        overlaps[cell] = float(np.count_nonzero(inside)) / inside.size
    return overlaps


# ---------------------------------------------------------------------------
# selection


def _variants_by_cell(tile_group: TileGroup,
                      variants: Iterable[QualityVariant],
                      ) -> dict[Cell, list[QualityVariant]]:
    cells = {m.grid_position for m in tile_group.members}
    per_cell: dict[Cell, list[QualityVariant]] = {c: [] for c in cells}
    for v in variants:
        if v.grid_position not in per_cell:
            raise UsageError(
                f"variant track {v.track_id} targets unknown cell "
                f"{v.grid_position}")
        per_cell[v.grid_position].append(v)
    for cell, options in per_cell.items():
        if not options:
            raise UsageError(f"cell {cell} has no quality variant")
        ranks = [v.quality_rank for v in options]
        if len(set(ranks)) != len(ranks):
            raise UsageError(f"cell {cell} has duplicate quality ranks")
    return per_cell


def _cheapest(options: Sequence[QualityVariant]) -> QualityVariant:
    return min(options,
               key=lambda v: (v.bitrate_bps, v.quality_rank, v.track_id))


def _greedy_selection(per_cell: Mapping[Cell, Sequence[QualityVariant]],
                      scores: Mapping[Cell, float],
                      budget_bps: int) -> dict[Cell, QualityVariant]:
    selection = {cell: _cheapest(options)
                 for cell, options in per_cell.items()}
    spent = sum(v.bitrate_bps for v in selection.values())
    if spent > budget_bps:
        raise BudgetInfeasibleError(spent, budget_bps)
    order = sorted(per_cell,
                   key=lambda cell: (-scores[cell], cell[1], cell[0]))
    for cell in order:
        ladder = sorted(per_cell[cell], key=lambda v: v.quality_rank)
        better = [v for v in ladder
                  if v.quality_rank < selection[cell].quality_rank]
        for variant in reversed(better):  # one rank at a time
            delta = variant.bitrate_bps - selection[cell].bitrate_bps
            if spent + delta > budget_bps:
                # Stopping outright (rather than trying later cells)
                # keeps the applied upgrades a prefix of a fixed
                # schedule, which is what makes selections monotone in
                # the budget.
                return selection
            selection[cell] = variant
            spent += delta
    return selection


def select_tiles(orientation: ViewingOrientation, tile_group: TileGroup,
                 variants: Iterable[QualityVariant], budget_bps: int,
                 hfov: float = DEFAULT_FOV[0],
                 vfov: float = DEFAULT_FOV[1], *,
                 heatmap: Optional[ErpRegionPayload] = None,
                 samples: tuple[int, int] = DEFAULT_OVERLAP_SAMPLES,
                 ) -> dict[Cell, QualityVariant]:
    """One variant per grid cell under the bandwidth budget.

    Cells covering more of the viewport upgrade first; ties resolve
    row-major.  A heatmap payload, when given, scales each cell's score
    as described by apply_heatmap_bias.  Raises BudgetInfeasibleError,
    with the minimal workable budget attached, when even the cheapest
    full selection does not fit.
    """
    if budget_bps <= 0:
        raise UsageError(f"budget must be positive, got {budget_bps}")
    per_cell = _variants_by_cell(tile_group, variants)
    scores = cell_overlaps(orientation, tile_group, hfov, vfov, samples)
    if heatmap is not None:
        scores = apply_heatmap_bias(scores, tile_group, heatmap)
    return _greedy_selection(per_cell, scores, budget_bps)


# ---------------------------------------------------------------------------
# heatmap bias


def _grid_shape(tile_group: TileGroup) -> tuple[int, int]:
    cells = [m.grid_position for m in tile_group.members]
    cols = max(c for c, _ in cells) + 1
    rows = max(r for _, r in cells) + 1
    if sorted(cells) != [(c, r) for c in range(cols) for r in range(rows)]:
        raise GridMismatchError(
            f"tile group {tile_group.group_id} does not form a complete "
            f"{cols}x{rows} grid")
    return cols, rows


def _heatmap_weight(value: float, kind: ValueKind) -> float:
    if kind is ValueKind.HEATMAP:
        return float(value)
    if kind is ValueKind.QUALITY_RANK:
        return 1.0 / value  # lower rank = better = heavier
    return 1.0 / (1.0 + value)  # priority 0 is the most important


def apply_heatmap_bias(overlaps: Mapping[Cell, float],
                       tile_group: TileGroup,
                       payload: ErpRegionPayload) -> dict[Cell, float]:
    """Cell scores of overlap times heatmap weight.

    The payload grid must tile the cell grid in integer blocks (a 2x1
    heatmap over a 4x2 grid gives each value a 2x2 block of cells).
    Weights are normalized to mean 1 over the cells, so a uniform
    heatmap changes nothing.  Rank-like value kinds are inverted first
    since smaller means better for them.
    """
    cols, rows = _grid_shape(tile_group)
    if (payload.grid_cols <= 0 or payload.grid_rows <= 0
            or len(payload.cell_values)
            != payload.grid_cols * payload.grid_rows):
        raise GridMismatchError(
            f"heatmap payload has {len(payload.cell_values)} values for "
            f"a {payload.grid_cols}x{payload.grid_rows} grid")
    if cols % payload.grid_cols or rows % payload.grid_rows:
        raise GridMismatchError(
            f"{payload.grid_cols}x{payload.grid_rows} heatmap does not "
            f"tile the {cols}x{rows} tile grid")
    block_cols = cols // payload.grid_cols
    block_rows = rows // payload.grid_rows
    weights = {}
    for col, row in overlaps:
        value = payload.cell_values[
            (row // block_rows) * payload.grid_cols + (col // block_cols)]
        weights[(col, row)] = _heatmap_weight(value, payload.value_kind)
    mean = sum(weights.values()) / len(weights)
    if mean <= 0.0:
        raise DataError("heatmap weights are all zero",
                        code="HEATMAP_DEGENERATE")
    return {cell: overlaps[cell] * (weight / mean)
            for cell, weight in weights.items()}


# ---------------------------------------------------------------------------
# tile binding


def bind_tiles(selection: Mapping[Cell, QualityVariant],
               tile_group: TileGroup) -> tuple[TileBinding, ...]:
    """Merged-picture layout for a complete selection.

    Destination rectangles reproduce the tile group's geometry exactly
    (they partition the full picture); each cell's samples come from the
    selected variant's track.
    """
    members = {m.grid_position: m for m in tile_group.members}
    missing = sorted(set(members) - set(selection))
    if missing:
        raise UsageError(f"selection misses cells {missing}")
    unknown = sorted(set(selection) - set(members))
    if unknown:
        raise UsageError(f"selection covers unknown cells {unknown}")
    if rect_partition_bounds(m.source_rect
                             for m in tile_group.members) is None:
        raise TileLayoutError(
            f"tile group {tile_group.group_id} rectangles do not tile "
            "their bounding box")
    ordered = sorted(members, key=lambda cell: (cell[1], cell[0]))
    return tuple(
        TileBinding(cell, selection[cell].track_id,
                    members[cell].source_rect, members[cell].source_rect)
        for cell in ordered)


# ---------------------------------------------------------------------------
# session simulation


def weighted_mean_rank(selection: Mapping[Cell, QualityVariant],
                       overlaps: Mapping[Cell, float]) -> float:
    """Viewport-weighted mean quality rank of a selection."""
    total = sum(overlaps.values())
    if total == 0.0:
        ranks = [v.quality_rank for v in selection.values()]
        return sum(ranks) / len(ranks)
    return sum(overlaps[cell] * v.quality_rank
               for cell, v in selection.items()) / total


def _best_rank_coverage(selection, overlaps, best_ranks) -> float:
    total = sum(overlaps.values())
    if total == 0.0:
        return 0.0
    covered = sum(overlaps[cell] for cell, v in selection.items()
                  if v.quality_rank == best_ranks[cell])
    return min(covered / total, 1.0)


def _budget_at(budget: Union[int, Sequence[int]], index: int) -> int:
    if isinstance(budget, (int, float)):
        return budget
    budgets = list(budget)
    if not budgets:
        raise UsageError("budget sequence is empty")
    return budgets[min(index, len(budgets) - 1)]


def _orientation_at(trace, t_ms) -> ViewingOrientation:
    times = [t for t, _ in trace]
    return trace[bisect_right(times, t_ms) - 1][1]


def simulate_session(trace: Sequence[tuple[int, ViewingOrientation]],
                     tile_group: TileGroup,
                     variants: Iterable[QualityVariant],
                     budget: Union[int, Sequence[int]],
                     segment_ms: int,
                     hfov: float = DEFAULT_FOV[0],
                     vfov: float = DEFAULT_FOV[1], *,
                     heatmap: Optional[ErpRegionPayload] = None,
                     samples: tuple[int, int] = DEFAULT_OVERLAP_SAMPLES,
                     ) -> list[SegmentMetrics]:
    """Per-segment selections and metrics over an orientation trace.

    Adaptation happens only at segment boundaries: the orientation in
    effect at each segment's start drives that segment's selection.
    ``budget`` is a single rate or one rate per segment (the last one
    repeats).
    """
    trace = list(trace)
    if not trace:
        raise UsageError("trace is empty")
    times = [t for t, _ in trace]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise UsageError("trace times must be strictly increasing")
    if segment_ms <= 0:
        raise UsageError(f"segment_ms must be positive, got {segment_ms}")
    per_cell = _variants_by_cell(tile_group, list(variants))
    best_ranks = {cell: min(v.quality_rank for v in options)
                  for cell, options in per_cell.items()}
    segment_count = max(
        1, math.ceil((times[-1] - times[0]) / segment_ms))
    metrics = []
    for index in range(segment_count):
        start = times[0] + index * segment_ms
        orientation = _orientation_at(trace, start)
        overlaps = cell_overlaps(orientation, tile_group, hfov, vfov,
                                 samples)
        scores = overlaps
        if heatmap is not None:
            scores = apply_heatmap_bias(overlaps, tile_group, heatmap)
        selection = _greedy_selection(per_cell, scores,
                                      _budget_at(budget, index))
        total = sum(v.bitrate_bps for v in selection.values())
        ordered = tuple(selection[cell] for cell in
                        sorted(selection, key=lambda c: (c[1], c[0])))
        metrics.append(SegmentMetrics(
            index=index,
            start_ms=start,
            selections=ordered,
            total_bitrate_bps=total,
            bytes=total * segment_ms // 8000,
            mean_rank=weighted_mean_rank(selection, overlaps),
            best_rank_coverage=_best_rank_coverage(selection, overlaps,
                                                   best_ranks)))
    return metrics


# ---------------------------------------------------------------------------
# interchange formats

TRACE_HEADER = "time_ms,azimuth,elevation,tilt"
METRICS_HEADER = ("segment,start_ms,bitrate_bps,bytes,"
                  "mean_rank,best_rank_coverage")


def write_trace_csv(trace: Iterable[tuple[int, ViewingOrientation]]) -> str:
    lines = [TRACE_HEADER]
    for t, o in trace:
        lines.append(f"{t},{o.azimuth!r},{o.elevation!r},{o.tilt!r}")
    return "\n".join(lines) + "\n"


def read_trace_csv(text: str) -> list[tuple[int, ViewingOrientation]]:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or lines[0].strip() != TRACE_HEADER:
        raise ParseError(f"expected header {TRACE_HEADER!r}",
                         code="TRACE_FORMAT")
    trace = []
    for number, line in enumerate(lines[1:], start=2):
        parts = [s.strip() for s in line.split(",")]
        if len(parts) != 4:
            raise ParseError(f"line {number}: expected 4 fields",
                             code="TRACE_FORMAT")
        try:
            t = int(parts[0])
            azimuth, elevation, tilt = (float(s) for s in parts[1:])
        except ValueError:
            raise ParseError(f"line {number}: malformed number",
                             code="TRACE_FORMAT") from None
        trace.append((t, ViewingOrientation(azimuth, elevation, tilt)))
    return trace


def metrics_to_csv(metrics: Iterable[SegmentMetrics]) -> str:
    lines = [METRICS_HEADER]
    for m in metrics:
        lines.append(f"{m.index},{m.start_ms},{m.total_bitrate_bps},"
                     f"{m.bytes},{m.mean_rank!r},{m.best_rank_coverage!r}")
    return "\n".join(lines) + "\n"


def metrics_to_json(metrics: Iterable[SegmentMetrics]) -> list[dict]:
    return [m.as_dict() for m in metrics]
