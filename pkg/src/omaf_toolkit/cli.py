"""Command-line front end exposing every module as a subcommand.

Exit codes are a documented contract, stable across versions:

* 0: success
* 1: validation or conformance failures found in otherwise readable input
* 2: usage error (bad flags, bad config, library misuse)
* 3: I/O or parse error (unreadable file, malformed OMB/JSON/XML/CSV/PPM)

Stdout carries the command's output only; all diagnostics go to stderr.
With ``--json`` stdout is a single JSON document.  Output is byte-identical
for identical inputs unless ``--timestamps`` is passed, which appends a
generation time to reports.

An optional config file (``--config`` flag or the OMAF_TOOLKIT_CONFIG
environment variable) holds ``key = value`` lines; ``#`` starts a comment.
Recognized keys: ``hfov``, ``vfov`` (default viewport extent in degrees),
``overlap_samples`` (sampling grid, e.g. ``64x64``), ``vwpt_urn`` and
``ovly_urn`` (DASH descriptor scheme ids).  Flags beat config, config
beats built-in defaults.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, TextIO

from . import codec, conformance, dash, model, playback, strategy
from .errors import DataError, OmafToolkitError, ParseError, UsageError
from .geometry import DEFAULT_OVERLAP_SAMPLES, Rect2D
from .model import GpsPosition, Presentation, TileGroup

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_USAGE = 2
EXIT_IO = 3

CONFIG_ENV_VAR = "OMAF_TOOLKIT_CONFIG"

DEFAULT_SETTINGS = {
    "hfov": 90.0,
    "vfov": 90.0,
    "overlap_samples": DEFAULT_OVERLAP_SAMPLES,
    "vwpt_urn": dash.DEFAULT_VWPT_URN,
    "ovly_urn": dash.DEFAULT_OVLY_URN,
}


# ---------------------------------------------------------------------------
# config file


def _parse_fov(value: str, where: str) -> float:
    try:
        fov = float(value)
    except ValueError:
        raise UsageError(f"{where}: expected a number, got {value!r}")
    if not 0.0 < fov <= 360.0:
        raise UsageError(f"{where}: field of view {fov} outside (0, 360]")
    return fov


def _parse_samples(value: str, where: str) -> tuple[int, int]:
    parts = value.lower().split("x")
    try:
        a, b = (int(part) for part in parts)
    except ValueError:
        raise UsageError(
            f"{where}: expected COLSxROWS such as 64x64, got {value!r}")
    if a <= 0 or b <= 0:
        raise UsageError(f"{where}: sample counts must be positive")
    return a, b


def load_config(path: str) -> dict:
    """Settings from a ``key = value`` file; unknown keys are errors."""
    text = Path(path).read_text("utf-8")
    settings = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        where = f"{path}:{lineno}"
        if not sep or not key:
            raise UsageError(f"{where}: expected key = value, got {raw!r}")
        if key not in DEFAULT_SETTINGS:
            known = ", ".join(sorted(DEFAULT_SETTINGS))
            raise UsageError(f"{where}: unknown setting {key!r} "
                             f"(known: {known})")
        if key in ("hfov", "vfov"):
            settings[key] = _parse_fov(value, where)
        elif key == "overlap_samples":
            settings[key] = _parse_samples(value, where)
        else:
            settings[key] = value
    return settings


def _setting(args: argparse.Namespace, config: dict, key: str):
    """Flag value if given, else config file value, else default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    return config.get(key, DEFAULT_SETTINGS[key])


# ---------------------------------------------------------------------------
# argument types (raise ArgumentTypeError so argparse exits with code 2)


def _fov_arg(value: str) -> float:
    try:
        return _parse_fov(value, "field of view")
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _samples_arg(value: str) -> tuple[int, int]:
    try:
        return _parse_samples(value, "samples")
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _budget_arg(value: str):
    """One bitrate, or a comma list applied per segment (last repeats)."""
    try:
        budgets = [int(part) for part in value.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected BPS or BPS,BPS,... got {value!r}")
    if any(b <= 0 for b in budgets):
        raise argparse.ArgumentTypeError("budgets must be positive")
    return budgets[0] if len(budgets) == 1 else budgets


# ---------------------------------------------------------------------------
# input loading


def _read_bytes(path: str) -> bytes:
    return Path(path).read_bytes()


def _read_text(path: str) -> str:
    data = _read_bytes(path)
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 text: {exc}",
                         code="TEXT_ENCODING")


def _read_json(path: str):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}", code="JSON_SYNTAX")


def _is_omb(path: str, data: bytes) -> bool:
    return Path(path).suffix == ".omb" \
        or data[4:8] == codec.HEADER_FOURCC


def load_presentation(path: str) -> Presentation:
    """A presentation from either an OMB file or a JSON manifest."""
    data = _read_bytes(path)
    if _is_omb(path, data):
        return codec.decode_presentation(data)
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}", code="JSON_SYNTAX")
    return model.presentation_from_manifest(obj)


def _read_variants(path: str) -> list[strategy.QualityVariant]:
    obj = _read_json(path)
    if not isinstance(obj, list) or not obj:
        raise ParseError(f"{path}: expected a non-empty JSON array",
                         code="VARIANTS_FORMAT")
    allowed = {"track_id", "cell", "quality_rank", "bitrate_bps"}
    variants = []
    for index, entry in enumerate(obj):
        where = f"{path}: variant {index}"
        if not isinstance(entry, dict):
            raise ParseError(f"{where}: expected an object",
                             code="VARIANTS_FORMAT")
        unknown = sorted(set(entry) - allowed)
        if unknown:
            raise ParseError(f"{where}: unknown keys {unknown}",
                             code="VARIANTS_FORMAT")
        try:
            cell = entry["cell"]
            if not isinstance(cell, (list, tuple)) or len(cell) != 2:
                raise ValueError(f"cell must be [col, row], got {cell!r}")
            variants.append(strategy.QualityVariant(
                int(entry["track_id"]), (int(cell[0]), int(cell[1])),
                int(entry["quality_rank"]), int(entry["bitrate_bps"])))
        except KeyError as exc:
            raise ParseError(f"{where}: missing key {exc}",
                             code="VARIANTS_FORMAT")
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{where}: {exc}", code="VARIANTS_FORMAT")
    return variants


def _pick_tile_group(p: Presentation, group_id: Optional[int]) -> TileGroup:
    if not p.tile_groups:
        raise DataError("presentation has no tile groups",
                        code="NO_TILE_GROUP")
    if group_id is None:
        return p.tile_groups[0]
    for group in p.tile_groups:
        if group.group_id == group_id:
            return group
    available = ", ".join(str(g.group_id) for g in p.tile_groups)
    raise DataError(f"no tile group {group_id} (available: {available})",
                    code="NO_TILE_GROUP")


# ---------------------------------------------------------------------------
# output helpers


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _emit_json(args: argparse.Namespace, out: TextIO, payload: dict) -> None:
    if args.timestamps:
        payload = {**payload, "generated_at": _now_iso()}
    json.dump(payload, out, indent=2)
    out.write("\n")


def _stamp(args: argparse.Namespace, out: TextIO) -> None:
    if args.timestamps:
        print(f"# generated at {_now_iso()}", file=out)


def _issue_line(issue: model.ValidationIssue) -> str:
    return f"{issue.severity} [{issue.code}] {issue.path}: {issue.message}"


def _print_issues(report, out: TextIO) -> None:
    for issue in report:
        print(_issue_line(issue), file=out)
    errors = model.error_count(report)
    print(f"{errors} errors, {len(report) - errors} warnings", file=out)


# ---------------------------------------------------------------------------
# inspect


def _describe_presentation(p: Presentation):
    yield (f"presentation: {len(p.tracks)} tracks, "
           f"{len(p.viewpoints)} viewpoints, {len(p.overlays)} overlays, "
           f"{len(p.timed_metadata)} metadata tracks, "
           f"{len(p.tile_groups)} tile groups")
    if p.brands:
        yield "brands: " + ", ".join(sorted(p.brands))
    for t in p.tracks:
        bits = [t.media_kind.value, t.codec.value]
        if t.level is not None:
            bits.append(f"level {t.level}")
        if t.dims is not None:
            bits.append(f"{t.dims.width}x{t.dims.height}")
        if t.projection is not None:
            bits.append(t.projection.value)
            bits.append("stereo" if t.stereo else "mono")
        if t.sample_rate_hz is not None:
            bits.append(f"{t.sample_rate_hz} Hz")
        yield f"track {t.track_id}: " + " ".join(bits)
    for vp in p.viewpoints:
        bits = [f"group {vp.group_id}"]
        if vp.label:
            bits.insert(0, f"label {vp.label!r}")
        if vp.gps is not None:
            bits.append(f"gps ({vp.gps.latitude}, {vp.gps.longitude})")
        if vp.switch_rules:
            bits.append(f"{len(vp.switch_rules)} switch rules")
        if vp.loop is not None:
            bits.append(f"loop {vp.loop.loop_start_ms}.."
                        f"{vp.loop.loop_end_ms} ms")
        if vp.dynamic:
            bits.append("dynamic")
        yield f"viewpoint {vp.viewpoint_id}: " + ", ".join(bits)
    for ov in p.overlays:
        source = ov.source.kind.value
        if ov.source.ref_id is not None:
            source += f" {ov.source.ref_id}"
        yield (f"overlay {ov.overlay_id}: source {source}, "
               f"{ov.rendering.kind.value}, "
               f"layer {ov.properties.layering_order}, "
               f"priority {ov.properties.priority}")
    for tm in p.timed_metadata:
        yield (f"metadata track {tm.track_id}: {tm.kind.value}, "
               f"{len(tm.samples)} samples")
    for group in p.tile_groups:
        bounds = model.rect_partition_bounds(
            m.source_rect for m in group.members)
        extent = (f", {bounds.width}x{bounds.height}"
                  if bounds is not None else "")
        yield (f"tile group {group.group_id}: "
               f"{len(group.members)} tiles{extent}")
    if p.viewing_space is not None:
        extent = "x".join(str(e) for e in p.viewing_space.extent_mm)
        yield (f"viewing space: {p.viewing_space.shape.value} "
               f"{extent} mm")


def _cmd_inspect(args, config, out) -> int:
    p = load_presentation(args.file)
    if args.json:
        _emit_json(args, out, model.presentation_to_manifest(p))
    else:
        for line in _describe_presentation(p):
            print(line, file=out)
        _stamp(args, out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate / convert


def _cmd_validate(args, config, out) -> int:
    p = load_presentation(args.file)
    report = model.validate_presentation(p)
    errors = model.error_count(report)
    if args.json:
        _emit_json(args, out, {
            "errors": errors,
            "warnings": len(report) - errors,
            "issues": [issue.as_dict() for issue in report],
        })
    else:
        _print_issues(report, out)
        _stamp(args, out)
    return EXIT_FAILURES if errors else EXIT_OK


def _cmd_convert(args, config, out) -> int:
    source = args.input
    data = _read_bytes(source)
    from_omb = _is_omb(source, data)
    if from_omb:
        p = codec.decode_presentation(data)
    else:
        try:
            obj = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ParseError(f"{source}: invalid JSON: {exc}",
                             code="JSON_SYNTAX")
        p = model.presentation_from_manifest(obj)
    report = model.validate_presentation(p)
    errors = model.error_count(report)
    if errors:
        if args.json:
            _emit_json(args, out, {
                "errors": errors,
                "issues": [issue.as_dict() for issue in report],
            })
        else:
            _print_issues(report, out)
        return EXIT_FAILURES
    if args.output is not None:
        dest = Path(args.output)
    else:
        dest = Path(source).with_suffix(".json" if from_omb else ".omb")
    if from_omb:
        manifest = model.presentation_to_manifest(p)
        payload = (json.dumps(manifest, indent=2) + "\n").encode("utf-8")
    else:
        payload = codec.encode_presentation(p)
    dest.write_bytes(payload)
    if args.json:
        _emit_json(args, out, {"wrote": str(dest), "bytes": len(payload)})
    else:
        print(f"wrote {dest} ({len(payload)} bytes)", file=out)
        _stamp(args, out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# conformance


def _cmd_conformance(args, config, out) -> int:
    p = load_presentation(args.file)
    report = conformance.conformance_report(p, use_3gpp=args.use_3gpp)
    failed = [tc for tc in report if not tc.matched]
    vrif = (conformance.vrif_recommendation_report(p)
            if args.vrif else None)
    if args.json:
        payload = {
            "mode": "3gpp" if args.use_3gpp else "omaf",
            "conformant": not failed,
            "tracks": [tc.as_dict() for tc in report],
        }
        if vrif is not None:
            payload["vrif"] = [finding.as_dict() for finding in vrif]
        _emit_json(args, out, payload)
    else:
        for tc in report:
            if tc.matched:
                print(f"track {tc.track_id}: " + ", ".join(tc.matched),
                      file=out)
            else:
                print(f"track {tc.track_id}: no matching profile",
                      file=out)
                for failure in tc.unmatched:
                    print(f"  {failure.profile}: {failure.reason}",
                          file=out)
        if vrif is not None:
            for finding in vrif:
                suffix = ""
                if finding.track_ids:
                    ids = ", ".join(str(i) for i in finding.track_ids)
                    suffix = f" (tracks {ids})"
                print(f"vrif {finding.code}: {finding.message}{suffix}",
                      file=out)
        print(f"{len(report) - len(failed)}/{len(report)} "
              f"tracks conformant", file=out)
        _stamp(args, out)
    return EXIT_FAILURES if failed else EXIT_OK


# ---------------------------------------------------------------------------
# mpd


def _cmd_mpd_gen(args, config, out) -> int:
    p = load_presentation(args.file)
    xml = dash.generate_mpd(p,
                            vwpt_urn=_setting(args, config, "vwpt_urn"),
                            ovly_urn=_setting(args, config, "ovly_urn"))
    if args.timestamps:
        declaration, _, rest = xml.partition("\n")
        xml = (f"{declaration}\n<!-- generated at {_now_iso()} -->\n"
               f"{rest}")
    if args.output is not None:
        Path(args.output).write_text(xml, "utf-8")
        if args.json:
            _emit_json(args, out, {"wrote": args.output,
                                   "bytes": len(xml.encode("utf-8"))})
        else:
            print(f"wrote {args.output}", file=out)
    elif args.json:
        _emit_json(args, out, {"mpd": xml})
    else:
        out.write(xml)
    return EXIT_OK


def _cmd_mpd_parse(args, config, out) -> int:
    doc = dash.parse_mpd(_read_text(args.file),
                         vwpt_urn=_setting(args, config, "vwpt_urn"),
                         ovly_urn=_setting(args, config, "ovly_urn"))
    if args.json:
        _emit_json(args, out, doc.as_dict())
        return EXIT_OK
    for a in doc.adaptation_sets:
        print(f"adaptation set {a.set_id}: {a.content_kind.value}, "
              f"{len(a.representation_ids)} representations", file=out)
        if a.vwpt is not None:
            gps = ""
            if a.vwpt.gps is not None:
                gps = (f", gps ({a.vwpt.gps.latitude}, "
                       f"{a.vwpt.gps.longitude})")
            print(f"  viewpoint {a.vwpt.viewpoint_id}: "
                  f"position {a.vwpt.position_xyz}, "
                  f"group {a.vwpt.group_id}{gps}", file=out)
        if a.ovly is not None:
            ids = ", ".join(str(i) for i in a.ovly.overlay_ids)
            tail = ""
            if a.ovly.priorities is not None:
                tail = (", priorities "
                        + ", ".join(str(x) for x in a.ovly.priorities))
            print(f"  overlays {ids}{tail}", file=out)
    print(f"{len(doc.adaptation_sets)} adaptation sets, "
          f"{len(doc.vwpt_descriptors())} viewpoint descriptors, "
          f"{len(doc.ovly_descriptors())} overlay descriptors", file=out)
    _stamp(args, out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# compose


def _parse_layer_spec(spec: str):
    """PATH@X,Y[,OPACITY[,ALPHA_PGM]] -> its parsed fields."""
    path, sep, rest = spec.rpartition("@")
    fields = rest.split(",") if sep else []
    if not sep or not path or len(fields) < 2 or len(fields) > 4:
        raise UsageError(
            f"layer spec {spec!r} is not PATH@X,Y[,OPACITY[,ALPHA_PGM]]")
    try:
        x, y = int(fields[0]), int(fields[1])
        opacity = float(fields[2]) if len(fields) >= 3 else 1.0
    except ValueError as exc:
        raise UsageError(f"layer spec {spec!r}: {exc}")
    alpha_path = fields[3] if len(fields) == 4 else None
    return path, x, y, opacity, alpha_path


def _cmd_compose(args, config, out) -> int:
    background = playback.read_ppm(_read_bytes(args.background))
    layers = []
    for spec in args.layers:
        path, x, y, opacity, alpha_path = _parse_layer_spec(spec)
        alpha = _read_bytes(alpha_path) if alpha_path is not None else None
        raster = playback.read_ppm(_read_bytes(path), alpha)
        placement = Rect2D(x, y, raster.width, raster.height)
        layers.append(playback.ComposeLayer(raster, placement, opacity,
                                            use_alpha=alpha is not None))
    result = playback.compose(background, layers)
    payload = playback.write_ppm(result)
    Path(args.output).write_bytes(payload)
    if args.alpha_output is not None:
        Path(args.alpha_output).write_bytes(
            playback.write_alpha_pgm(result))
    if args.json:
        _emit_json(args, out, {"wrote": args.output,
                               "bytes": len(payload),
                               "width": result.width,
                               "height": result.height})
    else:
        print(f"wrote {args.output} ({result.width}x{result.height})",
              file=out)
        _stamp(args, out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate / gps-select


def _cmd_simulate(args, config, out) -> int:
    trace = strategy.read_trace_csv(_read_text(args.trace))
    p = load_presentation(args.presentation)
    group = _pick_tile_group(p, args.group)
    variants = _read_variants(args.variants)
    metrics = strategy.simulate_session(
        trace, group, variants, args.budget, args.segment_ms,
        hfov=_setting(args, config, "hfov"),
        vfov=_setting(args, config, "vfov"),
        samples=_setting(args, config, "overlap_samples"))
    if args.json:
        _emit_json(args, out, {"segments": strategy.metrics_to_json(metrics)})
        return EXIT_OK
    text = strategy.metrics_to_csv(metrics)
    if args.output is not None:
        Path(args.output).write_text(text, "utf-8")
        print(f"wrote {args.output} ({len(metrics)} segments)", file=out)
    else:
        out.write(text)
    _stamp(args, out)
    return EXIT_OK


def _cmd_gps_select(args, config, out) -> int:
    p = load_presentation(args.file)
    device = GpsPosition(args.lat, args.lon, args.alt)
    viewpoint_id = playback.select_viewpoint_by_gps(p.viewpoints, device)
    if args.json:
        _emit_json(args, out, {"viewpoint_id": viewpoint_id})
    else:
        print(viewpoint_id, file=out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="omaf-toolkit",
        description="Inspect, validate, convert, and simulate "
                    "omnidirectional media presentations.")
    parser.add_argument("--json", action="store_true",
                        help="machine-readable JSON on stdout")
    parser.add_argument("--timestamps", action="store_true",
                        help="include a generation time in reports")
    parser.add_argument("--config", metavar="PATH",
                        help="settings file (default: $OMAF_TOOLKIT_CONFIG)")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="COMMAND")

    def presentation_arg(p, name="file"):
        p.add_argument(name, help="presentation (.omb or JSON manifest)")

    cmd = sub.add_parser("inspect", help="summarize a presentation")
    presentation_arg(cmd)
    cmd.set_defaults(handler=_cmd_inspect)

    cmd = sub.add_parser("validate",
                         help="check a presentation, exit 1 on errors")
    presentation_arg(cmd)
    cmd.set_defaults(handler=_cmd_validate)

    cmd = sub.add_parser("convert",
                         help="convert between OMB and JSON manifest")
    cmd.add_argument("input", help="source presentation")
    cmd.add_argument("output", nargs="?",
                     help="destination (default: source with the "
                          "other extension)")
    cmd.set_defaults(handler=_cmd_convert)

    cmd = sub.add_parser("conformance",
                         help="match tracks against media profiles")
    presentation_arg(cmd)
    cmd.add_argument("--3gpp", dest="use_3gpp", action="store_true",
                     help="use the 3GPP VR operation points for video")
    cmd.add_argument("--vrif", action="store_true",
                     help="add VRIF guideline findings")
    cmd.set_defaults(handler=_cmd_conformance)

    cmd = sub.add_parser("mpd", help="generate or parse DASH manifests")
    mpd_sub = cmd.add_subparsers(dest="mpd_command", required=True,
                                 metavar="ACTION")
    gen = mpd_sub.add_parser("gen", help="presentation to MPD XML")
    presentation_arg(gen)
    gen.add_argument("-o", "--output", help="write XML here, not stdout")
    gen.add_argument("--vwpt-urn", dest="vwpt_urn",
                     help="viewpoint descriptor scheme id")
    gen.add_argument("--ovly-urn", dest="ovly_urn",
                     help="overlay descriptor scheme id")
    gen.set_defaults(handler=_cmd_mpd_gen)
    parse = mpd_sub.add_parser("parse",
                               help="list adaptation sets and descriptors")
    parse.add_argument("file", help="MPD XML file")
    parse.add_argument("--vwpt-urn", dest="vwpt_urn",
                       help="viewpoint descriptor scheme id")
    parse.add_argument("--ovly-urn", dest="ovly_urn",
                       help="overlay descriptor scheme id")
    parse.set_defaults(handler=_cmd_mpd_parse)

    cmd = sub.add_parser("compose",
                         help="blend overlay rasters onto a background")
    cmd.add_argument("background", help="background PPM (P6)")
    cmd.add_argument("layers", nargs="+", metavar="LAYER",
                     help="PATH@X,Y[,OPACITY[,ALPHA_PGM]], drawn in "
                          "argument order")
    cmd.add_argument("-o", "--output", required=True,
                     help="composited PPM path")
    cmd.add_argument("--alpha-out", dest="alpha_output",
                     help="also write the result's alpha plane (P5)")
    cmd.set_defaults(handler=_cmd_compose)

    cmd = sub.add_parser("simulate",
                         help="run a tile-selection session over a trace")
    cmd.add_argument("trace", help="orientation trace CSV")
    cmd.add_argument("presentation",
                     help="presentation holding the tile group")
    cmd.add_argument("variants",
                     help="JSON array of per-cell quality variants")
    cmd.add_argument("--budget", type=_budget_arg, required=True,
                     help="bitrate budget in bps, or a per-segment "
                          "comma list (last value repeats)")
    cmd.add_argument("--segment-ms", type=int, default=1000,
                     help="segment duration (default 1000)")
    cmd.add_argument("--group", type=int,
                     help="tile group id (default: first group)")
    cmd.add_argument("--hfov", type=_fov_arg,
                     help="horizontal field of view in degrees")
    cmd.add_argument("--vfov", type=_fov_arg,
                     help="vertical field of view in degrees")
    cmd.add_argument("--samples", dest="overlap_samples",
                     type=_samples_arg,
                     help="overlap sampling grid, e.g. 64x64")
    cmd.add_argument("-o", "--output", help="write CSV here, not stdout")
    cmd.set_defaults(handler=_cmd_simulate)

    cmd = sub.add_parser("gps-select",
                         help="nearest GPS-tagged viewpoint to a position")
    presentation_arg(cmd)
    cmd.add_argument("--lat", type=float, required=True,
                     help="device latitude in degrees")
    cmd.add_argument("--lon", type=float, required=True,
                     help="device longitude in degrees")
    cmd.add_argument("--alt", type=float,
                     help="device altitude in meters (informational)")
    cmd.set_defaults(handler=_cmd_gps_select)

    return parser


def run(argv, stdout: Optional[TextIO] = None,
        stderr: Optional[TextIO] = None) -> int:
    """Parse ``argv`` and execute; returns the process exit code."""
    out = stdout if stdout is not None else sys.stdout
    err = stderr if stderr is not None else sys.stderr
    parser = build_parser()
    try:
        with contextlib.redirect_stdout(out), \
                contextlib.redirect_stderr(err):
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        config_path = args.config or os.environ.get(CONFIG_ENV_VAR)
        config = load_config(config_path) if config_path else {}
        return args.handler(args, config, out)
    except UsageError as exc:
        print(f"error [{exc.code}]: {exc}", file=err)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"error [{exc.code}]: {exc}", file=err)
        return EXIT_IO
    except OmafToolkitError as exc:
        # DataError and the remaining library errors: readable input
        # that fails a documented constraint.
        print(f"error [{exc.code}]: {exc}", file=err)
        return EXIT_FAILURES
    except OSError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_IO


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
