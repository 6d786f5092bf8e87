"""Command-line front end: simulate, map, localize, eval.

One binary drives the whole pipeline.  Numeric parameters resolve in
three layers: built-in defaults, then a key=value config file given with
--config, then explicit flags (flags win).  Exit codes are stable: 0
success, 1 runtime or data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .descriptors import DescriptorSet, load_descriptors, save_descriptors
from .errors import ColonmapDataError
from .evaluation import (
    BASELINE_THRESHOLDS,
    baseline_at_count,
    baseline_curve,
    baseline_retrieval,
    classify_decision,
    compute_metrics,
    emit_posterior_trace,
    emit_timeline,
    write_report,
)
from .localization import (
    LocalizationConfig,
    load_decisions,
    localize_sequence,
    save_decisions,
)
from .mapping import (
    MappingConfig,
    MappingEvent,
    TopoMapper,
    load_map,
    save_map,
)
from .matching import (
    MatchCache,
    SyntheticMatchParams,
    SyntheticMatcher,
    load_match_cache,
    save_match_cache,
    synthetic_match_count,
)
from .simulate import (
    SessionParams,
    WorldParams,
    generate_session,
    generate_world,
    load_truth,
    save_truth,
)

_MAPPING_KEYS = ("skip_similarity", "max_skips", "min_matches", "min_node_images")
_LOCALIZATION_KEYS = (
    "m",
    "accept_threshold",
    "top_k",
    "likelihood_floor",
    "query_node_size",
    "lost_state_enabled",
)
_WORLD_KEYS = ("n_places", "n_regions", "place_separation")
_SESSION_KEYS = ("dwell_min", "dwell_max", "frame_noise", "session_noise", "wall_prob")


def _load_config_file(path: str, parser: argparse.ArgumentParser) -> dict[str, str]:
    """Parse a key=value config file; malformed content is a usage error."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        parser.error(f"cannot read config file: {exc}")
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if not sep or not key or not value:
            parser.error(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        values[key] = value
    return values


def _coerce(key: str, text: str, default, parser: argparse.ArgumentParser):
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError as exc:
        parser.error(f"config key {key}: {exc}")


def _resolve(
    defaults: dict,
    args: argparse.Namespace,
    parser: argparse.ArgumentParser,
) -> dict:
    """Layer defaults, config file, then explicit flags; flags win."""
    values = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        for key, text in _load_config_file(config_path, parser).items():
            if key not in values:
                parser.error(f"config key {key} is not recognized by this command")
            values[key] = _coerce(key, text, defaults[key], parser)
    for key in defaults:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            values[key] = flag_value
    return values


def _mapping_config(values: dict, parser: argparse.ArgumentParser) -> MappingConfig:
    try:
        return MappingConfig(**{key: values[key] for key in _MAPPING_KEYS})
    except ValueError as exc:
        parser.error(str(exc))


def _localization_config(
    values: dict, parser: argparse.ArgumentParser
) -> LocalizationConfig:
    try:
        return LocalizationConfig(
            **{key: values[key] for key in _LOCALIZATION_KEYS}
        )
    except ValueError as exc:
        parser.error(str(exc))


def _oracle_for(
    dset: DescriptorSet,
    args: argparse.Namespace,
    parser: argparse.ArgumentParser,
):
    if args.match_cache and args.synthetic_oracle:
        parser.error("--match-cache and --synthetic-oracle are mutually exclusive")
    if args.match_cache:
        return load_match_cache(args.match_cache)
    if args.synthetic_oracle:
        return SyntheticMatcher(SyntheticMatchParams(seed=args.seed), dset)
    parser.error("an oracle source is required: --match-cache FILE or --synthetic-oracle")


def _timing_line(label: str, seconds: list[float]) -> str:
    if not seconds:
        return f"{label}: no frames processed"
    times = np.asarray(seconds) * 1000.0
    return (
        f"{label}: {len(times)} frames, per-frame mean {times.mean():.3f} ms, "
        f"p50 {np.percentile(times, 50):.3f} ms, p95 {np.percentile(times, 95):.3f} ms"
    )


def _add_config_flag(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--config",
        metavar="FILE",
        help="key=value config file; explicit flags override its entries",
    )


def _add_oracle_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--match-cache", metavar="FILE", help="pairwise match-count cache")
    sub.add_argument(
        "--synthetic-oracle",
        action="store_true",
        help="derive match counts from descriptor similarity",
    )
    sub.add_argument(
        "--seed",
        type=int,
        default=0,
        help="seed for the synthetic oracle's count noise (default 0)",
    )


def _add_mapping_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--skip-similarity", dest="skip_similarity", type=float)
    sub.add_argument("--max-skips", dest="max_skips", type=int)
    sub.add_argument("--min-matches", dest="min_matches", type=int)
    sub.add_argument("--min-node-images", dest="min_node_images", type=int)


def cmd_simulate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    defaults = {
        "n_places": 40,
        "n_regions": 7,
        "place_separation": 0.5,
        "dwell_min": 5,
        "dwell_max": 25,
        "frame_noise": 0.25,
        "session_noise": 0.15,
        "wall_prob": 0.05,
        "sessions": 2,
        "seed": 0,
    }
    values = _resolve(defaults, args, parser)
    try:
        world_params = WorldParams(
            n_places=values["n_places"],
            n_regions=values["n_regions"],
            place_separation=values["place_separation"],
            seed=values["seed"],
        )
    except ValueError as exc:
        parser.error(str(exc))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    world = generate_world(world_params)
    print(f"world: {world.n_places} places, {len(set(world.regions))} regions")
    for session_index in range(1, values["sessions"] + 1):
        try:
            session_params = SessionParams(
                dwell_min=values["dwell_min"],
                dwell_max=values["dwell_max"],
                frame_noise=values["frame_noise"],
                session_noise=values["session_noise"],
                wall_prob=values["wall_prob"],
                seed=values["seed"] + session_index,
            )
        except ValueError as exc:
            parser.error(str(exc))
        dset, truth = generate_session(world, session_params)
        descriptor_path = out_dir / f"session_{session_index}.cmd1"
        truth_path = out_dir / f"session_{session_index}.truth.json"
        save_descriptors(dset, descriptor_path)
        save_truth(truth, truth_path)
        print(f"session {session_index}: {len(dset)} frames -> {descriptor_path}")
        print(f"session {session_index}: truth -> {truth_path}")
        if args.emit_match_cache:
            cache = MatchCache()
            match_params = SyntheticMatchParams(seed=values["seed"])
            frames = dset.frames
            for i, frame_a in enumerate(frames):
                for frame_b in frames[i + 1 :]:
                    cache.insert(
                        frame_a.frame_id,
                        frame_b.frame_id,
                        synthetic_match_count(
                            match_params,
                            frame_a.descriptor,
                            frame_b.descriptor,
                            frame_a.frame_id,
                            frame_b.frame_id,
                        ),
                    )
            cache_path = out_dir / f"session_{session_index}.matches"
            save_match_cache(cache, cache_path)
            print(f"session {session_index}: match cache -> {cache_path}")
    return 0


def cmd_map(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    defaults = {key: getattr(MappingConfig(), key) for key in _MAPPING_KEYS}
    values = _resolve(defaults, args, parser)
    config = _mapping_config(values, parser)
    dset = load_descriptors(args.descriptors)
    oracle = _oracle_for(dset, args, parser)
    mapper = TopoMapper(config, oracle)
    frame_seconds: list[float] = []
    for frame in dset:
        started = time.perf_counter()
        mapper.process_frame(frame)
        frame_seconds.append(time.perf_counter() - started)
    topo_map = mapper.finalize()
    save_map(topo_map, args.out)
    if topo_map.node_count == 0:
        print(
            "warning: map has no nodes; thresholds may be too strict for this stream",
            file=sys.stderr,
        )
    sizes = [len(node) for node in topo_map.nodes]
    print(f"map: {topo_map.node_count} nodes, {len(topo_map.edges)} edges -> {args.out}")
    print(f"node frame counts: {sizes}")
    print(_timing_line("mapping", frame_seconds))
    if args.events:
        _write_events(mapper.events, args.events)
        print(f"event log -> {args.events}")
    return 0


def _write_events(events: list[MappingEvent], path: str) -> None:
    lines = []
    for event in events:
        frame = "-" if event.frame_id is None else str(event.frame_id)
        node = "-" if event.node_id is None else str(event.node_id)
        lines.append(f"{event.kind}\t{frame}\t{node}\t{event.reason}\n")
    Path(path).write_text("".join(lines))


def cmd_localize(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    loc_defaults = {key: getattr(LocalizationConfig(), key) for key in _LOCALIZATION_KEYS}
    gating_defaults = {key: None for key in _MAPPING_KEYS}
    values = _resolve(loc_defaults, args, parser)
    if args.no_lost_state:
        values["lost_state_enabled"] = False
    config = _localization_config(values, parser)
    topo_map = load_map(args.map)
    if topo_map.node_count == 0:
        print("error: cannot localize against an empty map", file=sys.stderr)
        return 1
    gating = topo_map.config
    overrides = {
        key: getattr(args, key)
        for key in gating_defaults
        if getattr(args, key, None) is not None
    }
    if overrides:
        try:
            gating = MappingConfig(**{**gating.to_dict(), **overrides})
        except ValueError as exc:
            parser.error(str(exc))
    dset = load_descriptors(args.descriptors)
    oracle = _oracle_for(dset, args, parser)
    run = localize_sequence(dset, topo_map, config, oracle, gating=gating)
    save_decisions(
        args.out,
        config,
        run.decisions,
        trace=run.trace if args.trace else None,
    )
    print(
        f"accepted {len(run.decisions)} localization decisions over "
        f"{len(run.query_frame_ids)} query nodes -> {args.out}"
    )
    print(_timing_line("localization", run.frame_seconds))
    return 0


def cmd_eval(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    decisions_file = load_decisions(args.decisions)
    topo_map = load_map(args.map)
    query_truth = load_truth(args.truth)
    map_truth = load_truth(args.map_truth)
    decisions = decisions_file.decisions
    verdicts = [
        classify_decision(d, query_truth, topo_map, map_truth) for d in decisions
    ]
    metrics = compute_metrics(decisions, verdicts, query_truth)
    baseline_section = None
    if args.baseline:
        if not args.descriptors:
            parser.error("--baseline needs --descriptors (the query stream)")
        dset = load_descriptors(args.descriptors)
        oracle = _oracle_for(dset, args, parser)
        gating = topo_map.config
        overrides = {
            key: getattr(args, key)
            for key in _MAPPING_KEYS
            if getattr(args, key, None) is not None
        }
        if overrides:
            try:
                gating = MappingConfig(**{**gating.to_dict(), **overrides})
            except ValueError as exc:
                parser.error(str(exc))
        scored = baseline_retrieval(
            dset, topo_map, decisions_file.config, oracle, gating=gating
        )
        matched = baseline_at_count(scored, len(decisions))
        matched_verdicts = [
            classify_decision(sq, query_truth, topo_map, map_truth) for sq in matched
        ]
        matched_metrics = compute_metrics(matched, matched_verdicts, query_truth)
        baseline_section = {
            "curve": baseline_curve(
                scored, topo_map, query_truth, map_truth, BASELINE_THRESHOLDS
            ),
            "matched_count": matched_metrics.to_dict(),
        }
    write_report(metrics, decisions, verdicts, args.out, baseline=baseline_section)
    print(
        f"accepted {metrics.accepted}; same_place {metrics.same_place}; "
        f"same_region {metrics.same_region}; erroneous {metrics.erroneous}"
    )
    if metrics.accepted:
        print(
            f"same_place_precision {metrics.same_place_precision:.3f}; "
            f"region_or_better {metrics.region_or_better_precision:.3f}; "
            f"coverage {metrics.coverage:.3f}"
        )
    print(f"report -> {args.out}")
    if baseline_section is not None:
        matched_precision = baseline_section["matched_count"]["same_place_precision"]
        shown = "n/a" if matched_precision is None else f"{matched_precision:.3f}"
        print(
            f"baseline at matched count ({metrics.accepted}): "
            f"same_place_precision {shown}"
        )
    if args.timeline:
        emit_timeline(
            decisions, verdicts, topo_map, query_truth, map_truth, args.timeline
        )
        print(f"timeline figure -> {args.timeline}")
    if args.posterior:
        if decisions_file.trace is None:
            print(
                "error: decisions file has no trace; re-run localize with --trace",
                file=sys.stderr,
            )
            return 1
        accepted_indexes = [d.query_node_index for d in decisions]
        emit_posterior_trace(
            [posterior for _, posterior in decisions_file.trace],
            accepted_indexes,
            topo_map,
            decisions_file.config,
            args.posterior,
        )
        print(f"posterior figure -> {args.posterior}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="colonmap",
        description="Topological mapping and Bayesian localization over descriptor streams",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser(
        "simulate", help="generate a synthetic world and per-session streams"
    )
    simulate.add_argument("--places", dest="n_places", type=int)
    simulate.add_argument("--regions", dest="n_regions", type=int)
    simulate.add_argument("--separation", dest="place_separation", type=float)
    simulate.add_argument("--sessions", dest="sessions", type=int)
    simulate.add_argument("--dwell-min", dest="dwell_min", type=int)
    simulate.add_argument("--dwell-max", dest="dwell_max", type=int)
    simulate.add_argument("--frame-noise", dest="frame_noise", type=float)
    simulate.add_argument("--session-noise", dest="session_noise", type=float)
    simulate.add_argument("--wall-prob", dest="wall_prob", type=float)
    simulate.add_argument("--seed", dest="seed", type=int)
    simulate.add_argument("--out-dir", required=True)
    simulate.add_argument(
        "--emit-match-cache",
        action="store_true",
        help="also write per-session match caches (uses the command seed)",
    )
    _add_config_flag(simulate)
    simulate.set_defaults(func=cmd_simulate)

    map_cmd = commands.add_parser("map", help="build a topological map from a stream")
    map_cmd.add_argument("--descriptors", required=True)
    map_cmd.add_argument("--out", required=True)
    map_cmd.add_argument("--events", help="also write the mapping event log")
    _add_mapping_flags(map_cmd)
    _add_oracle_flags(map_cmd)
    _add_config_flag(map_cmd)
    map_cmd.set_defaults(func=cmd_map)

    localize = commands.add_parser(
        "localize", help="run the Bayes filter over a query stream"
    )
    localize.add_argument("--map", required=True)
    localize.add_argument("--descriptors", required=True)
    localize.add_argument("--out", required=True)
    localize.add_argument("--m", dest="m", type=int)
    localize.add_argument("--accept", dest="accept_threshold", type=float)
    localize.add_argument("--top-k", dest="top_k", type=int)
    localize.add_argument("--floor", dest="likelihood_floor", type=float)
    localize.add_argument("--query-node-size", dest="query_node_size", type=int)
    localize.add_argument(
        "--no-lost-state",
        action="store_true",
        help="run the filter over map nodes only",
    )
    localize.add_argument(
        "--trace",
        action="store_true",
        help="embed the full posterior trace in the decisions file (large)",
    )
    _add_mapping_flags(localize)
    _add_oracle_flags(localize)
    _add_config_flag(localize)
    localize.set_defaults(func=cmd_localize)

    eval_cmd = commands.add_parser(
        "eval", help="grade decisions against ground truth and render figures"
    )
    eval_cmd.add_argument("--decisions", required=True)
    eval_cmd.add_argument("--map", required=True)
    eval_cmd.add_argument("--truth", required=True, help="query-session ground truth")
    eval_cmd.add_argument("--map-truth", required=True, help="map-session ground truth")
    eval_cmd.add_argument("--out", required=True, help="metrics report path")
    eval_cmd.add_argument("--timeline", help="write the decisions timeline SVG here")
    eval_cmd.add_argument("--posterior", help="write the posterior-evolution SVG here")
    eval_cmd.add_argument(
        "--baseline",
        action="store_true",
        help="also run the no-filter retrieval baseline (needs --descriptors)",
    )
    eval_cmd.add_argument("--descriptors", help="query stream, for --baseline")
    _add_mapping_flags(eval_cmd)
    _add_oracle_flags(eval_cmd)
    _add_config_flag(eval_cmd)
    eval_cmd.set_defaults(func=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args, parser)
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 2
    except ColonmapDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
