"""Grade localization decisions against ground truth and render figures.

Every accepted decision is judged by majority vote over the true places
of its query frames and of the matched map node's frames: same place,
same region, or erroneous.  A retrieval baseline (best single node by
descriptor score, no filter) is evaluated at the same acceptance count
so the comparison is precision against precision.

Run from the repository root after an editable install:

    python3 demos/demo_evaluate.py
"""

from __future__ import annotations

from pathlib import Path

from colonmap import (
    LocalizationConfig,
    MappingConfig,
    SessionParams,
    SyntheticMatchParams,
    SyntheticMatcher,
    WorldParams,
    baseline_at_count,
    baseline_curve,
    baseline_retrieval,
    build_map,
    classify_decision,
    compute_metrics,
    emit_posterior_trace,
    emit_timeline,
    generate_session,
    generate_world,
    localize_sequence,
    write_report,
)

OUTPUT = Path(__file__).resolve().parent / "output"


def main() -> None:
    OUTPUT.mkdir(exist_ok=True)

    world = generate_world(WorldParams(n_places=12, n_regions=3, seed=7))
    survey, survey_truth = generate_session(world, SessionParams(seed=8))
    revisit, revisit_truth = generate_session(world, SessionParams(seed=9))

    params = SyntheticMatchParams(seed=7)
    topo_map, _ = build_map(
        survey, MappingConfig(), SyntheticMatcher(params, survey)
    )
    config = LocalizationConfig()
    run = localize_sequence(
        revisit, topo_map, config, SyntheticMatcher(params, revisit)
    )

    verdicts = [
        classify_decision(d, revisit_truth, topo_map, survey_truth)
        for d in run.decisions
    ]
    metrics = compute_metrics(run.decisions, verdicts, revisit_truth)
    print(
        f"filter: {metrics.accepted} accepted = {metrics.same_place} same-place"
        f" + {metrics.same_region} same-region + {metrics.erroneous} erroneous"
    )
    print(
        f"  same-place precision {metrics.same_place_precision:.3f}, "
        f"region-or-better {metrics.region_or_better_precision:.3f}, "
        f"coverage {metrics.coverage:.3f}"
    )

    # Baseline: rank every query node by its best single-node descriptor
    # score and accept the top ones, matching the filter's accept count.
    scored = baseline_retrieval(
        revisit, topo_map, config, SyntheticMatcher(params, revisit)
    )
    matched = baseline_at_count(scored, metrics.accepted)
    baseline_verdicts = [
        classify_decision(sq, revisit_truth, topo_map, survey_truth)
        for sq in matched
    ]
    baseline_metrics = compute_metrics(matched, baseline_verdicts, revisit_truth)
    print(
        f"baseline at matched count: same-place precision "
        f"{baseline_metrics.same_place_precision:.3f}"
    )
    for row in baseline_curve(scored, topo_map, revisit_truth, survey_truth):
        print(
            f"  threshold {row['threshold']:.2f}: {row['accepted']:3d} accepted,"
            f" precision {row['same_place_precision']}"
        )

    report_path = OUTPUT / "revisit.report.json"
    write_report(
        metrics,
        run.decisions,
        verdicts,
        report_path,
        baseline={
            "curve": baseline_curve(scored, topo_map, revisit_truth, survey_truth),
            "matched_count": baseline_metrics.to_dict(),
        },
    )
    print(f"wrote {report_path}")

    # Figures: a per-decision verdict timeline and the full posterior
    # heat map with accepted decisions circled.  Both are plain SVG.
    timeline_path = OUTPUT / "revisit.timeline.svg"
    emit_timeline(
        run.decisions, verdicts, topo_map, revisit_truth, survey_truth,
        timeline_path,
    )
    trace_path = OUTPUT / "revisit.posterior.svg"
    accepted = [d.query_node_index for d in run.decisions]
    emit_posterior_trace(run.trace, accepted, topo_map, config, trace_path)
    print(f"wrote {timeline_path}")
    print(f"wrote {trace_path}")


if __name__ == "__main__":
    main()
