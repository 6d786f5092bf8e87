"""Scoring localization runs against ground truth.

Accepted decisions are graded into three verdicts by majority place vote:
SamePlace (query and map node observe the same place), SameRegion (their
places differ but share a region), and Erroneous (everything else).  The
module also runs the no-filter retrieval baseline the filter is compared
against, and renders two self-contained SVG figures: a two-bar timeline
of decisions and a posterior-evolution heat strip.
"""

from __future__ import annotations

import enum
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .descriptors import DescriptorSet, Frame
from .localization import LocalizationConfig, QueryNodeBuilder, node_score
from .mapping import MappingConfig, TopoMap
from .matching import MatchBackend
from .simulate import GroundTruth

REPORT_FORMAT = "colonreport-v1"

# default threshold grid for the baseline sweep
BASELINE_THRESHOLDS = tuple(round(0.50 + 0.05 * k, 2) for k in range(10))


class Verdict(enum.Enum):
    SAME_PLACE = "same_place"
    SAME_REGION = "same_region"
    ERRONEOUS = "erroneous"


_VERDICT_COLORS = {
    Verdict.SAME_PLACE: "#2e7d32",
    Verdict.SAME_REGION: "#f9a825",
    Verdict.ERRONEOUS: "#c62828",
}


class PlaceDecision(Protocol):
    """Anything that names query frames and a map node (filter or baseline)."""

    query_node_index: int
    query_frame_ids: tuple[int, ...]
    map_node_id: int


def majority_place(frame_ids: Iterable[int], truth: GroundTruth) -> int | None:
    """Most common non-wall place among frames; ties break low; None if all wall."""
    counts = Counter(
        place
        for place in (truth.place_of(f) for f in frame_ids)
        if place is not None
    )
    if not counts:
        return None
    return min(counts, key=lambda place: (-counts[place], place))


def classify_decision(
    decision: PlaceDecision,
    query_truth: GroundTruth,
    topo_map: TopoMap,
    map_truth: GroundTruth,
) -> Verdict:
    """Grade one accepted decision by majority place on both sides.

    A side whose frames are all walls has no place and grades Erroneous.
    """
    query_place = majority_place(decision.query_frame_ids, query_truth)
    node = topo_map.nodes[decision.map_node_id]
    map_place = majority_place(node.frame_ids, map_truth)
    if query_place is None or map_place is None:
        return Verdict.ERRONEOUS
    if query_place == map_place:
        return Verdict.SAME_PLACE
    if query_truth.region_of_place(query_place) == map_truth.region_of_place(map_place):
        return Verdict.SAME_REGION
    return Verdict.ERRONEOUS


@dataclass(frozen=True)
class Metrics:
    """Summary counts and ratios over the accepted decisions."""

    accepted: int
    same_place: int
    same_region: int
    erroneous: int
    same_place_precision: float | None
    region_or_better_precision: float | None
    coverage: float

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "same_place": self.same_place,
            "same_region": self.same_region,
            "erroneous": self.erroneous,
            "same_place_precision": self.same_place_precision,
            "region_or_better_precision": self.region_or_better_precision,
            "coverage": self.coverage,
        }


def compute_metrics(
    decisions: Sequence[PlaceDecision],
    verdicts: Sequence[Verdict],
    query_truth: GroundTruth,
) -> Metrics:
    """Aggregate verdicts into counts, precisions, and place coverage.

    Coverage is the fraction of distinct ground-truth places in the query
    session that received at least one SamePlace decision.
    """
    if len(decisions) != len(verdicts):
        raise ValueError(
            f"{len(decisions)} decisions but {len(verdicts)} verdicts"
        )
    counts = Counter(verdicts)
    accepted = len(verdicts)
    same_place = counts[Verdict.SAME_PLACE]
    same_region = counts[Verdict.SAME_REGION]
    erroneous = counts[Verdict.ERRONEOUS]
    covered = {
        majority_place(d.query_frame_ids, query_truth)
        for d, v in zip(decisions, verdicts)
        if v is Verdict.SAME_PLACE
    }
    covered.discard(None)
    all_places = query_truth.places()
    coverage = len(covered) / len(all_places) if all_places else 0.0
    return Metrics(
        accepted=accepted,
        same_place=same_place,
        same_region=same_region,
        erroneous=erroneous,
        same_place_precision=same_place / accepted if accepted else None,
        region_or_better_precision=(
            (same_place + same_region) / accepted if accepted else None
        ),
        coverage=coverage,
    )


@dataclass(frozen=True)
class ScoredQuery:
    """Baseline retrieval result for one query node: best node by raw score."""

    query_node_index: int
    query_frame_ids: tuple[int, ...]
    map_node_id: int
    score: float


def baseline_retrieval(
    frames: DescriptorSet | Iterable[Frame],
    topo_map: TopoMap,
    config: LocalizationConfig,
    oracle: MatchBackend,
    gating: MappingConfig | None = None,
) -> list[ScoredQuery]:
    """Memoryless retrieval: per query node, the argmax of raw node scores.

    Query nodes are built exactly as in filtering; there is no temporal
    model, so each query node is scored independently by descriptor
    similarity alone.  Acceptance is a threshold on the best score,
    applied afterwards by the sweep helpers.
    """
    if topo_map.node_count == 0:
        raise ValueError("cannot run retrieval against an empty map")
    builder = QueryNodeBuilder(
        gating if gating is not None else topo_map.config,
        config.query_node_size,
        oracle,
    )
    scored: list[ScoredQuery] = []
    for frame in frames:
        completed = builder.feed(frame)
        if completed is None:
            continue
        scores = np.array(
            [node_score(completed, node) for node in topo_map.nodes], dtype=np.float64
        )
        best = int(np.argmax(scores))
        scored.append(
            ScoredQuery(
                query_node_index=len(scored),
                query_frame_ids=tuple(f.frame_id for f in completed),
                map_node_id=best,
                score=float(scores[best]),
            )
        )
    return scored


def baseline_at_threshold(
    scored: Sequence[ScoredQuery], threshold: float
) -> list[ScoredQuery]:
    """Queries whose best score strictly exceeds the threshold."""
    return [sq for sq in scored if sq.score > threshold]


def baseline_at_count(scored: Sequence[ScoredQuery], count: int) -> list[ScoredQuery]:
    """The count most confident queries (threshold chosen to match a count).

    Ties at the cut keep the earlier query node.  Results come back in
    stream order.
    """
    if count <= 0:
        return []
    ranked = sorted(scored, key=lambda sq: (-sq.score, sq.query_node_index))
    chosen = ranked[: min(count, len(ranked))]
    return sorted(chosen, key=lambda sq: sq.query_node_index)


def baseline_curve(
    scored: Sequence[ScoredQuery],
    topo_map: TopoMap,
    query_truth: GroundTruth,
    map_truth: GroundTruth,
    thresholds: Sequence[float] = BASELINE_THRESHOLDS,
) -> list[dict]:
    """Precision/acceptance across a threshold grid, one row per threshold."""
    rows = []
    for threshold in thresholds:
        accepted = baseline_at_threshold(scored, threshold)
        verdicts = [
            classify_decision(sq, query_truth, topo_map, map_truth) for sq in accepted
        ]
        metrics = compute_metrics(accepted, verdicts, query_truth)
        rows.append(
            {
                "threshold": threshold,
                "accepted": metrics.accepted,
                "same_place": metrics.same_place,
                "same_place_precision": metrics.same_place_precision,
                "region_or_better_precision": metrics.region_or_better_precision,
            }
        )
    return rows


def write_report(
    metrics: Metrics,
    decisions: Sequence[PlaceDecision],
    verdicts: Sequence[Verdict],
    path: str | Path,
    baseline: dict | None = None,
) -> None:
    """Write the metrics report; the baseline section is optional."""
    document: dict = {
        "format": REPORT_FORMAT,
        "metrics": metrics.to_dict(),
        "per_decision": [
            {
                "query_node_index": d.query_node_index,
                "map_node_id": d.map_node_id,
                "verdict": v.value,
            }
            for d, v in zip(decisions, verdicts)
        ],
    }
    if baseline is not None:
        document["baseline"] = baseline
    Path(path).write_text(json.dumps(document, separators=(",", ":")) + "\n")


def _truth_span(truth: GroundTruth) -> tuple[int, list[tuple[float, int]]]:
    """Max frame id plus (position, region) ticks at region starts."""
    max_frame = max((e.frame_id for e in truth.entries), default=0)
    ticks: list[tuple[float, int]] = []
    last_region: int | None = None
    for entry in truth.entries:
        if entry.region is not None and entry.region != last_region:
            ticks.append((entry.frame_id, entry.region))
            last_region = entry.region
    return max_frame, ticks


def _node_position(topo_map: TopoMap, node_id: int) -> float:
    frame_ids = topo_map.nodes[node_id].frame_ids
    return sum(frame_ids) / len(frame_ids)


def emit_timeline(
    decisions: Sequence[PlaceDecision],
    verdicts: Sequence[Verdict],
    topo_map: TopoMap,
    query_truth: GroundTruth,
    map_truth: GroundTruth,
    path: str | Path,
) -> None:
    """Render the decisions timeline as a self-contained SVG.

    Two horizontal bars stand for the map and query sessions (frame id
    mapped to x), vertical ticks mark region starts, and each decision is
    one connecting line colored by verdict.  Connectors are the only
    <line> elements in the document.  Output bytes are deterministic.
    """
    if len(decisions) != len(verdicts):
        raise ValueError(f"{len(decisions)} decisions but {len(verdicts)} verdicts")
    width, height = 1000.0, 280.0
    left, right = 60.0, 980.0
    map_y, query_y = 80.0, 220.0
    map_max, map_ticks = _truth_span(map_truth)
    query_max, query_ticks = _truth_span(query_truth)

    def x_of(frame_pos: float, max_frame: int) -> float:
        span = max(max_frame, 1)
        return left + (right - left) * (frame_pos / span)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="#ffffff"/>',
        f'<text x="{left:.2f}" y="{map_y - 14:.2f}" font-family="sans-serif" '
        f'font-size="13" fill="#333333">map session</text>',
        f'<text x="{left:.2f}" y="{query_y + 26:.2f}" font-family="sans-serif" '
        f'font-size="13" fill="#333333">query session</text>',
    ]
    for decision, verdict in zip(decisions, verdicts):
        map_x = x_of(_node_position(topo_map, decision.map_node_id), map_max)
        query_pos = sum(decision.query_frame_ids) / max(len(decision.query_frame_ids), 1)
        query_x = x_of(query_pos, query_max)
        color = _VERDICT_COLORS[verdict]
        parts.append(
            f'<line x1="{map_x:.2f}" y1="{map_y:.2f}" x2="{query_x:.2f}" '
            f'y2="{query_y:.2f}" stroke="{color}" stroke-width="1.5" opacity="0.85"/>'
        )
    for y, ticks, max_frame in (
        (map_y, map_ticks, map_max),
        (query_y, query_ticks, query_max),
    ):
        parts.append(
            f'<rect x="{left:.2f}" y="{y - 3:.2f}" width="{right - left:.2f}" '
            f'height="6" fill="#1a1a1a"/>'
        )
        for frame_pos, _region in ticks:
            tick_x = x_of(frame_pos, max_frame)
            parts.append(
                f'<rect x="{tick_x - 0.75:.2f}" y="{y - 10:.2f}" width="1.5" '
                f'height="20" fill="#555555"/>'
            )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def _heat_color(value: float) -> str:
    # white to dark blue, sqrt-lifted so small masses stay visible
    v = min(max(value, 0.0), 1.0) ** 0.5
    r = round(255 + (8 - 255) * v)
    g = round(255 + (48 - 255) * v)
    b = round(255 + (107 - 255) * v)
    return f"#{r:02x}{g:02x}{b:02x}"


def emit_posterior_trace(
    trace: Sequence[np.ndarray],
    accepted: Iterable[int],
    topo_map: TopoMap,
    config: LocalizationConfig,
    path: str | Path,
) -> None:
    """Render posterior evolution as stacked SVG heat strips.

    Top strip: raw posterior per state (lost state as the bottom row when
    enabled); bottom strip: per-node window mass with one marker per
    accepted query-node index.  Columns are query-node indices.
    """
    if not trace:
        raise ValueError("posterior trace is empty")
    accepted_set = set(accepted)
    n = topo_map.node_count
    steps = len(trace)
    windows = [topo_map.nodes_within(i, config.m) for i in range(n)]
    states = len(trace[0])
    cell_w = max(900.0 / steps, 2.0)
    strip_h = 160.0
    left, top = 70.0, 40.0
    gap = 60.0
    width = left + cell_w * steps + 30.0
    height = top + 2 * strip_h + gap + 40.0
    raw_cell_h = strip_h / states
    mass_cell_h = strip_h / n
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="#ffffff"/>',
        f'<text x="{left:.2f}" y="{top - 12:.2f}" font-family="sans-serif" '
        f'font-size="13" fill="#333333">posterior per state</text>',
        f'<text x="{left:.2f}" y="{top + strip_h + gap - 12:.2f}" '
        f'font-family="sans-serif" font-size="13" fill="#333333">'
        f"window mass per node (radius {config.m})</text>",
    ]
    for col, posterior in enumerate(trace):
        if len(posterior) != states:
            raise ValueError("trace entries have inconsistent state counts")
        x = left + col * cell_w
        for row in range(states):
            parts.append(
                f'<rect x="{x:.2f}" y="{top + row * raw_cell_h:.2f}" '
                f'width="{cell_w:.2f}" height="{raw_cell_h:.2f}" '
                f'fill="{_heat_color(float(posterior[row]))}"/>'
            )
        mass_top = top + strip_h + gap
        for row in range(n):
            mass = float(posterior[windows[row]].sum())
            parts.append(
                f'<rect x="{x:.2f}" y="{mass_top + row * mass_cell_h:.2f}" '
                f'width="{cell_w:.2f}" height="{mass_cell_h:.2f}" '
                f'fill="{_heat_color(mass)}"/>'
            )
        if col in accepted_set:
            marker_y = mass_top + strip_h + 12.0
            parts.append(
                f'<circle cx="{x + cell_w / 2:.2f}" cy="{marker_y:.2f}" r="3" '
                f'fill="#2e7d32"/>'
            )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
