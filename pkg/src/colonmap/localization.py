"""Discrete Bayesian localization against a topological map.

The filter maintains a posterior over map nodes (plus an optional virtual
"lost" state) and advances once per completed query node, a short group of
consecutive frames gated exactly like mapping so walls and duplicates are
filtered identically in both phases.  Each iteration is the classic
predict / update cycle:

  predict   spreads mass through the map: a node keeps neighbor_mass
            spread uniformly over its hop-distance window (radius m,
            clipped windows renormalize over what exists) and leaks
            far_mass uniformly over everything else,
  update    multiplies in a measurement: per-node mean-of-max descriptor
            similarity, with only the top_k scores kept and every other
            state floored at likelihood_floor, then renormalizes.

A localization is accepted when some node's window (hop distance <= m,
lost state excluded) accumulates posterior mass strictly above
accept_threshold; the reported node is the highest-posterior state inside
that window.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .descriptors import DescriptorSet, Frame, similarity
from .errors import ColonmapDataError
from .mapping import MappingConfig, Node, TopoMap
from .matching import MatchBackend

DECISIONS_FORMAT = "colonloc-v1"

# Index -1 addresses the virtual "not in the map" state in the public API;
# internally it is stored as the last entry of the posterior vector.
LOST_STATE = -1


class FilterCollapseError(ColonmapDataError, ArithmeticError):
    """The posterior lost all mass (or met a negative likelihood)."""


class DecisionsFormatError(ColonmapDataError, ValueError):
    """A decisions file violates the decisions schema."""


@dataclass(frozen=True)
class LocalizationConfig:
    """Filter parameters.  m is the neighbor radius in graph hops."""

    m: int = 3
    accept_threshold: float = 0.9
    top_k: int = 7
    likelihood_floor: float = 0.05
    query_node_size: int = 3
    neighbor_mass: float = 0.9
    far_mass: float = 0.1
    lost_state_enabled: bool = True

    def __post_init__(self) -> None:
        if self.m < 0:
            raise ValueError(f"m must be non-negative, got {self.m}")
        if self.accept_threshold <= 0.0:
            raise ValueError(
                f"accept_threshold must be positive, got {self.accept_threshold}"
            )
        if self.top_k < 1:
            raise ValueError(f"top_k must be at least 1, got {self.top_k}")
        if self.likelihood_floor < 0.0:
            raise ValueError(
                f"likelihood_floor must be non-negative, got {self.likelihood_floor}"
            )
        if self.query_node_size < 1:
            raise ValueError(
                f"query_node_size must be at least 1, got {self.query_node_size}"
            )
        if min(self.neighbor_mass, self.far_mass) < 0.0:
            raise ValueError("neighbor_mass and far_mass must be non-negative")
        if abs(self.neighbor_mass + self.far_mass - 1.0) > 1e-9:
            raise ValueError(
                f"neighbor_mass + far_mass must equal 1, got "
                f"{self.neighbor_mass} + {self.far_mass}"
            )

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "accept_threshold": self.accept_threshold,
            "top_k": self.top_k,
            "likelihood_floor": self.likelihood_floor,
            "query_node_size": self.query_node_size,
            "neighbor_mass": self.neighbor_mass,
            "far_mass": self.far_mass,
            "lost_state_enabled": self.lost_state_enabled,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LocalizationConfig":
        try:
            return cls(
                m=int(data["m"]),
                accept_threshold=float(data["accept_threshold"]),
                top_k=int(data["top_k"]),
                likelihood_floor=float(data["likelihood_floor"]),
                query_node_size=int(data["query_node_size"]),
                neighbor_mass=float(data["neighbor_mass"]),
                far_mass=float(data["far_mass"]),
                lost_state_enabled=bool(data["lost_state_enabled"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DecisionsFormatError(f"invalid localization config: {exc}") from None


@dataclass
class QueryNode:
    """A short group of consecutive query frames, complete at a fixed size."""

    frames: list[Frame] = field(default_factory=list)

    def is_complete(self, size: int) -> bool:
        return len(self.frames) == size


@dataclass(frozen=True, eq=False)
class LocalizationDecision:
    """An accepted localization: query node matched to a map node."""

    query_node_index: int
    query_frame_ids: tuple[int, ...]
    map_node_id: int
    window_mass: float
    posterior_snapshot: np.ndarray | None


def state_count(topo_map: TopoMap, config: LocalizationConfig) -> int:
    """Number of filter states: map nodes plus the optional lost state."""
    return topo_map.node_count + (1 if config.lost_state_enabled else 0)


def uniform_posterior(topo_map: TopoMap, config: LocalizationConfig) -> np.ndarray:
    """The filter's initial belief: equal mass on every state."""
    ns = state_count(topo_map, config)
    if ns == 0:
        raise ValueError("cannot build a posterior over an empty map")
    return np.full(ns, 1.0 / ns, dtype=np.float64)


def _check_posterior(posterior: np.ndarray, ns: int) -> np.ndarray:
    posterior = np.asarray(posterior, dtype=np.float64)
    if posterior.shape != (ns,):
        raise ValueError(
            f"posterior has shape {posterior.shape}, expected ({ns},) for this map"
        )
    return posterior


def transition_row(
    topo_map: TopoMap, state: int, config: LocalizationConfig
) -> np.ndarray:
    """One row of the time-evolution model: p(next | current = state).

    For a map node, its hop-distance window W (radius m, the node itself
    included) shares neighbor_mass uniformly; every other state, the lost
    state included, shares far_mass uniformly.  Clipped windows at chain
    ends renormalize over |W|.  With no states outside W (tiny map, no
    lost state) all mass goes uniformly to W.  From the lost state the
    row is uniform over all states.  Rows sum to 1 exactly; the residual
    lands on the last entry.
    """
    n = topo_map.node_count
    ns = state_count(topo_map, config)
    if ns == 0:
        raise ValueError("empty map has no transition model")
    row = np.zeros(ns, dtype=np.float64)
    if state == LOST_STATE:
        if not config.lost_state_enabled:
            raise ValueError("lost state is disabled for this configuration")
        row[:] = 1.0 / ns
    else:
        if not 0 <= state < n:
            raise ValueError(f"state {state} is not a valid node id (n={n})")
        window = topo_map.nodes_within(state, config.m)
        outside = ns - len(window)
        if outside == 0:
            row[window] = 1.0 / len(window)
        else:
            row[:] = config.far_mass / outside
            row[window] = config.neighbor_mass / len(window)
    row[-1] += 1.0 - row.sum()
    return row


def predict(
    posterior: np.ndarray, topo_map: TopoMap, config: LocalizationConfig
) -> np.ndarray:
    """Time-evolution step: push the posterior through the transition model."""
    ns = state_count(topo_map, config)
    posterior = _check_posterior(posterior, ns)
    out = np.zeros(ns, dtype=np.float64)
    for j in range(topo_map.node_count):
        out += posterior[j] * transition_row(topo_map, j, config)
    if config.lost_state_enabled:
        out += posterior[ns - 1] * transition_row(topo_map, LOST_STATE, config)
    return out


def node_score(query: QueryNode | Sequence[Frame], node: Node) -> float:
    """Mean over query frames of the max similarity to any node frame."""
    frames = query.frames if isinstance(query, QueryNode) else list(query)
    if not frames:
        raise ValueError("node_score needs a non-empty query")
    if not node.frame_ids:
        raise ValueError("node_score needs a non-empty node")
    query_matrix = np.stack([f.descriptor for f in frames]).astype(np.float64)
    node_matrix = node.matrix().astype(np.float64)
    sims = query_matrix @ node_matrix.T
    return float(sims.max(axis=1).mean())


def apply_top_k_floor(scores: np.ndarray, top_k: int, floor: float) -> np.ndarray:
    """Keep the top_k largest scores verbatim, set the rest to floor.

    Ties at the k-th value keep the lower index.  With top_k >= len the
    scores pass through unchanged.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = len(scores)
    if top_k >= n:
        return scores.copy()
    # lexsort sorts by the last key first: descending score, then ascending id
    order = np.lexsort((np.arange(n), -scores))
    out = np.full(n, float(floor), dtype=np.float64)
    keep = order[:top_k]
    out[keep] = scores[keep]
    return out


def likelihood(
    query: QueryNode | Sequence[Frame], topo_map: TopoMap, config: LocalizationConfig
) -> np.ndarray:
    """Measurement vector: top-k node scores kept, everything else floored.

    Node scores are computed in fixed node-id order so the result is
    independent of any evaluation scheduling.  The lost state always
    receives the floor.
    """
    if topo_map.node_count == 0:
        raise ValueError("cannot compute a likelihood against an empty map")
    scores = np.array(
        [node_score(query, node) for node in topo_map.nodes], dtype=np.float64
    )
    values = apply_top_k_floor(scores, config.top_k, config.likelihood_floor)
    if config.lost_state_enabled:
        values = np.append(values, config.likelihood_floor)
    return values


def update(posterior: np.ndarray, likelihood_values: np.ndarray) -> np.ndarray:
    """Measurement step: element-wise product, renormalized to sum 1.

    Likelihood entries must be non-negative; a likelihood that wipes out
    all posterior mass raises FilterCollapseError (impossible while
    likelihood_floor > 0).
    """
    posterior = np.asarray(posterior, dtype=np.float64)
    likelihood_values = np.asarray(likelihood_values, dtype=np.float64)
    if posterior.shape != likelihood_values.shape:
        raise ValueError(
            f"posterior shape {posterior.shape} does not match "
            f"likelihood shape {likelihood_values.shape}"
        )
    if np.any(likelihood_values < 0.0):
        raise FilterCollapseError("likelihood entries must be non-negative")
    product = posterior * likelihood_values
    total = float(product.sum())
    if total <= 0.0:
        raise FilterCollapseError("update removed all posterior mass")
    return product / total


def check_acceptance(
    posterior: np.ndarray, topo_map: TopoMap, config: LocalizationConfig
) -> LocalizationDecision | None:
    """Accept when some node's window mass strictly exceeds the threshold.

    Window mass of node i sums the posterior over nodes within hop
    distance m of i; the lost state never counts.  Ties (best window, and
    best state inside it) break toward the lowest node id.  The returned
    decision carries a placeholder query_node_index of -1; the sequence
    driver fills in the real one.
    """
    ns = state_count(topo_map, config)
    posterior = _check_posterior(posterior, ns)
    n = topo_map.node_count
    if n == 0:
        raise ValueError("cannot check acceptance against an empty map")
    masses = np.empty(n, dtype=np.float64)
    for i in range(n):
        masses[i] = posterior[topo_map.nodes_within(i, config.m)].sum()
    best_window = int(np.argmax(masses))
    mass = float(masses[best_window])
    if mass <= config.accept_threshold:
        return None
    window = topo_map.nodes_within(best_window, config.m)
    best_state = int(window[np.argmax(posterior[window])])
    return LocalizationDecision(
        query_node_index=-1,
        query_frame_ids=(),
        map_node_id=best_state,
        window_mass=mass,
        posterior_snapshot=posterior.copy(),
    )


class QueryNodeBuilder:
    """Groups a frame stream into query nodes with the mapping gates.

    Runs the same skip/match state machine as map construction, but a
    pending group completes as soon as it reaches ``size`` frames; a
    failed match discards the pending partial group, and the triggering
    frame seeds the next one.
    """

    def __init__(self, gating: MappingConfig, size: int, oracle: MatchBackend) -> None:
        if size < 1:
            raise ValueError(f"query node size must be at least 1, got {size}")
        self.gating = gating
        self.size = size
        self.oracle = oracle
        self._pending: list[Frame] = []
        self._skip_counter = 0

    def feed(self, frame: Frame) -> list[Frame] | None:
        """Advance by one frame; return a completed query node, if any."""
        if not self._pending:
            self._pending.append(frame)
            return self._emit_if_complete()
        anchor = self._pending[-1]
        sim = similarity(frame.descriptor, anchor.descriptor)
        if sim > self.gating.skip_similarity and self._skip_counter < self.gating.max_skips:
            self._skip_counter += 1
            return None
        count = self.oracle.match_count(frame.frame_id, anchor.frame_id)
        if count > self.gating.min_matches:
            self._pending.append(frame)
            self._skip_counter = 0
            return self._emit_if_complete()
        # failed match: drop the pending partial group, reseed with this frame
        self._pending = [frame]
        self._skip_counter = 0
        return self._emit_if_complete()

    def _emit_if_complete(self) -> list[Frame] | None:
        if len(self._pending) == self.size:
            completed = self._pending
            self._pending = []
            self._skip_counter = 0
            return completed
        return None


class SequentialLocalizer:
    """Feeds frames through query-node building and the Bayes filter."""

    def __init__(
        self,
        topo_map: TopoMap,
        config: LocalizationConfig,
        oracle: MatchBackend,
        gating: MappingConfig | None = None,
    ) -> None:
        if topo_map.node_count == 0:
            raise ValueError("cannot localize against an empty map")
        self.topo_map = topo_map
        self.config = config
        self._builder = QueryNodeBuilder(
            gating if gating is not None else topo_map.config,
            config.query_node_size,
            oracle,
        )
        self.posterior = uniform_posterior(topo_map, config)
        self.decisions: list[LocalizationDecision] = []
        self.trace: list[np.ndarray] = []
        self.query_frame_ids: list[tuple[int, ...]] = []

    def feed(self, frame: Frame) -> LocalizationDecision | None:
        """Process one frame; run a filter iteration if it completes a node."""
        completed = self._builder.feed(frame)
        if completed is None:
            return None
        return self._iterate(completed)

    def _iterate(self, frames: list[Frame]) -> LocalizationDecision | None:
        index = len(self.query_frame_ids)
        frame_ids = tuple(f.frame_id for f in frames)
        self.query_frame_ids.append(frame_ids)
        predicted = predict(self.posterior, self.topo_map, self.config)
        values = likelihood(frames, self.topo_map, self.config)
        self.posterior = update(predicted, values)
        self.trace.append(self.posterior.copy())
        decision = check_acceptance(self.posterior, self.topo_map, self.config)
        if decision is None:
            return None
        decision = replace(
            decision, query_node_index=index, query_frame_ids=frame_ids
        )
        self.decisions.append(decision)
        return decision


@dataclass
class LocalizationRun:
    """Everything a localization pass produced."""

    decisions: list[LocalizationDecision]
    trace: list[np.ndarray]
    query_frame_ids: list[tuple[int, ...]]
    final_posterior: np.ndarray
    frame_seconds: list[float]


def localize_sequence(
    frames: DescriptorSet | Iterable[Frame],
    topo_map: TopoMap,
    config: LocalizationConfig,
    oracle: MatchBackend,
    gating: MappingConfig | None = None,
) -> LocalizationRun:
    """Run the filter over a whole stream.

    Query nodes are gated with the map's own mapping config unless an
    explicit ``gating`` override is given.  The posterior starts uniform,
    carries over between iterations, and is never reset by acceptance.
    An incomplete trailing query node is dropped.  The trace holds the
    posterior after every update, one entry per completed query node.
    """
    localizer = SequentialLocalizer(topo_map, config, oracle, gating)
    frame_seconds: list[float] = []
    for frame in frames:
        started = time.perf_counter()
        localizer.feed(frame)
        frame_seconds.append(time.perf_counter() - started)
    return LocalizationRun(
        decisions=localizer.decisions,
        trace=localizer.trace,
        query_frame_ids=localizer.query_frame_ids,
        final_posterior=localizer.posterior,
        frame_seconds=frame_seconds,
    )


@dataclass
class DecisionsFile:
    """In-memory form of a decisions file."""

    config: LocalizationConfig
    decisions: list[LocalizationDecision]
    trace: list[tuple[int, np.ndarray]] | None


def save_decisions(
    path: str | Path,
    config: LocalizationConfig,
    decisions: Sequence[LocalizationDecision],
    trace: Sequence[np.ndarray] | Sequence[tuple[int, np.ndarray]] | None = None,
) -> None:
    """Write a decisions file; pass a trace only when its bulk is wanted."""
    document: dict = {
        "format": DECISIONS_FORMAT,
        "config": config.to_dict(),
        "decisions": [
            {
                "query_node_index": d.query_node_index,
                "query_frame_ids": list(d.query_frame_ids),
                "map_node_id": d.map_node_id,
                "window_mass": d.window_mass,
            }
            for d in decisions
        ],
    }
    if trace is not None:
        rows = []
        for index, entry in enumerate(trace):
            if isinstance(entry, tuple):
                index, posterior = entry
            else:
                posterior = entry
            rows.append(
                {
                    "query_node_index": int(index),
                    "posterior": [float(x) for x in posterior],
                }
            )
        document["trace"] = rows
    Path(path).write_text(json.dumps(document, separators=(",", ":")) + "\n")


def _expect(condition: bool, where: str, message: str) -> None:
    if not condition:
        raise DecisionsFormatError(f"{where}: {message}")


def load_decisions(path: str | Path) -> DecisionsFile:
    """Parse and validate a decisions file written by save_decisions."""
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DecisionsFormatError(f"{path}: not valid JSON: {exc}") from None
    where = str(path)
    _expect(isinstance(document, dict), where, "top level must be an object")
    _expect(
        document.get("format") == DECISIONS_FORMAT,
        where,
        f"format must be {DECISIONS_FORMAT!r}, got {document.get('format')!r}",
    )
    _expect(isinstance(document.get("config"), dict), where, "config must be an object")
    config = LocalizationConfig.from_dict(document["config"])
    raw_decisions = document.get("decisions")
    _expect(isinstance(raw_decisions, list), where, "decisions must be a list")
    decisions: list[LocalizationDecision] = []
    for index, raw in enumerate(raw_decisions):
        entry_where = f"{where}: decisions[{index}]"
        _expect(isinstance(raw, dict), entry_where, "must be an object")
        _expect(
            isinstance(raw.get("query_node_index"), int),
            entry_where,
            "query_node_index must be an integer",
        )
        _expect(
            isinstance(raw.get("query_frame_ids"), list)
            and all(isinstance(x, int) for x in raw["query_frame_ids"]),
            entry_where,
            "query_frame_ids must be a list of integers",
        )
        _expect(
            isinstance(raw.get("map_node_id"), int),
            entry_where,
            "map_node_id must be an integer",
        )
        _expect(
            isinstance(raw.get("window_mass"), (int, float)),
            entry_where,
            "window_mass must be a number",
        )
        decisions.append(
            LocalizationDecision(
                query_node_index=raw["query_node_index"],
                query_frame_ids=tuple(raw["query_frame_ids"]),
                map_node_id=raw["map_node_id"],
                window_mass=float(raw["window_mass"]),
                posterior_snapshot=None,
            )
        )
    trace: list[tuple[int, np.ndarray]] | None = None
    if "trace" in document:
        raw_trace = document["trace"]
        _expect(isinstance(raw_trace, list), where, "trace must be a list")
        trace = []
        for index, raw in enumerate(raw_trace):
            entry_where = f"{where}: trace[{index}]"
            _expect(isinstance(raw, dict), entry_where, "must be an object")
            _expect(
                isinstance(raw.get("query_node_index"), int),
                entry_where,
                "query_node_index must be an integer",
            )
            _expect(
                isinstance(raw.get("posterior"), list)
                and all(isinstance(x, (int, float)) for x in raw["posterior"]),
                entry_where,
                "posterior must be a list of numbers",
            )
            trace.append(
                (
                    raw["query_node_index"],
                    np.asarray(raw["posterior"], dtype=np.float64),
                )
            )
    return DecisionsFile(config=config, decisions=decisions, trace=trace)
