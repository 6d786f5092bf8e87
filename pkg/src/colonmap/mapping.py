"""Sequential topological map construction.

Frames stream in one at a time and accumulate into a proto-node, a place
hypothesis that has not been committed to the map yet.  Near-duplicate
frames are skipped by descriptor similarity (with a bounded skip budget),
frames that still match the proto-node's last added frame join it, and a
frame that fails the match test closes the proto-node: if it collected
enough images it becomes the next map node, chained to its predecessor,
otherwise its frames are dropped as non-distinctive (walls, blur).  The
result is a simple chain of nodes, each a set of frames observing one
place.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .descriptors import DESCRIPTOR_DIM, DescriptorSet, Frame, as_descriptor, similarity
from .errors import ColonmapDataError
from .matching import MatchBackend

MAP_FORMAT = "colonmap-v1"

EVENT_FRAME_ADDED = "frame_added"
EVENT_FRAME_SKIPPED = "frame_skipped"
EVENT_NODE_INSERTED = "node_inserted"
EVENT_PROTO_DISCARDED = "proto_discarded"


class MapFormatError(ColonmapDataError, ValueError):
    """A map file or map structure violates the map schema."""


class EventLogError(ColonmapDataError, ValueError):
    """An event log cannot be replayed against the given frames."""


@dataclass(frozen=True)
class MappingConfig:
    """Thresholds of the node-creation state machine."""

    skip_similarity: float = 0.95
    max_skips: int = 5
    min_matches: int = 100
    min_node_images: int = 3

    def __post_init__(self) -> None:
        if not 0.0 < self.skip_similarity <= 1.0:
            raise ValueError(
                f"skip_similarity must be in (0, 1], got {self.skip_similarity}"
            )
        if self.max_skips < 0:
            raise ValueError(f"max_skips must be non-negative, got {self.max_skips}")
        if self.min_matches < 0:
            raise ValueError(f"min_matches must be non-negative, got {self.min_matches}")
        if self.min_node_images < 1:
            raise ValueError(
                f"min_node_images must be at least 1, got {self.min_node_images}"
            )

    def to_dict(self) -> dict:
        return {
            "skip_similarity": self.skip_similarity,
            "max_skips": self.max_skips,
            "min_matches": self.min_matches,
            "min_node_images": self.min_node_images,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MappingConfig":
        try:
            return cls(
                skip_similarity=float(data["skip_similarity"]),
                max_skips=int(data["max_skips"]),
                min_matches=int(data["min_matches"]),
                min_node_images=int(data["min_node_images"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MapFormatError(f"invalid mapping config: {exc}") from None


@dataclass(frozen=True)
class MappingEvent:
    """One step of the mapper, sufficient to replay map construction.

    kind is one of the EVENT_* constants.  frame_id is the incoming frame
    (None for the end-of-stream finalization events), node_id is set on
    node_inserted events, and reason is free-form explanatory text.
    """

    kind: str
    frame_id: int | None
    node_id: int | None = None
    reason: str = ""


@dataclass
class Node:
    """A committed map node: the frames observing one place."""

    node_id: int
    frame_ids: list[int]
    descriptors: list[np.ndarray]

    def __post_init__(self) -> None:
        if len(self.frame_ids) != len(self.descriptors):
            raise MapFormatError(
                f"node {self.node_id}: {len(self.frame_ids)} frame ids for "
                f"{len(self.descriptors)} descriptors"
            )
        if not self.frame_ids:
            raise MapFormatError(f"node {self.node_id} has no frames")
        self.descriptors = [as_descriptor(d) for d in self.descriptors]

    def __len__(self) -> int:
        return len(self.frame_ids)

    def matrix(self) -> np.ndarray:
        """Node descriptors stacked as a (len, 512) float32 array."""
        return np.stack(self.descriptors)


@dataclass
class TopoMap:
    """An immutable topological map: nodes plus traversability edges.

    The config the map was built with rides along; the localizer reuses
    it to gate query-node construction the same way.
    """

    nodes: list[Node]
    edges: list[tuple[int, int]]
    config: MappingConfig
    _window_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        for index, node in enumerate(self.nodes):
            if node.node_id != index:
                raise MapFormatError(
                    f"nodes[{index}]: node ids must be dense 0..n-1, got {node.node_id}"
                )
        seen: set[int] = set()
        for node in self.nodes:
            for frame_id in node.frame_ids:
                if frame_id in seen:
                    raise MapFormatError(
                        f"frame {frame_id} belongs to more than one node"
                    )
                seen.add(frame_id)
        n = len(self.nodes)
        canonical = []
        for a, b in self.edges:
            if not (0 <= a < n and 0 <= b < n):
                raise MapFormatError(f"edge ({a}, {b}) references a missing node")
            if a == b:
                raise MapFormatError(f"edge ({a}, {b}) is a self-loop")
            canonical.append((a, b) if a < b else (b, a))
        if len(set(canonical)) != len(canonical):
            raise MapFormatError("duplicate edges in map")
        self.edges = sorted(canonical)

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def _adjacency(self) -> list[list[int]]:
        cached = self._window_cache.get("adjacency")
        if cached is None:
            cached = [[] for _ in self.nodes]
            for a, b in self.edges:
                cached[a].append(b)
                cached[b].append(a)
            for neighbors in cached:
                neighbors.sort()
            self._window_cache["adjacency"] = cached
        return cached

    def _distances_from(self, start: int) -> list[float]:
        """BFS hop distances from start to every node (inf if unreachable)."""
        key = ("dist", start)
        cached = self._window_cache.get(key)
        if cached is None:
            adjacency = self._adjacency()
            cached = [float("inf")] * self.node_count
            cached[start] = 0
            queue = deque([start])
            while queue:
                here = queue.popleft()
                for neighbor in adjacency[here]:
                    if cached[neighbor] == float("inf"):
                        cached[neighbor] = cached[here] + 1
                        queue.append(neighbor)
            self._window_cache[key] = cached
        return cached

    def hop_distance(self, i: int, j: int) -> int | float:
        """Shortest-path edge count between nodes, inf when disconnected."""
        n = self.node_count
        if not (0 <= i < n and 0 <= j < n):
            raise MapFormatError(f"hop_distance: unknown node id in ({i}, {j})")
        distance = self._distances_from(i)[j]
        return distance if distance == float("inf") else int(distance)

    def nodes_within(self, i: int, radius: int) -> np.ndarray:
        """Sorted ids of nodes at hop distance <= radius from i (incl. i)."""
        key = ("window", i, radius)
        cached = self._window_cache.get(key)
        if cached is None:
            distances = self._distances_from(i)
            cached = np.array(
                [j for j, d in enumerate(distances) if d <= radius], dtype=np.intp
            )
            self._window_cache[key] = cached
        return cached


@dataclass
class _ProtoNode:
    frames: list[Frame] = field(default_factory=list)
    skip_counter: int = 0


class TopoMapper:
    """Sequential state machine turning a frame stream into a TopoMap."""

    def __init__(self, config: MappingConfig, oracle: MatchBackend) -> None:
        self.config = config
        self.oracle = oracle
        self.events: list[MappingEvent] = []
        self._nodes: list[Node] = []
        self._edges: list[tuple[int, int]] = []
        self._proto = _ProtoNode()
        self._map: TopoMap | None = None

    def process_frame(self, frame: Frame) -> MappingEvent:
        """Advance the state machine by one frame and return the event.

        Branches, in order: seed an empty proto-node; skip a near-duplicate
        while the skip budget lasts; append a still-matching frame; or
        close the proto-node (insert or discard) and seed the next one with
        the incoming frame.
        """
        if self._map is not None:
            raise RuntimeError("mapper already finalized")
        config = self.config
        if not self._proto.frames:
            self._proto.frames.append(frame)
            event = MappingEvent(
                EVENT_FRAME_ADDED, frame.frame_id, reason="seeds a new proto-node"
            )
            self.events.append(event)
            return event
        anchor = self._proto.frames[-1]
        sim = similarity(frame.descriptor, anchor.descriptor)
        if sim > config.skip_similarity and self._proto.skip_counter < config.max_skips:
            self._proto.skip_counter += 1
            event = MappingEvent(
                EVENT_FRAME_SKIPPED,
                frame.frame_id,
                reason=(
                    f"similarity {sim:.4f} to frame {anchor.frame_id} exceeds "
                    f"{config.skip_similarity} (skip {self._proto.skip_counter}"
                    f"/{config.max_skips})"
                ),
            )
            self.events.append(event)
            return event
        count = self.oracle.match_count(frame.frame_id, anchor.frame_id)
        if count > config.min_matches:
            self._proto.frames.append(frame)
            self._proto.skip_counter = 0
            event = MappingEvent(
                EVENT_FRAME_ADDED,
                frame.frame_id,
                reason=f"{count} matches to frame {anchor.frame_id}",
            )
            self.events.append(event)
            return event
        event = self._close_proto(frame, count)
        self.events.append(event)
        return event

    def _close_proto(self, seed: Frame | None, count: int | None) -> MappingEvent:
        """Insert or discard the pending proto-node, then reseed it."""
        config = self.config
        proto_frames = self._proto.frames
        trigger = (
            "end of stream"
            if count is None
            else f"only {count} matches to frame {proto_frames[-1].frame_id}"
        )
        if len(proto_frames) >= config.min_node_images:
            node_id = len(self._nodes)
            node = Node(
                node_id,
                [f.frame_id for f in proto_frames],
                [f.descriptor for f in proto_frames],
            )
            self._nodes.append(node)
            if node_id > 0:
                self._edges.append((node_id - 1, node_id))
            event = MappingEvent(
                EVENT_NODE_INSERTED,
                seed.frame_id if seed is not None else None,
                node_id=node_id,
                reason=f"{trigger}; inserted node with {len(proto_frames)} frames",
            )
        else:
            event = MappingEvent(
                EVENT_PROTO_DISCARDED,
                seed.frame_id if seed is not None else None,
                reason=(
                    f"{trigger}; proto-node of {len(proto_frames)} frames is below "
                    f"the {config.min_node_images}-image minimum"
                ),
            )
        self._proto = _ProtoNode()
        if seed is not None:
            self._proto.frames.append(seed)
        return event

    def finalize(self) -> TopoMap:
        """Close the pending proto-node through the size gate; idempotent."""
        if self._map is None:
            if self._proto.frames:
                self.events.append(self._close_proto(None, None))
            self._map = TopoMap(self._nodes, self._edges, self.config)
        return self._map


def build_map(
    frames: DescriptorSet | Iterable[Frame],
    config: MappingConfig,
    oracle: MatchBackend,
) -> tuple[TopoMap, list[MappingEvent]]:
    """Fold the whole stream through a TopoMapper and finalize."""
    mapper = TopoMapper(config, oracle)
    for frame in frames:
        mapper.process_frame(frame)
    return mapper.finalize(), mapper.events


def replay_events(
    events: Sequence[MappingEvent],
    frames: DescriptorSet | Iterable[Frame],
    config: MappingConfig,
) -> TopoMap:
    """Reconstruct the TopoMap an event log describes.

    Only the log's structure is used; descriptors are looked up in the
    original frame stream.  Raises EventLogError when the log references
    unknown frames or is internally inconsistent.
    """
    by_id = {frame.frame_id: frame for frame in frames}

    def lookup(frame_id: int) -> Frame:
        try:
            return by_id[frame_id]
        except KeyError:
            raise EventLogError(f"event log references unknown frame {frame_id}") from None

    nodes: list[Node] = []
    edges: list[tuple[int, int]] = []
    pending: list[Frame] = []
    for event in events:
        if event.kind == EVENT_FRAME_ADDED:
            pending.append(lookup(event.frame_id))
        elif event.kind == EVENT_FRAME_SKIPPED:
            pass
        elif event.kind in (EVENT_NODE_INSERTED, EVENT_PROTO_DISCARDED):
            if event.kind == EVENT_NODE_INSERTED:
                if event.node_id != len(nodes):
                    raise EventLogError(
                        f"node_inserted out of order: got id {event.node_id}, "
                        f"expected {len(nodes)}"
                    )
                node = Node(
                    event.node_id,
                    [f.frame_id for f in pending],
                    [f.descriptor for f in pending],
                )
                nodes.append(node)
                if event.node_id > 0:
                    edges.append((event.node_id - 1, event.node_id))
            pending = [] if event.frame_id is None else [lookup(event.frame_id)]
        else:
            raise EventLogError(f"unknown event kind {event.kind!r}")
    return TopoMap(nodes, edges, config)


def save_map(topo_map: TopoMap, path: str | Path) -> None:
    """Serialize a map as JSON; numbers round-trip 32-bit reals exactly."""
    document = {
        "format": MAP_FORMAT,
        "config": topo_map.config.to_dict(),
        "nodes": [
            {
                "id": node.node_id,
                "frames": [
                    {
                        "frame_id": frame_id,
                        # float32 -> float64 repr is exact, so json round trips
                        "descriptor": [float(x) for x in descriptor],
                    }
                    for frame_id, descriptor in zip(node.frame_ids, node.descriptors)
                ],
            }
            for node in topo_map.nodes
        ],
        "edges": [[a, b] for a, b in topo_map.edges],
    }
    Path(path).write_text(json.dumps(document, separators=(",", ":")) + "\n")


def _expect(condition: bool, where: str, message: str) -> None:
    if not condition:
        raise MapFormatError(f"{where}: {message}")


def load_map(path: str | Path) -> TopoMap:
    """Parse and validate a map file written by save_map.

    Schema violations raise MapFormatError naming the offending location
    inside the document.
    """
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise MapFormatError(f"{path}: not valid JSON: {exc}") from None
    where = str(path)
    _expect(isinstance(document, dict), where, "top level must be an object")
    _expect(
        document.get("format") == MAP_FORMAT,
        where,
        f"format must be {MAP_FORMAT!r}, got {document.get('format')!r}",
    )
    _expect(isinstance(document.get("config"), dict), where, "config must be an object")
    config = MappingConfig.from_dict(document["config"])
    raw_nodes = document.get("nodes")
    _expect(isinstance(raw_nodes, list), where, "nodes must be a list")
    nodes: list[Node] = []
    for index, raw_node in enumerate(raw_nodes):
        node_where = f"{where}: nodes[{index}]"
        _expect(isinstance(raw_node, dict), node_where, "must be an object")
        _expect(
            isinstance(raw_node.get("id"), int) and raw_node["id"] == index,
            node_where,
            f"id must be {index}, got {raw_node.get('id')!r}",
        )
        raw_frames = raw_node.get("frames")
        _expect(
            isinstance(raw_frames, list) and raw_frames,
            node_where,
            "frames must be a non-empty list",
        )
        frame_ids: list[int] = []
        descriptors: list[np.ndarray] = []
        for findex, raw_frame in enumerate(raw_frames):
            frame_where = f"{node_where}.frames[{findex}]"
            _expect(isinstance(raw_frame, dict), frame_where, "must be an object")
            frame_id = raw_frame.get("frame_id")
            _expect(
                isinstance(frame_id, int) and frame_id >= 0,
                frame_where,
                f"frame_id must be a non-negative integer, got {frame_id!r}",
            )
            vector = raw_frame.get("descriptor")
            _expect(
                isinstance(vector, list) and len(vector) == DESCRIPTOR_DIM,
                frame_where,
                f"descriptor must be a list of {DESCRIPTOR_DIM} numbers",
            )
            _expect(
                all(isinstance(x, (int, float)) for x in vector),
                frame_where,
                "descriptor entries must be numbers",
            )
            frame_ids.append(frame_id)
            descriptors.append(np.asarray(vector, dtype=np.float32))
        nodes.append(Node(index, frame_ids, descriptors))
    raw_edges = document.get("edges")
    _expect(isinstance(raw_edges, list), where, "edges must be a list")
    edges: list[tuple[int, int]] = []
    for eindex, raw_edge in enumerate(raw_edges):
        edge_where = f"{where}: edges[{eindex}]"
        _expect(
            isinstance(raw_edge, list)
            and len(raw_edge) == 2
            and all(isinstance(x, int) for x in raw_edge),
            edge_where,
            f"must be a pair of node ids, got {raw_edge!r}",
        )
        edges.append((raw_edge[0], raw_edge[1]))
    try:
        return TopoMap(nodes, edges, config)
    except MapFormatError as exc:
        raise MapFormatError(f"{where}: {exc}") from None
