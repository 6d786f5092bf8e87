"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

from types import SimpleNamespace

import numpy as np
import pytest

from colonmap import (
    DESCRIPTOR_DIM,
    LocalizationConfig,
    MappingConfig,
    Node,
    SyntheticMatcher,
    SyntheticMatchParams,
    TopoMap,
    build_map,
    localize_sequence,
)
from colonmap.simulate import (
    SessionParams,
    WorldParams,
    generate_session,
    generate_world,
)


def unit_vector(rng: np.random.Generator, non_negative: bool = True) -> np.ndarray:
    """A random unit descriptor; non-negative by default like real features."""
    draw = rng.standard_normal(DESCRIPTOR_DIM)
    if non_negative:
        draw = np.maximum(draw, 0.0)
    norm = np.linalg.norm(draw)
    while norm < 1e-9:
        draw = np.abs(rng.standard_normal(DESCRIPTOR_DIM))
        norm = np.linalg.norm(draw)
    return (draw / norm).astype(np.float32)


def one_hot(index: int) -> np.ndarray:
    """Basis descriptor: exactly unit norm, orthogonal to other basis vectors."""
    vec = np.zeros(DESCRIPTOR_DIM, dtype=np.float32)
    vec[index] = 1.0
    return vec


def blend(weights: dict[int, float]) -> np.ndarray:
    """Unit vector with the given basis weights (caller keeps sum-of-squares 1)."""
    vec = np.zeros(DESCRIPTOR_DIM, dtype=np.float32)
    for index, weight in weights.items():
        vec[index] = weight
    return vec


def make_chain_map(
    n: int,
    rng: np.random.Generator,
    max_frames_per_node: int = 3,
) -> TopoMap:
    """A hand-built chain map with random descriptors for filter tests."""
    config = MappingConfig(min_node_images=1)
    nodes = []
    frame_id = 0
    for node_id in range(n):
        count = int(rng.integers(1, max_frames_per_node + 1))
        frame_ids = list(range(frame_id, frame_id + count))
        frame_id += count
        nodes.append(
            Node(node_id, frame_ids, [unit_vector(rng) for _ in frame_ids])
        )
    edges = [(k, k + 1) for k in range(n - 1)]
    return TopoMap(nodes, edges, config)


def dense_transition_matrix(
    n: int, m: int, neighbor_mass: float, far_mass: float, lost: bool
) -> np.ndarray:
    """Brute-force transition matrix for a chain, from |i - j| arithmetic.

    Independent oracle: no graph search, no shared code with the package.
    Row j spreads neighbor_mass over chain positions within m of j and
    far_mass over everything else (lost state last when enabled).
    """
    ns = n + (1 if lost else 0)
    matrix = np.zeros((ns, ns), dtype=np.float64)
    for j in range(n):
        window = [i for i in range(n) if abs(i - j) <= m]
        rest = ns - len(window)
        if rest == 0:
            for i in window:
                matrix[j, i] = 1.0 / len(window)
            continue
        for i in range(ns):
            matrix[j, i] = far_mass / rest
        for i in window:
            matrix[j, i] = neighbor_mass / len(window)
    if lost:
        matrix[n, :] = 1.0 / ns
    return matrix


CANONICAL_WORLD_SEED = 42
CANONICAL_MAP_SESSION_SEED = 43
CANONICAL_QUERY_SESSION_SEED = 44


@pytest.fixture(scope="session")
def canonical() -> SimpleNamespace:
    """The seed-42 end-to-end pipeline, built once per test session."""
    world = generate_world(WorldParams(seed=CANONICAL_WORLD_SEED))
    map_stream, map_truth = generate_session(
        world, SessionParams(seed=CANONICAL_MAP_SESSION_SEED)
    )
    query_stream, query_truth = generate_session(
        world, SessionParams(seed=CANONICAL_QUERY_SESSION_SEED)
    )
    match_params = SyntheticMatchParams(seed=CANONICAL_WORLD_SEED)
    topo_map, events = build_map(
        map_stream, MappingConfig(), SyntheticMatcher(match_params, map_stream)
    )
    loc_config = LocalizationConfig()
    run = localize_sequence(
        query_stream,
        topo_map,
        loc_config,
        SyntheticMatcher(match_params, query_stream),
    )
    return SimpleNamespace(
        world=world,
        map_stream=map_stream,
        map_truth=map_truth,
        query_stream=query_stream,
        query_truth=query_truth,
        match_params=match_params,
        topo_map=topo_map,
        events=events,
        map_config=topo_map.config,
        loc_config=loc_config,
        run=run,
    )
