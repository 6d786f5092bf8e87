"""Build a topological map from a descriptor stream, one frame at a time.

The mapper is a small state machine over a growing proto-node: frames
nearly identical to the newest kept frame are skipped, frames that still
match are appended, and the first frame that fails the match test closes
the proto-node.  Closed proto-nodes with enough images become map nodes
chained to their predecessor; smaller ones are discarded without
breaking the chain.

Run from the repository root after an editable install:

    python3 demos/demo_build_map.py
"""

from __future__ import annotations

from collections import Counter
from pathlib import Path

from colonmap import (
    MappingConfig,
    SessionParams,
    SyntheticMatchParams,
    SyntheticMatcher,
    TopoMapper,
    WorldParams,
    generate_session,
    generate_world,
    save_map,
)

OUTPUT = Path(__file__).resolve().parent / "output"


def main() -> None:
    OUTPUT.mkdir(exist_ok=True)

    world = generate_world(WorldParams(n_places=12, n_regions=3, seed=7))
    stream, truth = generate_session(world, SessionParams(seed=8))
    print(f"survey session: {len(stream)} frames over {world.n_places} places")

    # The synthetic matcher plays the role of a feature-matching backend:
    # it converts descriptor similarity into a plausible match count.
    oracle = SyntheticMatcher(SyntheticMatchParams(seed=7), stream)
    config = MappingConfig()
    print(
        f"gates: skip above {config.skip_similarity} similarity "
        f"(budget {config.max_skips}), append above {config.min_matches} "
        f"matches, keep nodes with >= {config.min_node_images} images"
    )

    mapper = TopoMapper(config, oracle)
    insertions = []
    for frame in stream:
        event = mapper.process_frame(frame)
        if event.kind == "node_inserted":
            insertions.append((frame.frame_id, event.node_id))
    topo_map = mapper.finalize()

    for trigger_id, node_id in insertions:
        node = topo_map.nodes[node_id]
        place = truth.place_of(node.frame_ids[0])
        print(
            f"  frame {trigger_id:4d} closed node {node_id:2d} "
            f"({len(node)} images, starts at place {place})"
        )

    census = Counter(e.kind for e in mapper.events)
    print(f"event census: {dict(sorted(census.items()))}")
    print(f"map: {topo_map.node_count} nodes, {len(topo_map.edges)} edges")
    print(f"node sizes: {[len(n) for n in topo_map.nodes]}")

    # Consecutive nodes are linked even when a discard fell between them,
    # so the map is always a single chain.
    assert topo_map.edges == [(k, k + 1) for k in range(topo_map.node_count - 1)]
    print("edges form one unbroken chain")

    # Hop distance along the chain is what the localizer's motion model
    # uses; nodes_within(j, m) is the neighborhood it spreads mass over.
    mid = topo_map.node_count // 2
    print(f"nodes within 2 hops of node {mid}: {topo_map.nodes_within(mid, 2)}")

    path = OUTPUT / "survey.map.json"
    save_map(topo_map, path)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
