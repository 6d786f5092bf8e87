"""Localize a second traversal against the map built from the first.

Query frames are grouped into small query nodes by the same gating rules
the mapper uses, so one belief update consumes one coherent clump of
frames.  A discrete Bayes filter over the map nodes (plus a lost state)
alternates motion prediction along the chain with a similarity-derived
likelihood, and a decision is accepted only when a three-node window
holds more than the acceptance threshold of posterior mass.

Run from the repository root after an editable install:

    python3 demos/demo_localize.py
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from colonmap import (
    LocalizationConfig,
    MappingConfig,
    SessionParams,
    SyntheticMatchParams,
    SyntheticMatcher,
    WorldParams,
    build_map,
    generate_session,
    generate_world,
    localize_sequence,
    save_decisions,
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
    print(f"map from survey session: {topo_map.node_count} nodes")

    config = LocalizationConfig()
    print(
        f"filter: window radius {config.m}, accept above "
        f"{config.accept_threshold} window mass, top-{config.top_k} "
        f"likelihood with floor {config.likelihood_floor}, lost state on"
    )

    run = localize_sequence(
        revisit, topo_map, config, SyntheticMatcher(params, revisit)
    )
    print(
        f"revisit session: {len(revisit)} frames -> "
        f"{len(run.query_frame_ids)} query nodes -> "
        f"{len(run.decisions)} accepted decisions"
    )

    for decision in run.decisions:
        frames = decision.query_frame_ids
        queried = revisit_truth.place_of(frames[0])
        mapped = survey_truth.place_of(
            topo_map.nodes[decision.map_node_id].frame_ids[0]
        )
        tag = "match" if queried == mapped else "DIFFERS"
        print(
            f"  query node {decision.query_node_index:3d} "
            f"(frames {frames[0]}..{frames[-1]}, place {queried}) -> "
            f"map node {decision.map_node_id:2d} (place {mapped}) "
            f"mass {decision.window_mass:.3f} [{tag}]"
        )

    # The posterior is never reset between query nodes; its final state
    # shows where the filter believes the camera ended up.
    final = run.final_posterior
    print(
        f"final posterior: argmax node {int(np.argmax(final[:-1]))} "
        f"({final.max():.3f}), lost mass {final[-1]:.3e}"
    )

    path = OUTPUT / "revisit.decisions.json"
    save_decisions(path, config, run.decisions, run.trace)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
