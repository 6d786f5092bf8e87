"""Generate a synthetic survey world and record two traversal sessions.

The simulator stands in for a camera and descriptor network: it invents a
fixed sequence of places, each with a unit descriptor anchor, then walks
the sequence emitting noisy per-frame descriptors plus occasional
featureless wall frames.  Two sessions over the same world differ in
noise draws and dwell times, which is exactly the repeat-visit setting
the mapper and localizer are built for.

Run from the repository root after an editable install:

    python3 demos/demo_simulate.py
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from colonmap import (
    SessionParams,
    WorldParams,
    generate_session,
    generate_world,
    save_descriptors,
    save_truth,
    similarity,
)

OUTPUT = Path(__file__).resolve().parent / "output"


def main() -> None:
    OUTPUT.mkdir(exist_ok=True)

    # A compact world keeps the printout readable: 12 places in 3 regions.
    world = generate_world(WorldParams(n_places=12, n_regions=3, seed=7))
    n_regions = len(set(world.regions))
    print(f"world: {world.n_places} places, {n_regions} regions")

    # Anchors are unit vectors with non-negative entries, kept apart by a
    # separation cap so distinct places stay distinguishable.
    anchors = np.asarray(world.latents, dtype=np.float64)
    sims = anchors @ anchors.T
    np.fill_diagonal(sims, 0.0)
    print(f"max pairwise anchor similarity: {sims.max():.4f} (cap 0.5)")
    for place in range(world.n_places):
        print(f"  place {place:2d} -> region {world.region_of(place)}")

    # Each session walks places 0..11 in order, dwelling a random number
    # of frames at each and emitting wall frames between places.
    for name, seed in (("survey", 8), ("revisit", 9)):
        stream, truth = generate_session(world, SessionParams(seed=seed))
        walls = sum(1 for f in stream if truth.place_of(f.frame_id) is None)
        print(
            f"{name}: {len(stream)} frames, {walls} wall frames, "
            f"ids {stream.frame_ids()[0]}..{stream.frame_ids()[-1]}"
        )
        save_descriptors(stream, OUTPUT / f"{name}.cmd1")
        save_truth(truth, OUTPUT / f"{name}.truth.json")

        # Within one dwell the frames stay close to the anchor; across
        # places they do not.  Show that on the first two places.
        first = [f for f in stream if truth.place_of(f.frame_id) == 0]
        second = [f for f in stream if truth.place_of(f.frame_id) == 1]
        within = similarity(first[0].descriptor, first[-1].descriptor)
        across = similarity(first[0].descriptor, second[0].descriptor)
        print(f"  same-place similarity {within:.3f}, cross-place {across:.3f}")

    print(f"wrote descriptor and truth files to {OUTPUT}/")


if __name__ == "__main__":
    main()
