"""Synthetic worlds, sessions, and the ground-truth format."""

from __future__ import annotations

import numpy as np
import pytest

from colonmap import (
    GroundTruth,
    SeparationError,
    SessionParams,
    TruthCoverageError,
    TruthEntry,
    TruthFormatError,
    World,
    WorldParams,
    generate_session,
    generate_world,
    load_truth,
    save_truth,
    similarity,
)
from .conftest import (
    CANONICAL_MAP_SESSION_SEED,
    CANONICAL_WORLD_SEED,
)


class TestWorldParams:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_places": 2, "n_regions": 5},
            {"n_regions": 0},
            {"dim": 128},
            {"place_separation": 1.0},
            {"place_separation": -0.1},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            WorldParams(**kwargs)

    def test_defaults(self):
        params = WorldParams()
        assert params.n_places == 40
        assert params.n_regions == 7
        assert params.place_separation == 0.5


class TestSessionParams:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"dwell_min": 0},
            {"dwell_min": 9, "dwell_max": 3},
            {"frame_noise": -0.1},
            {"session_noise": -0.1},
            {"wall_prob": 1.0},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            SessionParams(**kwargs)


class TestWorldGeneration:
    def test_canonical_world_shape_and_invariants(self, canonical):
        world = canonical.world
        assert world.latents.shape == (40, 512)
        assert world.latents.dtype == np.float32
        assert np.all(world.latents >= 0.0)
        norms = np.linalg.norm(world.latents.astype(np.float64), axis=1)
        np.testing.assert_allclose(norms, 1.0, rtol=0, atol=1e-5)

    def test_canonical_world_separation(self, canonical):
        sims = canonical.world.latents.astype(np.float64) @ (
            canonical.world.latents.astype(np.float64).T
        )
        np.fill_diagonal(sims, 0.0)
        worst = float(sims.max())
        assert worst <= 0.5
        # pinned: places are comfortably below the cap at this seed
        assert worst == pytest.approx(0.4251, abs=2e-3)

    def test_regions_are_contiguous_blocks(self, canonical):
        regions = canonical.world.regions
        assert len(regions) == 40
        assert sorted(set(regions.tolist())) == list(range(7))
        assert np.all(np.diff(regions) >= 0), "regions partition places in order"

    def test_deterministic(self):
        params = WorldParams(n_places=6, n_regions=2, seed=5)
        first = generate_world(params)
        second = generate_world(params)
        assert first.latents.tobytes() == second.latents.tobytes()
        assert first.regions.tolist() == second.regions.tolist()

    def test_seed_changes_the_world(self):
        a = generate_world(WorldParams(n_places=4, n_regions=2, seed=1))
        b = generate_world(WorldParams(n_places=4, n_regions=2, seed=2))
        assert a.latents.tobytes() != b.latents.tobytes()

    def test_single_place_world(self):
        world = generate_world(WorldParams(n_places=1, n_regions=1, seed=0))
        assert world.n_places == 1
        assert world.region_of(0) == 0

    def test_unreachable_separation_raises(self):
        with pytest.raises(SeparationError, match="place_separation"):
            generate_world(WorldParams(n_places=5, n_regions=1, place_separation=0.01))

    def test_world_validation(self):
        bad = np.full((2, 512), -0.1, dtype=np.float32)
        with pytest.raises(ValueError):
            World(latents=bad, regions=np.zeros(2, dtype=int))


class TestSessionGeneration:
    def test_canonical_map_session_census(self, canonical):
        stream, truth = canonical.map_stream, canonical.map_truth
        assert len(stream) == len(truth)
        walls = [e for e in truth.entries if e.place is None]
        # pinned counts for the canonical seeds
        assert len(stream) == 636
        assert len(walls) == 39

    def test_frame_ids_are_sequential(self, canonical):
        ids = canonical.map_stream.frame_ids()
        assert ids == list(range(len(ids)))

    def test_descriptors_non_negative(self, canonical):
        matrix = canonical.map_stream.matrix()
        assert np.all(matrix >= 0.0)

    def test_truth_labels_match_world_regions(self, canonical):
        world, truth = canonical.world, canonical.map_truth
        for entry in truth.entries:
            if entry.place is None:
                assert entry.region is None
            else:
                assert entry.region == world.region_of(entry.place)

    def test_every_place_visited_in_order(self, canonical):
        seen: list[int] = []
        for entry in canonical.map_truth.entries:
            if entry.place is not None and (not seen or seen[-1] != entry.place):
                seen.append(entry.place)
        assert seen == list(range(40))

    def test_dwell_lengths_within_bounds(self, canonical):
        counts: dict[int, int] = {}
        for entry in canonical.map_truth.entries:
            if entry.place is not None:
                counts[entry.place] = counts.get(entry.place, 0) + 1
        assert all(5 <= c <= 25 for c in counts.values())

    def test_deterministic(self):
        world = generate_world(WorldParams(n_places=3, n_regions=1, seed=9))
        params = SessionParams(seed=11)
        stream_a, truth_a = generate_session(world, params)
        stream_b, truth_b = generate_session(world, params)
        assert stream_a.matrix().tobytes() == stream_b.matrix().tobytes()
        assert truth_a.entries == truth_b.entries

    def test_session_seed_changes_frames(self):
        world = generate_world(WorldParams(n_places=3, n_regions=1, seed=9))
        stream_a, _ = generate_session(world, SessionParams(seed=1))
        stream_b, _ = generate_session(world, SessionParams(seed=2))
        assert stream_a.matrix().tobytes() != stream_b.matrix().tobytes()

    def test_noiseless_session_reproduces_the_latents(self):
        world = generate_world(WorldParams(n_places=4, n_regions=2, seed=3))
        stream, truth = generate_session(
            world,
            SessionParams(frame_noise=0.0, session_noise=0.0, wall_prob=0.0, seed=0),
        )
        for frame in stream:
            place = truth.place_of(frame.frame_id)
            sim = similarity(frame.descriptor, world.latents[place])
            assert sim > 1.0 - 1e-5

    def test_default_noise_keeps_places_separable(self, canonical):
        stream, truth = canonical.map_stream, canonical.map_truth
        by_place: dict[int, list[np.ndarray]] = {}
        for frame in stream:
            place = truth.place_of(frame.frame_id)
            if place is not None:
                by_place.setdefault(place, []).append(frame.descriptor)
        # consecutive same-place frames stay near-duplicates
        within = [
            similarity(frames[i], frames[i + 1])
            for frames in by_place.values()
            for i in range(len(frames) - 1)
        ]
        within = np.array(within)
        assert within.mean() > 0.9
        assert (within > 0.8).mean() > 0.95
        # different places stay far apart even with session drift
        cross = [
            similarity(by_place[p][0], by_place[p + 1][0]) for p in range(39)
        ]
        assert max(cross) < 0.7

    def test_wall_frames_are_unit_and_non_negative(self):
        world = generate_world(WorldParams(n_places=5, n_regions=1, seed=7))
        stream, truth = generate_session(
            world, SessionParams(wall_prob=0.5, seed=13)
        )
        wall_ids = [e.frame_id for e in truth.entries if e.place is None]
        assert wall_ids, "wall_prob 0.5 must produce walls"
        for frame in stream:
            if frame.frame_id in wall_ids:
                assert np.all(frame.descriptor >= 0.0)
                norm = float(np.linalg.norm(frame.descriptor.astype(np.float64)))
                assert abs(norm - 1.0) < 1e-5


class TestGroundTruth:
    def test_lookups(self):
        truth = GroundTruth(
            [TruthEntry(0, 3, 1), TruthEntry(1, None, None), TruthEntry(2, 4, 1)]
        )
        assert truth.place_of(0) == 3
        assert truth.place_of(1) is None
        assert truth.region_of_place(4) == 1
        assert truth.places() == {3, 4}
        assert truth.covers(2)
        assert not truth.covers(99)

    def test_default_region_names(self):
        truth = GroundTruth([TruthEntry(0, 0, 2)])
        assert truth.region_names == {2: "region_2"}

    def test_unknown_frame_raises(self):
        truth = GroundTruth([TruthEntry(0, 0, 0)])
        with pytest.raises(TruthCoverageError, match="frame 5"):
            truth.place_of(5)

    def test_unknown_place_raises(self):
        truth = GroundTruth([TruthEntry(0, 0, 0)])
        with pytest.raises(TruthCoverageError, match="place 9"):
            truth.region_of_place(9)

    def test_duplicate_frame_rejected(self):
        with pytest.raises(TruthFormatError, match="more than once"):
            GroundTruth([TruthEntry(0, 0, 0), TruthEntry(0, 1, 0)])

    def test_half_null_label_rejected(self):
        with pytest.raises(TruthFormatError, match="both"):
            GroundTruth([TruthEntry(0, None, 3)])

    def test_inconsistent_place_region_rejected(self):
        with pytest.raises(TruthFormatError, match="place 5"):
            GroundTruth([TruthEntry(0, 5, 0), TruthEntry(1, 5, 1)])


class TestTruthFile:
    def test_round_trip(self, tmp_path):
        truth = GroundTruth(
            [TruthEntry(0, 2, 0), TruthEntry(1, None, None), TruthEntry(2, 3, 1)],
            region_names={0: "ascending", 1: "transverse"},
        )
        path = tmp_path / "truth.json"
        save_truth(truth, path)
        loaded = load_truth(path)
        assert loaded.entries == truth.entries
        assert loaded.region_names == truth.region_names

    def test_canonical_round_trip(self, canonical, tmp_path):
        path = tmp_path / "truth.json"
        save_truth(canonical.map_truth, path)
        loaded = load_truth(path)
        assert loaded.entries == canonical.map_truth.entries

    def test_wall_serialized_as_string(self, tmp_path):
        truth = GroundTruth([TruthEntry(0, None, None)])
        path = tmp_path / "truth.json"
        save_truth(truth, path)
        assert '"place":"WALL"' in path.read_text()
        assert '"region":null' in path.read_text()

    def test_resave_is_byte_identical(self, tmp_path):
        truth = GroundTruth([TruthEntry(0, 1, 0), TruthEntry(1, None, None)])
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        save_truth(truth, first)
        save_truth(load_truth(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_not_json(self, tmp_path):
        path = tmp_path / "truth.json"
        path.write_text("nope")
        with pytest.raises(TruthFormatError, match="not valid JSON"):
            load_truth(path)

    def test_wrong_format_tag(self, tmp_path):
        path = tmp_path / "truth.json"
        path.write_text('{"format":"other","frames":[],"regions":{}}')
        with pytest.raises(TruthFormatError, match="format"):
            load_truth(path)

    def test_wall_with_region_rejected(self, tmp_path):
        path = tmp_path / "truth.json"
        path.write_text(
            '{"format":"colontruth-v1",'
            '"frames":[{"frame_id":0,"place":"WALL","region":2}],"regions":{}}'
        )
        with pytest.raises(TruthFormatError):
            load_truth(path)

    def test_bad_place_value(self, tmp_path):
        path = tmp_path / "truth.json"
        path.write_text(
            '{"format":"colontruth-v1",'
            '"frames":[{"frame_id":0,"place":"CEILING","region":1}],"regions":{}}'
        )
        with pytest.raises(TruthFormatError):
            load_truth(path)
