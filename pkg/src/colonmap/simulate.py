"""Deterministic synthetic worlds and descriptor sessions.

A world is a line of places, each defined by a latent non-negative unit
vector, grouped into contiguous regions (modeling anatomical segments of
a linear anatomy).  A session walks the places in order; every place gets
a per-session drifted anchor and a dwell of noisy frames, and occasional
non-distinctive "wall" frames are interleaved between places.  Everything
is a pure function of (params, seed), down to the last byte on disk.

Noise convention: latent components are sparse (about half are zero), so
the effective per-component scale of a unit latent is sqrt(2/dim).  The
frame_noise and session_noise sigmas are relative to that scale, which
keeps their useful range near [0, 1] independent of dimensionality.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .descriptors import DESCRIPTOR_DIM, DescriptorSet, Frame, normalize
from .errors import ColonmapDataError

TRUTH_FORMAT = "colontruth-v1"
WALL = "WALL"

_SEED_MASK = (1 << 64) - 1
_MAX_LATENT_ATTEMPTS = 1000


class SeparationError(ColonmapDataError, RuntimeError):
    """World generation could not satisfy the place-separation cap."""


class TruthFormatError(ColonmapDataError, ValueError):
    """A ground-truth file violates the truth schema."""


class TruthCoverageError(ColonmapDataError, LookupError):
    """A frame or place was required that the ground truth does not cover."""


@dataclass(frozen=True)
class WorldParams:
    """Shape of a synthetic world."""

    n_places: int = 40
    n_regions: int = 7
    dim: int = DESCRIPTOR_DIM
    place_separation: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.n_places >= self.n_regions >= 1:
            raise ValueError(
                f"need n_places >= n_regions >= 1, got "
                f"{self.n_places} and {self.n_regions}"
            )
        if self.dim != DESCRIPTOR_DIM:
            raise ValueError(f"dim must be {DESCRIPTOR_DIM}, got {self.dim}")
        if not 0.0 <= self.place_separation < 1.0:
            raise ValueError(
                f"place_separation must be in [0, 1), got {self.place_separation}"
            )


@dataclass(frozen=True)
class SessionParams:
    """Shape of one pass through a world."""

    dwell_min: int = 5
    dwell_max: int = 25
    frame_noise: float = 0.25
    session_noise: float = 0.15
    wall_prob: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.dwell_min <= self.dwell_max:
            raise ValueError(
                f"need 1 <= dwell_min <= dwell_max, got "
                f"{self.dwell_min} and {self.dwell_max}"
            )
        if self.frame_noise < 0.0 or self.session_noise < 0.0:
            raise ValueError("noise sigmas must be non-negative")
        if not 0.0 <= self.wall_prob < 1.0:
            raise ValueError(f"wall_prob must be in [0, 1), got {self.wall_prob}")


@dataclass
class World:
    """Latent place descriptors plus the place-to-region partition."""

    latents: np.ndarray
    regions: np.ndarray

    def __post_init__(self) -> None:
        if self.latents.ndim != 2 or self.latents.shape[1] != DESCRIPTOR_DIM:
            raise ValueError(
                f"latents must be (n_places, {DESCRIPTOR_DIM}), got {self.latents.shape}"
            )
        if len(self.regions) != len(self.latents):
            raise ValueError("one region label per place required")
        if np.any(self.latents < 0.0):
            raise ValueError("latents must be component-wise non-negative")
        norms = np.linalg.norm(self.latents.astype(np.float64), axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-5):
            raise ValueError("latents must be unit vectors")

    @property
    def n_places(self) -> int:
        return len(self.latents)

    def region_of(self, place: int) -> int:
        return int(self.regions[place])


def generate_world(params: WorldParams) -> World:
    """Draw place latents with a cap on pairwise similarity.

    Latents are unit-normalized non-negative sparse vectors: standard
    normal draws with negative components zeroed, which concentrates
    pairwise similarity near 1/pi and leaves room under the default cap.
    (Folding with abs() instead concentrates similarity near 2/pi, above
    any cap below 0.63, so a cap like the 0.5 default would be
    unreachable.)  Each latent is rejection-sampled until it clears the
    cap against all accepted ones; persistent failure raises
    SeparationError.
    """
    rng = np.random.default_rng(params.seed & _SEED_MASK)
    accepted: list[np.ndarray] = []
    for place in range(params.n_places):
        for _ in range(_MAX_LATENT_ATTEMPTS):
            draw = np.maximum(rng.standard_normal(params.dim), 0.0)
            norm = float(np.linalg.norm(draw))
            if norm < 1e-12:
                continue
            candidate = draw / norm
            if all(
                float(candidate @ other) <= params.place_separation
                for other in accepted
            ):
                accepted.append(candidate)
                break
        else:
            raise SeparationError(
                f"could not place latent {place} under separation "
                f"{params.place_separation} in {_MAX_LATENT_ATTEMPTS} attempts; "
                f"raise place_separation or use fewer places"
            )
    latents = np.stack(accepted).astype(np.float32)
    # contiguous region blocks, sizes as equal as the division allows
    block_sizes = [len(b) for b in np.array_split(np.arange(params.n_places), params.n_regions)]
    regions = np.repeat(np.arange(params.n_regions), block_sizes)
    return World(latents=latents, regions=regions)


@dataclass(frozen=True)
class TruthEntry:
    """Ground-truth label for one frame: a place, or a wall."""

    frame_id: int
    place: int | None
    region: int | None


@dataclass
class GroundTruth:
    """Frame-level labels for one session, with fast lookups."""

    entries: list[TruthEntry]
    region_names: dict[int, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._by_frame: dict[int, TruthEntry] = {}
        self._region_by_place: dict[int, int] = {}
        for entry in self.entries:
            if entry.frame_id in self._by_frame:
                raise TruthFormatError(
                    f"frame {entry.frame_id} labeled more than once"
                )
            if (entry.place is None) != (entry.region is None):
                raise TruthFormatError(
                    f"frame {entry.frame_id}: place and region must both be "
                    f"set or both be null"
                )
            self._by_frame[entry.frame_id] = entry
            if entry.place is not None:
                known = self._region_by_place.get(entry.place)
                if known is not None and known != entry.region:
                    raise TruthFormatError(
                        f"place {entry.place} labeled with regions {known} "
                        f"and {entry.region}"
                    )
                self._region_by_place[entry.place] = entry.region
        if not self.region_names:
            self.region_names = {
                r: f"region_{r}" for r in sorted(set(self._region_by_place.values()))
            }

    def __len__(self) -> int:
        return len(self.entries)

    def covers(self, frame_id: int) -> bool:
        return frame_id in self._by_frame

    def place_of(self, frame_id: int) -> int | None:
        """Place label of a frame; None marks a wall frame."""
        try:
            return self._by_frame[frame_id].place
        except KeyError:
            raise TruthCoverageError(
                f"frame {frame_id} is not covered by the ground truth"
            ) from None

    def region_of_place(self, place: int) -> int:
        try:
            return self._region_by_place[place]
        except KeyError:
            raise TruthCoverageError(
                f"place {place} is not covered by the ground truth"
            ) from None

    def places(self) -> set[int]:
        """All distinct non-wall places appearing in this truth."""
        return set(self._region_by_place)


def generate_session(
    world: World, params: SessionParams
) -> tuple[DescriptorSet, GroundTruth]:
    """Walk the places in order, emitting noisy frames plus ground truth.

    Per place: one drifted session anchor, then a uniform dwell of frames
    around the anchor.  Wall opportunities are drawn i.i.d. per dwell
    slot and emitted after the place as a burst of fresh non-negative
    random unit vectors, modeling the poor-visibility transit between
    places.  Frame ids are sequential from 0.
    """
    rng = np.random.default_rng(params.seed & _SEED_MASK)
    component_scale = np.sqrt(2.0 / DESCRIPTOR_DIM)
    frames: list[Frame] = []
    entries: list[TruthEntry] = []
    frame_id = 0
    for place in range(world.n_places):
        latent = world.latents[place].astype(np.float64)
        # anchor stays float64; only emitted descriptors round to float32
        drifted = np.abs(
            latent
            + params.session_noise * component_scale * rng.standard_normal(DESCRIPTOR_DIM)
        )
        anchor = drifted / np.linalg.norm(drifted)
        dwell = int(rng.integers(params.dwell_min, params.dwell_max + 1))
        wall_count = 0
        region = world.region_of(place)
        for _ in range(dwell):
            if rng.random() < params.wall_prob:
                wall_count += 1
            descriptor = normalize(
                np.abs(
                    anchor
                    + params.frame_noise * component_scale * rng.standard_normal(DESCRIPTOR_DIM)
                )
            )
            frames.append(Frame(frame_id, descriptor))
            entries.append(TruthEntry(frame_id, place, region))
            frame_id += 1
        for _ in range(wall_count):
            while True:
                wall = np.maximum(rng.standard_normal(DESCRIPTOR_DIM), 0.0)
                if float(np.linalg.norm(wall)) > 1e-12:
                    break
            frames.append(Frame(frame_id, normalize(wall)))
            entries.append(TruthEntry(frame_id, None, None))
            frame_id += 1
    return DescriptorSet(frames), GroundTruth(entries)


def save_truth(truth: GroundTruth, path: str | Path) -> None:
    """Write ground truth as JSON; wall frames carry place "WALL"."""
    document = {
        "format": TRUTH_FORMAT,
        "frames": [
            {
                "frame_id": entry.frame_id,
                "place": WALL if entry.place is None else entry.place,
                "region": entry.region,
            }
            for entry in truth.entries
        ],
        "regions": {str(r): name for r, name in sorted(truth.region_names.items())},
    }
    Path(path).write_text(json.dumps(document, separators=(",", ":")) + "\n")


def _expect(condition: bool, where: str, message: str) -> None:
    if not condition:
        raise TruthFormatError(f"{where}: {message}")


def load_truth(path: str | Path) -> GroundTruth:
    """Parse and validate a truth file written by save_truth."""
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise TruthFormatError(f"{path}: not valid JSON: {exc}") from None
    where = str(path)
    _expect(isinstance(document, dict), where, "top level must be an object")
    _expect(
        document.get("format") == TRUTH_FORMAT,
        where,
        f"format must be {TRUTH_FORMAT!r}, got {document.get('format')!r}",
    )
    raw_frames = document.get("frames")
    _expect(isinstance(raw_frames, list), where, "frames must be a list")
    entries: list[TruthEntry] = []
    for index, raw in enumerate(raw_frames):
        entry_where = f"{where}: frames[{index}]"
        _expect(isinstance(raw, dict), entry_where, "must be an object")
        frame_id = raw.get("frame_id")
        _expect(
            isinstance(frame_id, int) and frame_id >= 0,
            entry_where,
            f"frame_id must be a non-negative integer, got {frame_id!r}",
        )
        place = raw.get("place")
        region = raw.get("region")
        if place == WALL:
            _expect(region is None, entry_where, "wall frames must have null region")
            entries.append(TruthEntry(frame_id, None, None))
        else:
            _expect(
                isinstance(place, int) and place >= 0,
                entry_where,
                f"place must be a non-negative integer or \"{WALL}\", got {place!r}",
            )
            _expect(
                isinstance(region, int) and region >= 0,
                entry_where,
                f"region must be a non-negative integer, got {region!r}",
            )
            entries.append(TruthEntry(frame_id, place, region))
    raw_regions = document.get("regions")
    _expect(isinstance(raw_regions, dict), where, "regions must be an object")
    region_names: dict[int, str] = {}
    for key, name in raw_regions.items():
        _expect(
            isinstance(name, str) and key.lstrip("-").isdigit(),
            where,
            f"regions entries must map integer ids to names, got {key!r}: {name!r}",
        )
        region_names[int(key)] = name
    try:
        return GroundTruth(entries, region_names)
    except TruthFormatError as exc:
        raise TruthFormatError(f"{where}: {exc}") from None
