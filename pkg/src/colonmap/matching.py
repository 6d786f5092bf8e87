"""Pairwise match counts between frames.

The mapper asks one question of an image-matching backend: how many local
feature correspondences do two frames share.  Real correspondence counts
come from an external extractor and arrive as a text match cache; for
self-contained experiments a synthetic oracle derives counts directly from
descriptor similarity.  Both backends expose ``match_count(frame_a,
frame_b) -> int`` and are symmetric in their arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Protocol

import numpy as np

from .descriptors import DescriptorSet, Frame, similarity
from .errors import ColonmapDataError

_SEED_MASK = (1 << 64) - 1


class MatchCacheFormatError(ColonmapDataError, ValueError):
    """A match-cache file has a malformed or conflicting line."""


class UnknownPairError(ColonmapDataError, LookupError):
    """A frame pair was requested that the cache does not cover."""

    def __init__(self, frame_a: int, frame_b: int) -> None:
        self.pair = canonical_pair(frame_a, frame_b)
        super().__init__(f"no match count cached for frame pair {self.pair}")


class MatchBackend(Protocol):
    def match_count(self, frame_a: int, frame_b: int) -> int: ...


def canonical_pair(frame_a: int, frame_b: int) -> tuple[int, int]:
    """Order a frame pair so (a, b) and (b, a) address the same entry."""
    return (frame_a, frame_b) if frame_a <= frame_b else (frame_b, frame_a)


class MatchCache:
    """Symmetric lookup table of match counts keyed by frame pairs."""

    def __init__(self) -> None:
        self._counts: dict[tuple[int, int], int] = {}

    def __len__(self) -> int:
        return len(self._counts)

    def __contains__(self, pair: tuple[int, int]) -> bool:
        return canonical_pair(*pair) in self._counts

    def insert(self, frame_a: int, frame_b: int, count: int) -> None:
        """Record a count.  Re-inserting a pair with a different count fails."""
        if count < 0:
            raise ValueError(f"match count must be non-negative, got {count}")
        key = canonical_pair(frame_a, frame_b)
        existing = self._counts.get(key)
        if existing is not None and existing != count:
            raise MatchCacheFormatError(
                f"conflicting counts for pair {key}: {existing} and {count}"
            )
        self._counts[key] = count

    def match_count(self, frame_a: int, frame_b: int) -> int:
        key = canonical_pair(frame_a, frame_b)
        try:
            return self._counts[key]
        except KeyError:
            raise UnknownPairError(frame_a, frame_b) from None

    def pairs(self) -> Iterator[tuple[int, int, int]]:
        """All (a, b, count) entries in sorted pair order."""
        for (a, b) in sorted(self._counts):
            yield a, b, self._counts[(a, b)]


def save_match_cache(cache: MatchCache, path: str | Path) -> None:
    """Write one "<frame_a> <frame_b> <count>" line per pair, sorted."""
    lines = [f"{a} {b} {count}\n" for a, b, count in cache.pairs()]
    Path(path).write_text("".join(lines))


def load_match_cache(path: str | Path) -> MatchCache:
    """Parse a match-cache text file.

    Blank lines and lines starting with ``#`` are ignored.  Any other line
    must hold exactly three integers; violations raise
    MatchCacheFormatError naming the line number.
    """
    path = Path(path)
    cache = MatchCache()
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise MatchCacheFormatError(
                f"{path}:{lineno}: expected 3 fields, got {len(parts)}: {raw!r}"
            )
        try:
            a, b, count = (int(p) for p in parts)
        except ValueError:
            raise MatchCacheFormatError(
                f"{path}:{lineno}: fields must be integers: {raw!r}"
            ) from None
        if a < 0 or b < 0:
            raise MatchCacheFormatError(
                f"{path}:{lineno}: frame ids must be non-negative: {raw!r}"
            )
        if count < 0:
            raise MatchCacheFormatError(
                f"{path}:{lineno}: count must be non-negative: {raw!r}"
            )
        try:
            cache.insert(a, b, count)
        except MatchCacheFormatError as exc:
            raise MatchCacheFormatError(f"{path}:{lineno}: {exc}") from None
    return cache


@dataclass(frozen=True)
class SyntheticMatchParams:
    """Knobs for the similarity-driven synthetic match oracle."""

    max_matches: int = 400
    sim_floor: float = 0.6
    noise_scale: float = 10.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_matches < 1:
            raise ValueError(f"max_matches must be positive, got {self.max_matches}")
        if not 0.0 <= self.sim_floor < 1.0:
            raise ValueError(f"sim_floor must be in [0, 1), got {self.sim_floor}")
        if self.noise_scale < 0.0:
            raise ValueError(f"noise_scale must be non-negative, got {self.noise_scale}")


def synthetic_match_count(
    params: SyntheticMatchParams,
    descriptor_a: np.ndarray,
    descriptor_b: np.ndarray,
    frame_a: int,
    frame_b: int,
) -> int:
    """Derive a plausible correspondence count from descriptor similarity.

    Similarity is mapped through a linear ramp: at or below ``sim_floor``
    the base count is 0, at similarity 1 it is ``max_matches``.  Integer
    noise uniform on [-noise_scale, +noise_scale] is then added, seeded by
    (seed, min(a, b), max(a, b)) so the count for a pair is reproducible
    and independent of argument order.  Results are clamped at 0.
    """
    sim = similarity(descriptor_a, descriptor_b)
    ramp = (sim - params.sim_floor) / (1.0 - params.sim_floor)
    ramp = min(max(ramp, 0.0), 1.0)
    base = round(params.max_matches * ramp)
    span = int(params.noise_scale)
    if span > 0:
        lo, hi = canonical_pair(frame_a, frame_b)
        rng = np.random.default_rng([params.seed & _SEED_MASK, lo, hi])
        base += int(rng.integers(-span, span + 1))
    return max(base, 0)


class SyntheticMatcher:
    """Match backend that computes counts from descriptors on demand."""

    def __init__(
        self,
        params: SyntheticMatchParams,
        descriptors: Mapping[int, np.ndarray] | Iterable[Frame],
    ) -> None:
        self.params = params
        if isinstance(descriptors, Mapping):
            self._by_id = dict(descriptors)
        else:
            self._by_id = {f.frame_id: f.descriptor for f in descriptors}

    def add_frames(self, frames: Iterable[Frame]) -> None:
        """Make additional frames (a query stream) known to the oracle."""
        for frame in frames:
            self._by_id[frame.frame_id] = frame.descriptor

    def match_count(self, frame_a: int, frame_b: int) -> int:
        try:
            da = self._by_id[frame_a]
            db = self._by_id[frame_b]
        except KeyError as exc:
            raise UnknownPairError(frame_a, frame_b) from exc
        return synthetic_match_count(self.params, da, db, frame_a, frame_b)
