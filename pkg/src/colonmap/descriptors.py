"""Global image descriptors: validation, similarity, and binary file I/O.

A descriptor is a unit-norm 512-dimensional float32 vector summarizing one
video frame.  Everything downstream (mapping, localization, simulation)
treats descriptors as opaque points on the unit sphere and compares them
with a plain dot product, so this module is the single place where the
representation is pinned down.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ColonmapDataError

DESCRIPTOR_DIM = 512

# Stored descriptors are float32; dot products accumulate in float64 so
# similarity values are stable to ~1e-7 regardless of summation order.
_NORM_TOLERANCE = 1e-5

_MAGIC = b"CMD1"
_HEADER = struct.Struct("<4sIII")
_FRAME_ID = struct.Struct("<I")
_RECORD_SIZE = _FRAME_ID.size + 4 * DESCRIPTOR_DIM


class DescriptorError(ColonmapDataError, ValueError):
    """A vector does not satisfy the descriptor contract."""


class DescriptorFileError(ColonmapDataError, ValueError):
    """A descriptor file is structurally invalid."""


class BadMagicError(DescriptorFileError):
    """The file does not start with the descriptor-file magic bytes."""


class TruncatedFileError(DescriptorFileError):
    """The file size disagrees with the frame count in the header."""


class FrameOrderError(DescriptorFileError):
    """Frame ids in the file are not strictly increasing."""


def as_descriptor(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Validate ``values`` as a descriptor and return it as float32.

    Raises DescriptorError if the shape is not (512,), any entry is not
    finite, or the norm deviates from 1 by more than 1e-5.
    """
    arr = np.asarray(values, dtype=np.float32)
    if arr.shape != (DESCRIPTOR_DIM,):
        raise DescriptorError(
            f"descriptor must have shape ({DESCRIPTOR_DIM},), got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise DescriptorError("descriptor contains non-finite values")
    norm = float(np.linalg.norm(arr.astype(np.float64)))
    if abs(norm - 1.0) > _NORM_TOLERANCE:
        raise DescriptorError(f"descriptor norm {norm:.8f} is not within 1e-5 of 1")
    return np.ascontiguousarray(arr)


def normalize(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Scale ``values`` to unit norm and return a valid descriptor.

    Raises DescriptorError for wrong shape, non-finite entries, or a vector
    too close to zero to normalize meaningfully.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (DESCRIPTOR_DIM,):
        raise DescriptorError(
            f"descriptor must have shape ({DESCRIPTOR_DIM},), got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise DescriptorError("descriptor contains non-finite values")
    norm = float(np.linalg.norm(arr))
    if norm < 1e-12:
        raise DescriptorError("cannot normalize a zero vector")
    return as_descriptor((arr / norm).astype(np.float32))


def similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two descriptors (dot product of unit vectors).

    Accumulates in float64.  Raises DescriptorError on dimension mismatch.
    """
    if a.shape != (DESCRIPTOR_DIM,) or b.shape != (DESCRIPTOR_DIM,):
        raise DescriptorError(
            f"similarity expects two ({DESCRIPTOR_DIM},) vectors, "
            f"got {a.shape} and {b.shape}"
        )
    return float(np.dot(a.astype(np.float64), b.astype(np.float64)))


@dataclass(frozen=True)
class Frame:
    """One video frame: a non-negative id and its descriptor."""

    frame_id: int
    descriptor: np.ndarray

    def __post_init__(self) -> None:
        if self.frame_id < 0:
            raise DescriptorError(f"frame id must be non-negative, got {self.frame_id}")
        object.__setattr__(self, "descriptor", as_descriptor(self.descriptor))


@dataclass
class DescriptorSet:
    """An ordered sequence of frames with strictly increasing ids."""

    frames: list[Frame] = field(default_factory=list)

    def __post_init__(self) -> None:
        last = -1
        for frame in self.frames:
            if frame.frame_id <= last:
                raise FrameOrderError(
                    f"frame ids must be strictly increasing, "
                    f"got {frame.frame_id} after {last}"
                )
            last = frame.frame_id

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self) -> Iterator[Frame]:
        return iter(self.frames)

    def __getitem__(self, index: int) -> Frame:
        return self.frames[index]

    def frame_ids(self) -> list[int]:
        return [frame.frame_id for frame in self.frames]

    def matrix(self) -> np.ndarray:
        """All descriptors stacked as a (len, 512) float32 array."""
        if not self.frames:
            return np.zeros((0, DESCRIPTOR_DIM), dtype=np.float32)
        return np.stack([frame.descriptor for frame in self.frames])

    @classmethod
    def from_arrays(cls, frame_ids: Sequence[int], matrix: np.ndarray) -> "DescriptorSet":
        if len(frame_ids) != len(matrix):
            raise DescriptorError(
                f"{len(frame_ids)} frame ids for {len(matrix)} descriptors"
            )
        return cls([Frame(int(i), row) for i, row in zip(frame_ids, matrix)])


def save_descriptors(dset: DescriptorSet, path: str | Path) -> None:
    """Write a descriptor set in the binary descriptor-file format.

    Layout, all little-endian: 4-byte magic "CMD1", u32 frame count,
    u32 dimension, u32 padding (zero), then per frame a u32 frame id
    followed by 512 float32 values.  Round trips are bit exact.
    """
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, len(dset), DESCRIPTOR_DIM, 0))
        for frame in dset:
            fh.write(_FRAME_ID.pack(frame.frame_id))
            fh.write(frame.descriptor.astype("<f4").tobytes())


def load_descriptors(path: str | Path) -> DescriptorSet:
    """Read a descriptor file written by save_descriptors.

    Raises BadMagicError, TruncatedFileError, FrameOrderError, or
    DescriptorFileError depending on what is wrong with the file;
    descriptor-level violations (bad norm) raise DescriptorError.
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise TruncatedFileError(
            f"{path}: file is {len(data)} bytes, shorter than the {_HEADER.size} byte header"
        )
    magic, count, dim, padding = _HEADER.unpack_from(data, 0)
    if magic != _MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {_MAGIC!r}")
    if dim != DESCRIPTOR_DIM:
        raise DescriptorFileError(
            f"{path}: unsupported descriptor dimension {dim}, expected {DESCRIPTOR_DIM}"
        )
    if padding != 0:
        raise DescriptorFileError(f"{path}: header padding must be zero, got {padding}")
    expected = _HEADER.size + count * _RECORD_SIZE
    if len(data) != expected:
        raise TruncatedFileError(
            f"{path}: header promises {count} frames ({expected} bytes), "
            f"file has {len(data)} bytes"
        )
    frames: list[Frame] = []
    last = -1
    offset = _HEADER.size
    for _ in range(count):
        (frame_id,) = _FRAME_ID.unpack_from(data, offset)
        offset += _FRAME_ID.size
        vector = np.frombuffer(data, dtype="<f4", count=DESCRIPTOR_DIM, offset=offset)
        offset += 4 * DESCRIPTOR_DIM
        if frame_id <= last:
            raise FrameOrderError(
                f"{path}: frame ids must be strictly increasing, "
                f"got {frame_id} after {last}"
            )
        last = frame_id
        frames.append(Frame(frame_id, vector.astype(np.float32)))
    return DescriptorSet(frames)
