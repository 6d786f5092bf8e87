"""Descriptor contract and binary file format."""

from __future__ import annotations

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colonmap import (
    DESCRIPTOR_DIM,
    BadMagicError,
    DescriptorError,
    DescriptorFileError,
    DescriptorSet,
    Frame,
    FrameOrderError,
    TruncatedFileError,
    as_descriptor,
    load_descriptors,
    normalize,
    save_descriptors,
    similarity,
)
from .conftest import one_hot, unit_vector


class TestAsDescriptor:
    def test_accepts_unit_vector(self):
        vec = one_hot(0)
        out = as_descriptor(vec)
        assert out.dtype == np.float32
        assert out.shape == (DESCRIPTOR_DIM,)

    def test_rejects_wrong_shape(self):
        with pytest.raises(DescriptorError, match="shape"):
            as_descriptor(np.ones(100, dtype=np.float32))

    def test_rejects_non_unit_norm(self):
        with pytest.raises(DescriptorError, match="norm"):
            as_descriptor(np.full(DESCRIPTOR_DIM, 0.5, dtype=np.float32))

    def test_rejects_non_finite(self):
        vec = one_hot(0).copy()
        vec[1] = np.nan
        with pytest.raises(DescriptorError, match="finite"):
            as_descriptor(vec)

    def test_norm_tolerance_is_tight(self):
        vec = one_hot(0) * np.float32(1.0 + 5e-5)
        with pytest.raises(DescriptorError):
            as_descriptor(vec)


class TestNormalize:
    def test_three_four_five(self):
        raw = np.zeros(DESCRIPTOR_DIM)
        raw[0], raw[1] = 3.0, 4.0
        out = normalize(raw)
        assert out[0] == pytest.approx(0.6, abs=1e-7)
        assert out[1] == pytest.approx(0.8, abs=1e-7)

    def test_rejects_zero_vector(self):
        with pytest.raises(DescriptorError, match="zero"):
            normalize(np.zeros(DESCRIPTOR_DIM))

    def test_rejects_wrong_shape(self):
        with pytest.raises(DescriptorError):
            normalize(np.ones(7))


class TestSimilarity:
    def test_identical_is_one(self):
        vec = unit_vector(np.random.default_rng(0))
        assert similarity(vec, vec) == pytest.approx(1.0, abs=1e-6)

    def test_orthogonal_is_zero(self):
        assert similarity(one_hot(0), one_hot(1)) == 0.0

    def test_equal_mix_gives_inverse_sqrt2(self):
        mixed = normalize(one_hot(0).astype(np.float64) + one_hot(1))
        assert similarity(mixed, one_hot(0)) == pytest.approx(1 / np.sqrt(2), abs=1e-6)

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        a, b = unit_vector(rng), unit_vector(rng)
        assert similarity(a, b) == similarity(b, a)

    def test_dimension_mismatch(self):
        with pytest.raises(DescriptorError):
            similarity(one_hot(0), np.ones(3, dtype=np.float32))


class TestFrameAndSet:
    def test_negative_frame_id_rejected(self):
        with pytest.raises(DescriptorError, match="non-negative"):
            Frame(-1, one_hot(0))

    def test_ids_must_strictly_increase(self):
        frames = [Frame(0, one_hot(0)), Frame(0, one_hot(1))]
        with pytest.raises(FrameOrderError):
            DescriptorSet(frames)

    def test_gaps_are_allowed(self):
        dset = DescriptorSet([Frame(0, one_hot(0)), Frame(10, one_hot(1))])
        assert dset.frame_ids() == [0, 10]

    def test_matrix_shape(self):
        dset = DescriptorSet([Frame(i, one_hot(i)) for i in range(5)])
        assert dset.matrix().shape == (5, DESCRIPTOR_DIM)

    def test_from_arrays_round_trip(self):
        rng = np.random.default_rng(2)
        matrix = np.stack([unit_vector(rng) for _ in range(4)])
        dset = DescriptorSet.from_arrays([1, 3, 5, 7], matrix)
        assert dset.frame_ids() == [1, 3, 5, 7]
        assert np.array_equal(dset.matrix(), matrix)


class TestFileFormat:
    def test_empty_set_is_header_only(self, tmp_path):
        path = tmp_path / "empty.cmd1"
        save_descriptors(DescriptorSet([]), path)
        data = path.read_bytes()
        assert len(data) == 16
        assert data[:4] == b"CMD1"
        assert struct.unpack("<III", data[4:]) == (0, DESCRIPTOR_DIM, 0)

    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        dset = DescriptorSet(
            [Frame(i * 3, unit_vector(rng)) for i in range(20)]
        )
        path = tmp_path / "set.cmd1"
        save_descriptors(dset, path)
        loaded = load_descriptors(path)
        assert loaded.frame_ids() == dset.frame_ids()
        assert loaded.matrix().tobytes() == dset.matrix().tobytes()

    def test_save_is_deterministic(self, tmp_path):
        rng = np.random.default_rng(4)
        dset = DescriptorSet([Frame(i, unit_vector(rng)) for i in range(5)])
        save_descriptors(dset, tmp_path / "a.cmd1")
        save_descriptors(dset, tmp_path / "b.cmd1")
        assert (tmp_path / "a.cmd1").read_bytes() == (tmp_path / "b.cmd1").read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.cmd1"
        path.write_bytes(b"NOPE" + b"\x00" * 12)
        with pytest.raises(BadMagicError):
            load_descriptors(path)

    def test_too_short_for_header(self, tmp_path):
        path = tmp_path / "short.cmd1"
        path.write_bytes(b"CMD1\x00")
        with pytest.raises(TruncatedFileError):
            load_descriptors(path)

    def test_truncated_body(self, tmp_path):
        path = tmp_path / "trunc.cmd1"
        save_descriptors(DescriptorSet([Frame(0, one_hot(0))]), path)
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(TruncatedFileError):
            load_descriptors(path)

    def test_trailing_garbage(self, tmp_path):
        path = tmp_path / "extra.cmd1"
        save_descriptors(DescriptorSet([Frame(0, one_hot(0))]), path)
        path.write_bytes(path.read_bytes() + b"\x00\x00")
        with pytest.raises(TruncatedFileError):
            load_descriptors(path)

    def test_unsupported_dimension(self, tmp_path):
        path = tmp_path / "dim.cmd1"
        path.write_bytes(struct.pack("<4sIII", b"CMD1", 0, 256, 0))
        with pytest.raises(DescriptorFileError, match="dimension"):
            load_descriptors(path)

    def test_nonzero_padding(self, tmp_path):
        path = tmp_path / "pad.cmd1"
        path.write_bytes(struct.pack("<4sIII", b"CMD1", 0, DESCRIPTOR_DIM, 7))
        with pytest.raises(DescriptorFileError, match="padding"):
            load_descriptors(path)

    def test_out_of_order_frame_ids(self, tmp_path):
        path = tmp_path / "order.cmd1"
        body = struct.pack("<I", 5) + one_hot(0).astype("<f4").tobytes()
        body += struct.pack("<I", 2) + one_hot(1).astype("<f4").tobytes()
        path.write_bytes(struct.pack("<4sIII", b"CMD1", 2, DESCRIPTOR_DIM, 0) + body)
        with pytest.raises(FrameOrderError):
            load_descriptors(path)

    def test_bad_norm_in_file(self, tmp_path):
        path = tmp_path / "norm.cmd1"
        vec = np.full(DESCRIPTOR_DIM, 0.5, dtype="<f4")
        body = struct.pack("<I", 0) + vec.tobytes()
        path.write_bytes(struct.pack("<4sIII", b"CMD1", 1, DESCRIPTOR_DIM, 0) + body)
        with pytest.raises(DescriptorError):
            load_descriptors(path)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1), st.integers(min_value=0, max_value=30))
def test_round_trip_property(tmp_path_factory, seed, count):
    """save then load restores ids and bytes for arbitrary valid sets."""
    rng = np.random.default_rng(seed)
    ids = np.cumsum(rng.integers(1, 5, size=count)) if count else np.array([], dtype=int)
    dset = DescriptorSet([Frame(int(i), unit_vector(rng)) for i in ids])
    path = tmp_path_factory.mktemp("prop") / "set.cmd1"
    save_descriptors(dset, path)
    loaded = load_descriptors(path)
    assert loaded.frame_ids() == dset.frame_ids()
    assert loaded.matrix().tobytes() == dset.matrix().tobytes()
