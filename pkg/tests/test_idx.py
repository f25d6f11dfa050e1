import os
import struct

import numpy as np
import pytest

from priorcanon.errors import FormatError
from priorcanon.io import (
    ImageDataset, encode_idx, load_idx, read_idx_images, read_idx_labels, save_idx_dataset, write_idx,
)

# tests/data/tiny-images.idx holds two 4x4 images with pixel byte
# 26 * i + 4 * r + c, and tiny-labels.idx the labels [3, 1]; both were
# written byte by byte with struct.
EXPECTED_PIXELS = np.array([[[26 * i + 4 * r + c for c in range(4)] for r in range(4)] for i in range(2)])


def _write(path, blob):
    with open(path, "wb") as fh:
        fh.write(blob)
    return str(path)


class TestGoldenFixture:
    def test_pixels_scaled(self, data_dir):
        ds = load_idx(os.path.join(data_dir, "tiny-images.idx"), os.path.join(data_dir, "tiny-labels.idx"))
        assert ds.images.shape == (2, 1, 4, 4)
        np.testing.assert_array_equal(ds.images[:, 0], EXPECTED_PIXELS / 255.0)
        np.testing.assert_array_equal(ds.labels, [3, 1])
        assert ds.n_classes == 4

    def test_writer_reproduces_golden_bytes(self, data_dir):
        with open(os.path.join(data_dir, "tiny-images.idx"), "rb") as fh:
            assert encode_idx(EXPECTED_PIXELS.astype(np.uint8)) == fh.read()
        with open(os.path.join(data_dir, "tiny-labels.idx"), "rb") as fh:
            assert encode_idx(np.array([3, 1], np.uint8)) == fh.read()

    def test_header_layout(self):
        blob = encode_idx(np.zeros((3, 2, 5), np.uint8))
        assert blob[:16] == bytes.fromhex("00000803" "00000003" "00000002" "00000005")


class TestErrors:
    def test_bad_magic(self, tmp_path):
        p = _write(tmp_path / "x.idx", struct.pack(">IIII", 0x0802, 1, 2, 2) + bytes(4))
        with pytest.raises(FormatError) as exc:
            read_idx_images(p)
        assert exc.value.code == "bad-magic"

    def test_labels_file_as_images(self, data_dir):
        with pytest.raises(FormatError) as exc:
            read_idx_images(os.path.join(data_dir, "tiny-labels.idx"))
        assert exc.value.code == "bad-magic"

    @pytest.mark.parametrize("cut", [2, 10, 20, 47])
    def test_truncated(self, tmp_path, data_dir, cut):
        with open(os.path.join(data_dir, "tiny-images.idx"), "rb") as fh:
            blob = fh.read()
        with pytest.raises(FormatError) as exc:
            read_idx_images(_write(tmp_path / "t.idx", blob[:cut]))
        assert exc.value.code == "truncated"

    def test_trailing_bytes(self, tmp_path):
        p = _write(tmp_path / "l.idx", struct.pack(">II", 0x801, 1) + bytes(2))
        with pytest.raises(FormatError):
            read_idx_labels(p)

    def test_count_mismatch(self, tmp_path, data_dir):
        labels = _write(tmp_path / "l.idx", struct.pack(">II", 0x801, 3) + bytes([0, 1, 2]))
        with pytest.raises(FormatError) as exc:
            load_idx(os.path.join(data_dir, "tiny-images.idx"), labels)
        assert exc.value.code == "count-mismatch"

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            read_idx_images(str(tmp_path / "absent.idx"))

    def test_writer_rejects_floats(self):
        with pytest.raises(TypeError):
            encode_idx(np.zeros((1, 2, 2)))


class TestRoundTrip:
    def test_dataset_round_trip(self, tmp_path, rng):
        pix = rng.integers(0, 256, (5, 6, 6)).astype(np.uint8)
        ds = ImageDataset(pix[:, None] / 255.0, np.array([0, 1, 2, 0, 1]), 3)
        a, b = str(tmp_path / "i.idx"), str(tmp_path / "l.idx")
        save_idx_dataset(ds, a, b)
        back = load_idx(a, b, n_classes=3)
        np.testing.assert_array_equal(back.images, ds.images)
        np.testing.assert_array_equal(back.labels, ds.labels)

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        write_idx(str(tmp_path / "x.idx"), np.zeros(3, np.uint8))
        assert os.listdir(tmp_path) == ["x.idx"]
