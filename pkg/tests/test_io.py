"""Cloud files and tensor archives: round trips and structured failure modes."""

import numpy as np
import pytest

from rotalith.errors import ArchiveFormatError, CloudFormatError
from rotalith.io import read_archive, read_cloud, write_archive, write_cloud


def test_cloud_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, (1000, 3))
    path = tmp_path / "cloud.xyz"
    write_cloud(path, pts)
    back, labels = read_cloud(path)
    assert labels is None
    assert np.abs(back - pts).max() < 1e-7
    assert back.shape == (1000, 3)


def test_cloud_round_trip_with_labels(tmp_path):
    pts = np.array([[0.1, 0.2, 0.3], [-0.4, 0.5, -0.6]])
    labels = np.array([3, 7])
    path = tmp_path / "labeled.xyz"
    write_cloud(path, pts, labels)
    back, lab = read_cloud(path)
    assert np.array_equal(lab, labels)
    assert np.abs(back - pts).max() < 1e-9


def test_cloud_comments_and_blank_lines(tmp_path):
    path = tmp_path / "c.xyz"
    path.write_text("# header\n\n0.1 0.2 0.3  # inline comment\n0.4 0.5 0.6\n")
    pts, labels = read_cloud(path)
    assert pts.shape == (2, 3) and labels is None


@pytest.mark.parametrize(
    "content",
    ["", "# only comments\n", "1 2\n", "1 2 3 4 5\n", "1 2 x\n", "1 2 3\n1 2 3 4\n"],
)
def test_cloud_malformed_inputs(tmp_path, content):
    path = tmp_path / "bad.xyz"
    path.write_text(content)
    with pytest.raises(CloudFormatError):
        read_cloud(path)


def test_cloud_error_carries_line_number(tmp_path):
    path = tmp_path / "bad.xyz"
    path.write_text("0 0 0\n0 0 bad\n")
    with pytest.raises(CloudFormatError, match=":2"):
        read_cloud(path)


def test_archive_round_trip_byte_identical(tmp_path):
    rng = np.random.default_rng(1)
    tensors = {
        "weights": rng.standard_normal((4, 5)).astype(np.float32).astype(float),
        "bias": rng.standard_normal(7),
        "scalarish": rng.standard_normal((1,)),
    }
    p1 = tmp_path / "a.rtlh"
    p2 = tmp_path / "b.rtlh"
    write_archive(p1, tensors)
    back = read_archive(p1)
    assert set(back) == set(tensors)
    write_archive(p2, back)
    assert p1.read_bytes() == p2.read_bytes()


def test_archive_preserves_shapes_and_f32_values(tmp_path):
    rng = np.random.default_rng(2)
    feats = rng.standard_normal((128, 66))
    path = tmp_path / "d.rtlh"
    write_archive(path, {"features": feats})
    back = read_archive(path)["features"]
    assert back.shape == (128, 66)
    assert np.array_equal(back, feats.astype(np.float32).astype(np.float64))


def test_archive_bad_magic(tmp_path):
    path = tmp_path / "x.rtlh"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ArchiveFormatError, match="magic"):
        read_archive(path)


def test_archive_bad_version(tmp_path):
    import struct

    path = tmp_path / "x.rtlh"
    path.write_bytes(b"RTLH" + struct.pack("<II", 9, 0))
    with pytest.raises(ArchiveFormatError, match="version"):
        read_archive(path)


def test_archive_truncation(tmp_path):
    path = tmp_path / "t.rtlh"
    write_archive(path, {"a": np.arange(10.0)})
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(ArchiveFormatError, match="truncated"):
        read_archive(path)


def test_archive_empty_ok(tmp_path):
    path = tmp_path / "e.rtlh"
    write_archive(path, {})
    assert read_archive(path) == {}
