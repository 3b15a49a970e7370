import numpy as np
import pytest

from grasp_proposals.core.exceptions import EmptyAfterFilteringError, MalformedFileError
from grasp_proposals.io.model_library import ModelLibrary
from grasp_proposals.io.point_cloud_io import load_point_cloud, read_point_cloud, write_point_cloud

ASCII_PLY = """ply
format ascii 1.0
element vertex 3
property float x
property float y
property float z
end_header
0 0 0
1 0 0
0 1 0.5
"""


def test_ascii_ply(tmp_path):
    path = tmp_path / "tri.ply"
    path.write_text(ASCII_PLY)
    loaded = read_point_cloud(path)
    assert loaded.dropped == 0
    assert loaded.cloud.points.tolist() == [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.5]]


def test_binary_roundtrip_is_float32(tmp_path, rng):
    points = rng.uniform(-2.0, 2.0, size=(10_000, 3))
    path = write_point_cloud(tmp_path / "cloud.ply", points)
    loaded = load_point_cloud(path)
    assert np.array_equal(loaded.points, points.astype(np.float32).astype(np.float64))


def test_ascii_write_reads_back(tmp_path):
    points = np.array([[0.5, 0.25, 0.125], [1.0, 2.0, 3.0]])
    path = write_point_cloud(tmp_path / "cloud.ply", points, colors=np.array([[255, 0, 0], [0, 255, 0]]), binary=False)
    assert path.read_bytes().startswith(b"ply\nformat ascii")
    assert np.array_equal(load_point_cloud(path).points, points)


def test_text_with_comments_and_commas(tmp_path):
    path = tmp_path / "cloud.xyz"
    path.write_text("# x y z\n0.1, 0.2, 0.3\n\n1 2 3\n")
    assert load_point_cloud(path).points.tolist() == [[0.1, 0.2, 0.3], [1.0, 2.0, 3.0]]


def test_non_finite_points_are_dropped(tmp_path):
    path = tmp_path / "cloud.txt"
    path.write_text("0 0 0\nnan 1 1\n1 1 1\n")
    loaded = read_point_cloud(path)
    assert loaded.dropped == 1
    assert len(loaded.cloud) == 2


@pytest.mark.parametrize(
    "content, line",
    [
        ("0 0 0\n1 2\n", 2),
        ("# header\n0 0 0\n1 2 x\n", 3),
    ],
)
def test_malformed_text_reports_line(tmp_path, content, line):
    path = tmp_path / "bad.txt"
    path.write_text(content)
    with pytest.raises(MalformedFileError) as excinfo:
        read_point_cloud(path)
    assert excinfo.value.line == line
    assert f"line {line}" in str(excinfo.value)


def test_truncated_ply_is_malformed(tmp_path):
    path = tmp_path / "short.ply"
    path.write_text(ASCII_PLY.replace("0 1 0.5\n", ""))
    with pytest.raises(MalformedFileError):
        read_point_cloud(path)


def test_empty_file_raises(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("# nothing here\n")
    with pytest.raises(EmptyAfterFilteringError):
        read_point_cloud(path)


def test_all_nan_raises(tmp_path):
    path = tmp_path / "nan.txt"
    path.write_text("nan nan nan\n")
    with pytest.raises(EmptyAfterFilteringError):
        read_point_cloud(path)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_point_cloud(tmp_path / "absent.ply")


class TestModelLibrary:
    def test_labels_and_lookup(self, tmp_path):
        write_point_cloud(tmp_path / "cube.ply", np.eye(3))
        (tmp_path / "can.xyz").write_text("0 0 0\n0 0 1\n0 1 0\n")
        (tmp_path / "notes.md").write_text("ignored")
        library = ModelLibrary(tmp_path)
        assert library.labels() == ["can", "cube"]
        assert len(library.get("can")) == 3
        assert library.get("cube") is library.get("cube")

    def test_unknown_label_is_none(self, tmp_path):
        library = ModelLibrary(tmp_path)
        assert library.get("mug") is None
        assert library.get(None) is None

    def test_missing_directory(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            ModelLibrary(tmp_path / "absent")
