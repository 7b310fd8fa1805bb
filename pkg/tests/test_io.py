import numpy as np
import pytest

from lapscan.errors import InputError, ParseError
from lapscan.geometry import Pose, Rotation, random_pose
from lapscan.io import (read_correspondences, read_metrics, read_ply, read_poses,
                        write_correspondences, write_metrics, write_ply,
                        write_poses)
from lapscan.pointcloud import PointCloud
from lapscan.sampling import Trajectory


def _random_cloud(rng, n=1000, with_normals=True):
    pts = rng.normal(size=(n, 3)) * 30
    normals = None
    if with_normals:
        normals = rng.normal(size=(n, 3))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return PointCloud(pts, normals)


@pytest.mark.parametrize("binary", [False, True])
@pytest.mark.parametrize("with_normals", [False, True])
def test_ply_round_trip(tmp_path, rng, binary, with_normals):
    cloud = _random_cloud(rng, with_normals=with_normals)
    path = tmp_path / "c.ply"
    write_ply(cloud, path, binary=binary)
    back = read_ply(path)
    np.testing.assert_array_equal(back.points, cloud.points)
    if with_normals:
        np.testing.assert_array_equal(back.normals, cloud.normals)
    else:
        assert back.normals is None


def test_ply_ascii_and_binary_agree(tmp_path, rng):
    cloud = _random_cloud(rng, n=200)
    write_ply(cloud, tmp_path / "a.ply", binary=False)
    write_ply(cloud, tmp_path / "b.ply", binary=True)
    a = read_ply(tmp_path / "a.ply")
    b = read_ply(tmp_path / "b.ply")
    np.testing.assert_array_equal(a.points, b.points)
    np.testing.assert_array_equal(a.normals, b.normals)


def test_ply_write_is_byte_deterministic(tmp_path, rng):
    cloud = _random_cloud(rng, n=100)
    write_ply(cloud, tmp_path / "a.ply")
    write_ply(cloud, tmp_path / "b.ply")
    assert (tmp_path / "a.ply").read_bytes() == (tmp_path / "b.ply").read_bytes()


def test_ply_missing_z_property(tmp_path):
    text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n0 0\n"
    path = tmp_path / "bad.ply"
    path.write_text(text)
    with pytest.raises(ParseError, match="'z'"):
        read_ply(path)


def test_ply_float32_binary(tmp_path):
    pts = np.array([[1.5, -2.25, 3.0]], dtype="<f4")
    header = ("ply\nformat binary_little_endian 1.0\nelement vertex 1\n"
              "property float x\nproperty float y\nproperty float z\nend_header\n")
    path = tmp_path / "f32.ply"
    path.write_bytes(header.encode() + pts.tobytes())
    cloud = read_ply(path)
    np.testing.assert_array_equal(cloud.points, pts.astype(np.float64))


def test_ply_skips_extra_scalar_properties(tmp_path):
    text = ("ply\nformat ascii 1.0\nelement vertex 2\n"
            "property float x\nproperty float y\nproperty float z\n"
            "property uchar red\nend_header\n"
            "1 2 3 255\n4 5 6 0\n")
    path = tmp_path / "extra.ply"
    path.write_text(text)
    cloud = read_ply(path)
    np.testing.assert_array_equal(cloud.points, [[1, 2, 3], [4, 5, 6]])


def test_ply_truncated_payload_reports_offset(tmp_path):
    text = ("ply\nformat ascii 1.0\nelement vertex 3\n"
            "property float x\nproperty float y\nproperty float z\nend_header\n"
            "1 2 3\n")
    path = tmp_path / "trunc.ply"
    path.write_text(text)
    with pytest.raises(ParseError, match="byte offset"):
        read_ply(path)


def test_ply_truncated_binary_payload(tmp_path):
    header = ("ply\nformat binary_little_endian 1.0\nelement vertex 2\n"
              "property double x\nproperty double y\nproperty double z\nend_header\n")
    path = tmp_path / "trunc.ply"
    path.write_bytes(header.encode() + np.zeros(3).tobytes())  # one row missing
    with pytest.raises(ParseError, match="truncated"):
        read_ply(path)


def test_ply_bad_magic_and_format(tmp_path):
    path = tmp_path / "bad.ply"
    path.write_text("plyx\n")
    with pytest.raises(ParseError, match="magic"):
        read_ply(path)
    path.write_text("ply\nformat binary_big_endian 1.0\nend_header\n")
    with pytest.raises(ParseError, match="unsupported PLY format"):
        read_ply(path)


def test_ply_list_property_in_vertex_rejected(tmp_path):
    text = ("ply\nformat ascii 1.0\nelement vertex 1\n"
            "property float x\nproperty float y\nproperty float z\n"
            "property list uchar int neighbors\nend_header\n1 2 3 0\n")
    path = tmp_path / "list.ply"
    path.write_text(text)
    with pytest.raises(ParseError, match="list"):
        read_ply(path)


def test_ply_partial_normals_rejected(tmp_path):
    text = ("ply\nformat ascii 1.0\nelement vertex 1\n"
            "property float x\nproperty float y\nproperty float z\n"
            "property float nx\nend_header\n1 2 3 0\n")
    path = tmp_path / "pn.ply"
    path.write_text(text)
    with pytest.raises(ParseError, match="nx, ny, nz"):
        read_ply(path)


def test_ply_missing_file():
    with pytest.raises(InputError, match="cannot read"):
        read_ply("/nonexistent/cloud.ply")


def test_pose_csv_identity_row(tmp_path):
    path = tmp_path / "p.csv"
    write_poses([(0, Pose.identity())], path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "frame_id,tx,ty,tz,qx,qy,qz,qw"
    assert lines[1] == "0,0,0,0,0,0,0,1"


def test_pose_csv_round_trip(tmp_path, rng):
    poses = [(i * 3, random_pose(rng)) for i in range(20)]
    path = tmp_path / "t.csv"
    write_poses(poses, path)
    back = read_poses(path)
    assert [fid for fid, _ in back] == [fid for fid, _ in poses]
    for (_, a), (_, b) in zip(back, poses):
        np.testing.assert_array_equal(a.translation, b.translation)
        np.testing.assert_array_equal(a.rotation.wxyz, b.rotation.wxyz)
    # A second write of what was read reproduces the file byte for byte.
    path2 = tmp_path / "t2.csv"
    write_poses(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_pose_csv_accepts_trajectory(tmp_path, rng):
    traj = Trajectory(poses=tuple((i, random_pose(rng)) for i in range(5)))
    path = tmp_path / "traj.csv"
    write_poses(traj, path)
    assert len(read_poses(path)) == 5


def test_pose_csv_rejects_non_increasing_ids(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("frame_id,tx,ty,tz,qx,qy,qz,qw\n1,0,0,0,0,0,0,1\n0,0,0,0,0,0,0,1\n")
    with pytest.raises(ParseError, match="row 2"):
        read_poses(path)
    path.write_text("frame_id,tx,ty,tz,qx,qy,qz,qw\n1,0,0,0,0,0,0,1\n1,0,0,0,0,0,0,1\n")
    with pytest.raises(ParseError, match="does not increase"):
        read_poses(path)


def test_pose_csv_rejects_non_unit_quaternion(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("frame_id,tx,ty,tz,qx,qy,qz,qw\n0,0,0,0,0,0,0,2\n")
    with pytest.raises(ParseError, match="not unit"):
        read_poses(path)


def test_pose_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("frame,tx,ty,tz,qx,qy,qz,qw\n")
    with pytest.raises(ParseError, match="header"):
        read_poses(path)


def test_correspondences_round_trip(tmp_path):
    path = tmp_path / "c.csv"
    write_correspondences([0, 5, 7], [2, 1, 9], path)
    src, dst = read_correspondences(path)
    np.testing.assert_array_equal(src, [0, 5, 7])
    np.testing.assert_array_equal(dst, [2, 1, 9])
    assert path.read_text().splitlines()[0] == "src_index,dst_index"


def test_metrics_json_deterministic(tmp_path):
    payload = {"chamfer_mm": 0.123456789, "rmse_mm": 1.0 / 3.0}
    write_metrics(payload, tmp_path / "a.json")
    write_metrics(payload, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert read_metrics(tmp_path / "a.json") == payload
