"""File formats: PLY clouds, pose CSV, correspondence CSV, metrics JSON.

PLY supports ASCII and binary little-endian with float or double scalars;
x, y, z are required, nx, ny, nz optional, other scalar vertex properties
are skipped.  Writers emit doubles with 17 significant digits (ASCII) so a
write/read cycle reproduces coordinates exactly.

Pose CSV rows are `frame_id,tx,ty,tz,qx,qy,qz,qw` with the quaternion
scalar-last on disk (scalar-first in memory); frame ids must increase
strictly and quaternions must be unit within 1e-6.
"""

from __future__ import annotations

import csv
import io as _io
import json
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import InputError, ParseError
from .geometry import Pose, Rotation
from .pointcloud import PointCloud
from .sampling import Trajectory

POSE_HEADER = ["frame_id", "tx", "ty", "tz", "qx", "qy", "qz", "qw"]
CORRESPONDENCE_HEADER = ["src_index", "dst_index"]

_PLY_SCALARS = {
    "float": ("<f4", 4), "float32": ("<f4", 4),
    "double": ("<f8", 8), "float64": ("<f8", 8),
    "char": ("<i1", 1), "int8": ("<i1", 1),
    "uchar": ("<u1", 1), "uint8": ("<u1", 1),
    "short": ("<i2", 2), "int16": ("<i2", 2),
    "ushort": ("<u2", 2), "uint16": ("<u2", 2),
    "int": ("<i4", 4), "int32": ("<i4", 4),
    "uint": ("<u4", 4), "uint32": ("<u4", 4),
}


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@contextmanager
def _file_errors(path, action: str):
    try:
        yield
    except OSError as exc:
        raise InputError(f"cannot {action} {path}: {exc.strerror or exc}") from exc


def read_ply(path) -> PointCloud:
    with _file_errors(path, "read"):
        data = Path(path).read_bytes()
    stream = _io.BytesIO(data)

    def read_line() -> tuple[str, int]:
        offset = stream.tell()
        raw = stream.readline()
        if not raw:
            raise ParseError("unexpected end of header", offset=offset)
        return raw.decode("ascii", errors="replace").strip(), offset

    line, offset = read_line()
    if line != "ply":
        raise ParseError("not a PLY file (missing 'ply' magic)", offset=offset)
    line, offset = read_line()
    parts = line.split()
    if len(parts) != 3 or parts[0] != "format":
        raise ParseError("malformed format line", offset=offset)
    if parts[1] == "ascii":
        binary = False
    elif parts[1] == "binary_little_endian":
        binary = True
    else:
        raise ParseError(f"unsupported PLY format {parts[1]!r}", offset=offset)

    elements: list[tuple[str, int, list[tuple[str, str]]]] = []
    while True:
        line, offset = read_line()
        if line == "end_header":
            break
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "element":
            if len(parts) != 3:
                raise ParseError("malformed element line", offset=offset)
            try:
                count = int(parts[2])
            except ValueError:
                raise ParseError("element count is not an integer", offset=offset)
            elements.append((parts[1], count, []))
        elif parts[0] == "property":
            if not elements:
                raise ParseError("property before any element", offset=offset)
            if parts[1] == "list":
                if binary and not any(name == "vertex" for name, _, _ in elements):
                    raise ParseError("unsupported list property layout before vertex data",
                                     offset=offset)
                elements[-1][2].append(("__list__", " ".join(parts[2:])))
            elif len(parts) == 3:
                elements[-1][2].append((parts[2], parts[1]))
            else:
                raise ParseError("malformed property line", offset=offset)
        else:
            raise ParseError(f"unknown header keyword {parts[0]!r}", offset=offset)

    vertex = next(((n, c, p) for n, c, p in elements if n == "vertex"), None)
    if vertex is None:
        raise ParseError("no vertex element in header", offset=stream.tell())
    _, count, props = vertex
    if any(name == "__list__" for name, _ in props):
        raise ParseError("list properties in the vertex element are not supported",
                         offset=stream.tell())
    names = [name for name, _ in props]
    for required in ("x", "y", "z"):
        if required not in names:
            raise ParseError(f"vertex element is missing required property {required!r}",
                             offset=stream.tell())
    has_normals = all(n in names for n in ("nx", "ny", "nz"))
    if any(n in names for n in ("nx", "ny", "nz")) and not has_normals:
        raise ParseError("vertex normals must include all of nx, ny, nz",
                         offset=stream.tell())

    if elements and elements[0][0] != "vertex":
        before = elements[:next(i for i, e in enumerate(elements) if e[0] == "vertex")]
    else:
        before = []

    if binary:
        for name, n, eprops in before:
            if any(p == "__list__" for p, _ in eprops):
                raise ParseError(f"cannot skip element {name!r} with list properties",
                                 offset=stream.tell())
            stream.seek(sum(_scalar(p, t, stream)[1] for p, t in eprops) * n, 1)
        try:
            row_dtype = np.dtype([(nm, _scalar(nm, ty, stream)[0]) for nm, ty in props])
        except ValueError:
            raise ParseError("invalid vertex property layout", offset=stream.tell())
        payload_offset = stream.tell()
        need = row_dtype.itemsize * count
        payload = stream.read(need)
        if len(payload) < need:
            raise ParseError(
                f"truncated vertex payload: expected {need} bytes, got {len(payload)}",
                offset=payload_offset + len(payload))
        rows = np.frombuffer(payload, dtype=row_dtype, count=count)
        cols = {nm: rows[nm].astype(np.float64) for nm in ("x", "y", "z")}
        if has_normals:
            cols.update({nm: rows[nm].astype(np.float64) for nm in ("nx", "ny", "nz")})
    else:
        for name, n, eprops in before:
            for _ in range(n):
                read_line()
        want = {"x", "y", "z"} | ({"nx", "ny", "nz"} if has_normals else set())
        col_idx = {nm: i for i, (nm, _) in enumerate(props) if nm in want}
        arr = np.empty((count, len(col_idx)))
        key_order = list(col_idx)
        for r in range(count):
            offset = stream.tell()
            raw = stream.readline()
            if not raw:
                raise ParseError(f"truncated vertex payload: {count - r} rows missing",
                                 offset=offset)
            tokens = raw.split()
            if len(tokens) < len(props):
                raise ParseError("vertex row has too few values", offset=offset)
            try:
                for j, nm in enumerate(key_order):
                    arr[r, j] = float(tokens[col_idx[nm]])
            except ValueError:
                raise ParseError("vertex row has non-numeric value", offset=offset)
        cols = {nm: arr[:, j] for j, nm in enumerate(key_order)}

    points = np.column_stack([cols["x"], cols["y"], cols["z"]])
    normals = np.column_stack([cols["nx"], cols["ny"], cols["nz"]]) if has_normals else None
    return PointCloud(points, normals)


def _scalar(name: str, type_name: str, stream) -> tuple[str, int]:
    if name == "__list__" or type_name not in _PLY_SCALARS:
        raise ParseError(f"unsupported property type {type_name!r} for {name!r}",
                         offset=stream.tell())
    return _PLY_SCALARS[type_name]


def write_ply(cloud: PointCloud, path, binary: bool = False) -> None:
    path = Path(path)
    has_normals = cloud.normals is not None
    header = ["ply",
              "format binary_little_endian 1.0" if binary else "format ascii 1.0",
              f"element vertex {len(cloud)}"]
    header += [f"property double {n}" for n in ("x", "y", "z")]
    if has_normals:
        header += [f"property double {n}" for n in ("nx", "ny", "nz")]
    header.append("end_header")

    rows = np.hstack([cloud.points, cloud.normals]) if has_normals else cloud.points
    with _file_errors(path, "write"), open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            f.write(np.ascontiguousarray(rows, dtype="<f8").tobytes())
        else:
            for row in rows:
                f.write((" ".join(_fmt(v) for v in row) + "\n").encode("ascii"))


def read_poses(path) -> list[tuple[int, Pose]]:
    """Pose CSV rows as (frame_id, Pose); ids must increase strictly."""
    with _file_errors(path, "read"), open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("pose file is empty", row=0)
        if [h.strip() for h in header] != POSE_HEADER:
            raise ParseError(f"pose header must be {','.join(POSE_HEADER)}", row=0)
        out: list[tuple[int, Pose]] = []
        last_id = None
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != 8:
                raise ParseError("pose row must have 8 fields", row=row_no)
            try:
                fid = int(row[0])
                vals = [float(v) for v in row[1:]]
            except ValueError:
                raise ParseError("pose row has non-numeric value", row=row_no)
            if last_id is not None and fid <= last_id:
                raise ParseError(
                    f"frame_id {fid} does not increase (previous {last_id})", row=row_no)
            last_id = fid
            qx, qy, qz, qw = vals[3:]
            norm = np.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
            if abs(norm - 1.0) > 1e-6:
                raise ParseError(f"quaternion norm {norm:.8f} is not unit", row=row_no)
            pose = Pose(Rotation(np.array([qw, qx, qy, qz])), np.array(vals[:3]))
            out.append((fid, pose))
    return out


def write_poses(poses, path) -> None:
    """Write (frame_id, Pose) pairs or a Trajectory as pose CSV."""
    if isinstance(poses, Trajectory):
        poses = list(poses.poses)
    with _file_errors(path, "write"), open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(POSE_HEADER)
        for fid, pose in poses:
            w, x, y, z = pose.rotation.wxyz
            tx, ty, tz = pose.translation
            writer.writerow([fid] + [_fmt(v) for v in (tx, ty, tz, x, y, z, w)])


def read_correspondences(path) -> tuple[np.ndarray, np.ndarray]:
    with _file_errors(path, "read"), open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("correspondence file is empty", row=0)
        if [h.strip() for h in header] != CORRESPONDENCE_HEADER:
            raise ParseError(
                f"correspondence header must be {','.join(CORRESPONDENCE_HEADER)}", row=0)
        src, dst = [], []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            try:
                src.append(int(row[0]))
                dst.append(int(row[1]))
            except (ValueError, IndexError):
                raise ParseError("correspondence row must be two integers", row=row_no)
    return np.array(src, dtype=np.intp), np.array(dst, dtype=np.intp)


def write_correspondences(src_indices, dst_indices, path) -> None:
    with _file_errors(path, "write"), open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CORRESPONDENCE_HEADER)
        for s, d in zip(src_indices, dst_indices):
            writer.writerow([int(s), int(d)])


def write_metrics(metrics: dict, path) -> None:
    """Flat metrics dict as deterministically formatted JSON."""
    with _file_errors(path, "write"):
        Path(path).write_text(json.dumps(metrics, sort_keys=True, indent=2) + "\n")


def read_metrics(path) -> dict:
    with _file_errors(path, "read"):
        return json.loads(Path(path).read_text())
