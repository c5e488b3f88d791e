"""File formats: the shared binary tensor container plus JSON loaders.

One container serves point clouds (N x 3 float64), depth images, feature
maps, and grids. Layout, all little-endian:

    bytes 0..7    magic "LAPTTENS"
    bytes 8..11   uint32 dtype code: 1 = float32, 2 = float64, 3 = uint8
    bytes 12..15  uint32 ndim
    then          ndim x uint64 dims
    then          payload, row-major

The header is 16 + 8*ndim bytes, so the payload starts 8-byte aligned and
hosts that map the file can view float64 data without copying. Writers are
atomic (temp file + rename) and reading back what was written is
byte-identical.

Loader errors are ValueError with messages naming the offending file and
field; OSError is left to the caller to classify as an I/O failure.
"""

import json
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .bev import GridConfig
from .geometry import CameraIntrinsics, PointCloud, RigidTransform
from .groundtruth import Box3D, MapPolygon
from .simulate import LidarSpec, Scene, SceneCamera

MAGIC = b"LAPTTENS"

_CODE_OF_DTYPE = {np.dtype(np.float32): 1, np.dtype(np.float64): 2, np.dtype(np.uint8): 3}
_DTYPE_OF_CODE = {1: np.dtype("<f4"), 2: np.dtype("<f8"), 3: np.dtype("u1")}


def encode_tensor(array: np.ndarray) -> bytes:
    a = np.ascontiguousarray(array)
    code = _CODE_OF_DTYPE.get(a.dtype.newbyteorder("="))
    if code is None:
        raise ValueError(
            f"unsupported tensor dtype {a.dtype}; use float32, float64, or uint8"
        )
    header = MAGIC + struct.pack("<II", code, a.ndim)
    header += struct.pack(f"<{a.ndim}Q", *a.shape)
    payload = a.astype(a.dtype.newbyteorder("<"), copy=False).tobytes()
    return header + payload


def decode_tensor(data: bytes, source: str = "tensor") -> np.ndarray:
    if data[:8] != MAGIC:
        raise ValueError(f"{source}: bad magic, not a tensor file")
    if len(data) < 16:
        raise ValueError(f"{source}: truncated header")
    code, ndim = struct.unpack_from("<II", data, 8)
    dtype = _DTYPE_OF_CODE.get(code)
    if dtype is None:
        raise ValueError(f"{source}: unknown dtype code {code}")
    end = 16 + 8 * ndim
    if len(data) < end:
        raise ValueError(f"{source}: truncated dims")
    dims = struct.unpack_from(f"<{ndim}Q", data, 16)
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    if len(data) != end + count * dtype.itemsize:
        raise ValueError(
            f"{source}: payload length {len(data) - end} does not match dims {dims}"
        )
    a = np.frombuffer(data, dtype=dtype, count=count, offset=end).reshape(dims)
    return a.astype(dtype.newbyteorder("="), copy=True)


def atomic_write_bytes(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_tensor(path: str, array: np.ndarray) -> None:
    atomic_write_bytes(path, encode_tensor(array))


def read_tensor(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_tensor(f.read(), source=path)


def write_json(path: str, obj) -> None:
    atomic_write_bytes(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode())


def read_json(path: str):
    with open(path, "rb") as f:
        try:
            return json.loads(f.read())
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: invalid JSON ({e})") from e


# ---------------------------------------------------------------------------
# point cloud interchange


def write_xyz(path: str, cloud: PointCloud) -> None:
    lines = [f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}" for p in cloud.points]
    atomic_write_bytes(path, ("\n".join(lines) + ("\n" if lines else "")).encode())


def read_xyz(path: str, frame: str = "lidar") -> PointCloud:
    points = []
    with open(path, "rb") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.decode().strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 3:
                raise ValueError(f"{path}: line {lineno}: expected 'x y z'")
            try:
                points.append([float(parts[0]), float(parts[1]), float(parts[2])])
            except ValueError as e:
                raise ValueError(f"{path}: line {lineno}: {e}") from e
    return PointCloud(np.array(points).reshape(-1, 3), frame)


def write_ply(path: str, cloud: PointCloud) -> None:
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"element vertex {len(cloud)}\n"
        "property float x\n"
        "property float y\n"
        "property float z\n"
        "end_header\n"
    )
    payload = cloud.points.astype("<f4").tobytes()
    atomic_write_bytes(path, header.encode("ascii") + payload)


def read_ply(path: str, frame: str = "lidar") -> PointCloud:
    """Binary little-endian PLY with float x, y, z vertex properties."""
    with open(path, "rb") as f:
        data = f.read()
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply\n") or end < 0:
        raise ValueError(f"{path}: not a PLY file")
    header = data[:end].decode("ascii", errors="replace").splitlines()
    if "format binary_little_endian 1.0" not in header:
        raise ValueError(f"{path}: only binary_little_endian 1.0 PLY is supported")
    count = None
    props = []
    for line in header:
        if line.startswith("element vertex"):
            count = int(line.split()[-1])
        elif line.startswith("element ") and count is not None:
            break
        elif line.startswith("property") and count is not None:
            kind, name = line.split()[1:3]
            if kind != "float":
                raise ValueError(f"{path}: vertex property {name!r} must be float")
            props.append(name)
    if count is None:
        raise ValueError(f"{path}: missing vertex element")
    if props[:3] != ["x", "y", "z"]:
        raise ValueError(f"{path}: vertex properties must start with x, y, z; got {props}")
    body = data[end + len(b"end_header\n") :]
    expected = count * 4 * len(props)
    if len(body) < expected:
        raise ValueError(f"{path}: vertex data truncated")
    verts = np.frombuffer(body, dtype="<f4", count=count * len(props))
    return PointCloud(verts.reshape(count, len(props))[:, :3].astype(np.float64), frame)


def read_cloud(path: str, frame: str = "lidar") -> PointCloud:
    """Dispatch on extension: .tens (N x 3 float64), .xyz text, .ply binary."""
    ext = os.path.splitext(path)[1].lower()
    if ext == ".xyz":
        return read_xyz(path, frame)
    if ext == ".ply":
        return read_ply(path, frame)
    a = read_tensor(path)
    if a.ndim != 2 or a.shape[1] != 3 or a.dtype != np.float64:
        raise ValueError(f"{path}: point cloud tensor must be (N, 3) float64, got {a.shape} {a.dtype}")
    return PointCloud(a, frame)


# ---------------------------------------------------------------------------
# calibration / annotations / scenes


@dataclass(frozen=True)
class CameraCalibration:
    name: str
    intrinsics: CameraIntrinsics
    extrinsics: RigidTransform  # vehicle -> camera


@dataclass(frozen=True)
class RigCalibration:
    cameras: tuple[CameraCalibration, ...]
    lidar: RigidTransform  # vehicle -> lidar

    def camera(self, name: str) -> CameraCalibration:
        for cam in self.cameras:
            if cam.name == name:
                return cam
        raise ValueError(f"calibration has no camera named {name!r}")


def _matrix(values, rows, cols, where):
    try:
        m = np.asarray([float(v) for v in values], dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise ValueError(f"{where}: matrix entries must be numbers ({e})") from e
    if m.size != rows * cols:
        raise ValueError(f"{where}: expected {rows * cols} row-major entries, got {m.size}")
    return m.reshape(rows, cols)


def load_calibration(path: str) -> RigCalibration:
    doc = read_json(path)
    if not isinstance(doc, dict) or "cameras" not in doc or "lidar" not in doc:
        raise ValueError(f"{path}: calibration must have 'cameras' and 'lidar'")
    cameras = []
    names = set()
    for i, entry in enumerate(doc["cameras"]):
        where = f"{path}: cameras[{i}]"
        for key in ("name", "intrinsics", "extrinsics", "width", "height"):
            if key not in entry:
                raise ValueError(f"{where}: missing field {key!r}")
        name = str(entry["name"])
        if name in names:
            raise ValueError(f"{where}: duplicate camera name {name!r}")
        names.add(name)
        k = _matrix(entry["intrinsics"], 3, 3, f"{where}.intrinsics")
        try:
            intr = CameraIntrinsics.from_matrix(k, int(entry["width"]), int(entry["height"]))
        except ValueError as e:
            raise ValueError(f"{where}.intrinsics: {e}") from e
        m = _matrix(entry["extrinsics"], 4, 4, f"{where}.extrinsics")
        try:
            extr = RigidTransform.from_matrix(m, "vehicle", name)
        except ValueError as e:
            raise ValueError(f"{where}.extrinsics: {e}") from e
        cameras.append(CameraCalibration(name, intr, extr))
    lid = doc["lidar"]
    if "extrinsics" not in lid:
        raise ValueError(f"{path}: lidar: missing field 'extrinsics'")
    m = _matrix(lid["extrinsics"], 4, 4, f"{path}: lidar.extrinsics")
    try:
        lidar = RigidTransform.from_matrix(m, "vehicle", "lidar")
    except ValueError as e:
        raise ValueError(f"{path}: lidar.extrinsics: {e}") from e
    return RigCalibration(tuple(cameras), lidar)


def calibration_to_dict(rig: RigCalibration) -> dict:
    return {
        "cameras": [
            {
                "name": cam.name,
                "intrinsics": [float(v) for v in cam.intrinsics.as_matrix().ravel()],
                "extrinsics": [float(v) for v in cam.extrinsics.as_matrix().ravel()],
                "width": cam.intrinsics.width,
                "height": cam.intrinsics.height,
            }
            for cam in rig.cameras
        ],
        "lidar": {"extrinsics": [float(v) for v in rig.lidar.as_matrix().ravel()]},
    }


def _parse_box(entry, where) -> Box3D:
    for key in ("center", "size", "yaw", "label"):
        if key not in entry:
            raise ValueError(f"{where}: missing field {key!r}")
    try:
        return Box3D(
            np.asarray(entry["center"], dtype=np.float64),
            tuple(float(v) for v in entry["size"]),
            float(entry["yaw"]),
            str(entry["label"]),
        )
    except (TypeError, ValueError) as e:
        raise ValueError(f"{where}: {e}") from e


def load_annotations(path: str) -> tuple[list[Box3D], list[MapPolygon]]:
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: annotations must be a JSON object")
    boxes = [
        _parse_box(e, f"{path}: boxes[{i}]") for i, e in enumerate(doc.get("boxes", []))
    ]
    polygons = []
    for i, e in enumerate(doc.get("polygons", [])):
        where = f"{path}: polygons[{i}]"
        for key in ("vertices", "label"):
            if key not in e:
                raise ValueError(f"{where}: missing field {key!r}")
        try:
            polygons.append(
                MapPolygon(np.asarray(e["vertices"], dtype=np.float64), str(e["label"]))
            )
        except (TypeError, ValueError) as e2:
            raise ValueError(f"{where}: {e2}") from e2
    return boxes, polygons


def load_grouping(path: str) -> dict[str, list[str]]:
    doc = read_json(path)
    if not isinstance(doc, dict) or not all(
        isinstance(v, list) and all(isinstance(s, str) for s in v) for v in doc.values()
    ):
        raise ValueError(f"{path}: class grouping must map target class to a list of labels")
    return {str(k): list(v) for k, v in doc.items()}


def load_scene(path: str) -> tuple[Scene, LidarSpec]:
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: scene must be a JSON object")
    for key in ("ground_height", "lidar", "cameras"):
        if key not in doc:
            raise ValueError(f"{path}: missing field {key!r}")
    boxes = [
        _parse_box(e, f"{path}: boxes[{i}]") for i, e in enumerate(doc.get("boxes", []))
    ]
    lid = doc["lidar"]
    for key in ("pose", "spec"):
        if key not in lid:
            raise ValueError(f"{path}: lidar: missing field {key!r}")
    pose_m = _matrix(lid["pose"], 4, 4, f"{path}: lidar.pose")
    lidar = RigidTransform.from_matrix(pose_m, "vehicle", "lidar")
    spec_doc = lid["spec"]
    for key in ("n_azimuth", "elevations", "max_range"):
        if key not in spec_doc:
            raise ValueError(f"{path}: lidar.spec: missing field {key!r}")
    try:
        spec = LidarSpec(
            int(spec_doc["n_azimuth"]),
            tuple(float(e) for e in spec_doc["elevations"]),
            float(spec_doc["max_range"]),
        )
    except (TypeError, ValueError) as e:
        raise ValueError(f"{path}: lidar.spec: {e}") from e
    cameras = []
    for i, entry in enumerate(doc["cameras"]):
        where = f"{path}: cameras[{i}]"
        for key in ("name", "pose", "intrinsics"):
            if key not in entry:
                raise ValueError(f"{where}: missing field {key!r}")
        pose = RigidTransform.from_matrix(
            _matrix(entry["pose"], 4, 4, f"{where}.pose"), "vehicle", str(entry["name"])
        )
        intr_doc = entry["intrinsics"]
        for key in ("fx", "fy", "cx", "cy", "width", "height"):
            if key not in intr_doc:
                raise ValueError(f"{where}.intrinsics: missing field {key!r}")
        try:
            intr = CameraIntrinsics(
                float(intr_doc["fx"]),
                float(intr_doc["fy"]),
                float(intr_doc["cx"]),
                float(intr_doc["cy"]),
                int(intr_doc["width"]),
                int(intr_doc["height"]),
            )
        except (TypeError, ValueError) as e:
            raise ValueError(f"{where}.intrinsics: {e}") from e
        cameras.append(SceneCamera(str(entry["name"]), pose, intr))
    try:
        scene = Scene(float(doc["ground_height"]), tuple(boxes), lidar, tuple(cameras))
    except (TypeError, ValueError) as e:
        raise ValueError(f"{path}: {e}") from e
    return scene, spec


def scene_calibration(scene: Scene) -> RigCalibration:
    """Calibration JSON content implied by a simulated scene's sensor poses."""
    cams = tuple(
        CameraCalibration(cam.name, cam.intrinsics, cam.pose) for cam in scene.cameras
    )
    return RigCalibration(cams, scene.lidar_pose)


# ---------------------------------------------------------------------------
# renders (debugging visualizations)


def depth_to_png16(values: np.ndarray) -> bytes:
    """16-bit grayscale render of a depth image; the sentinel maps to black.

    Finite depths are scaled so the farthest return is full white.
    """
    from PIL import Image
    import io

    finite = np.isfinite(values)
    out = np.zeros(values.shape, dtype=np.uint16)
    if finite.any():
        top = values[finite].max()
        if top > 0:
            out[finite] = np.round(values[finite] / top * 65535.0).astype(np.uint16)
    buf = io.BytesIO()
    Image.fromarray(out).save(buf, format="PNG")
    return buf.getvalue()


def mask_to_png(mask: np.ndarray) -> bytes:
    from PIL import Image
    import io

    buf = io.BytesIO()
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def rgb_to_png(image: np.ndarray) -> bytes:
    from PIL import Image
    import io

    buf = io.BytesIO()
    Image.fromarray(image).save(buf, format="PNG")
    return buf.getvalue()
