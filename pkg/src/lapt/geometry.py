"""Frames, rigid transforms, and the pinhole camera model.

Conventions used throughout the package:

* Geometry is float64; frames are explicit string labels and every transform
  checks frame compatibility, so a chain applied in the wrong direction fails
  loudly instead of silently producing garbage.
* Camera frames are z-forward, x-right, y-down. Pixel (u, v) = (0, 0) is the
  center of the top-left pixel; a projection is in bounds when its
  nearest-integer pixel lies inside the image (ties round half-up).
* Points closer than ``Z_MIN`` to the camera plane are discarded before the
  perspective divide.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

Z_MIN = 1e-3

# Elementwise tolerance for the rotation-matrix invariants.
ROTATION_TOL = 1e-9


def _frozen_f64(value, shape, name):
    a = np.array(value, dtype=np.float64)
    if a.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {a.shape}")
    a.flags.writeable = False
    return a


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=np.float64)


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=np.float64)


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=np.float64)


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) transform mapping points in ``frame_from`` to ``frame_to``."""

    rotation: np.ndarray
    translation: np.ndarray
    frame_from: str
    frame_to: str

    def __post_init__(self):
        r = _frozen_f64(self.rotation, (3, 3), "rotation")
        t = _frozen_f64(self.translation, (3,), "translation")
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(t)):
            raise ValueError("transform entries must be finite")
        err = np.abs(r.T @ r - np.eye(3)).max()
        if err > ROTATION_TOL:
            raise ValueError(f"rotation is not orthonormal (max |R'R - I| = {err:.3e})")
        det = np.linalg.det(r)
        if abs(det - 1.0) > ROTATION_TOL:
            raise ValueError(f"rotation must have determinant +1, got {det!r}")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls, frame_from: str, frame_to: str | None = None) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3), frame_from, frame_to if frame_to is not None else frame_from)

    @classmethod
    def from_matrix(cls, matrix, frame_from: str, frame_to: str) -> "RigidTransform":
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {m.shape}")
        if not np.allclose(m[3], [0.0, 0.0, 0.0, 1.0], atol=1e-12):
            raise ValueError("bottom row of a rigid transform must be (0, 0, 0, 1)")
        return cls(m[:3, :3], m[:3, 3], frame_from, frame_to)

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def invert(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation, self.frame_to, self.frame_from)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply to an (N, 3) array of points, ignoring frame labels."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform equivalent to applying ``b`` first, then ``a``."""
    if a.frame_from != b.frame_to:
        raise ValueError(
            f"cannot compose: {a.frame_to}<-{a.frame_from} after {b.frame_to}<-{b.frame_from}"
        )
    return RigidTransform(
        a.rotation @ b.rotation,
        a.rotation @ b.translation + a.translation,
        b.frame_from,
        a.frame_to,
    )


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics; focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")

    @classmethod
    def from_matrix(cls, matrix, width: int, height: int) -> "CameraIntrinsics":
        k = np.asarray(matrix, dtype=np.float64)
        if k.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {k.shape}")
        if not np.allclose(k[[1, 2, 2], [0, 0, 1]], 0.0) or not np.isclose(k[2, 2], 1.0):
            raise ValueError("intrinsics must be upper triangular with bottom row (0, 0, 1)")
        return cls(k[0, 0], k[1, 1], k[0, 2], k[1, 2], width, height)

    def as_matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


def scale_intrinsics(intr: CameraIntrinsics, d_f: int) -> CameraIntrinsics:
    """Intrinsics of the image decimated by ``d_f``, preserving pixel-center rays.

    The low-resolution pixel (i, j) looks along the same ray as the center of
    its d_f x d_f window in the full-resolution image, which pins the
    principal point at (c + 0.5) / d_f - 0.5.
    """
    d_f = int(d_f)
    if d_f < 1:
        raise ValueError("decimation factor must be a positive integer")
    if intr.width % d_f or intr.height % d_f:
        raise ValueError(
            f"image size {intr.width}x{intr.height} not divisible by decimation factor {d_f}"
        )
    return CameraIntrinsics(
        intr.fx / d_f,
        intr.fy / d_f,
        (intr.cx + 0.5) / d_f - 0.5,
        (intr.cy + 0.5) / d_f - 0.5,
        intr.width // d_f,
        intr.height // d_f,
    )


@dataclass(frozen=True)
class PointCloud:
    """(N, 3) points in a named frame."""

    points: np.ndarray
    frame: str

    def __post_init__(self):
        p = np.array(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(p)):
            raise ValueError("point coordinates must be finite")
        p.flags.writeable = False
        object.__setattr__(self, "points", p)

    def __len__(self) -> int:
        return self.points.shape[0]


def transform_points(cloud: PointCloud, t: RigidTransform) -> PointCloud:
    if cloud.frame != t.frame_from:
        raise ValueError(
            f"cloud is in frame {cloud.frame!r} but transform expects {t.frame_from!r}"
        )
    return PointCloud(t.apply(cloud.points), t.frame_to)


class PixelProjection(NamedTuple):
    u: float
    v: float
    depth: float
    source_index: int


@dataclass(frozen=True)
class PixelProjections:
    """Batch of image-plane projections (struct of arrays).

    ``source_index[i]`` is the row of the originating cloud that produced
    projection i. Depths are camera-frame z and always positive.
    """

    u: np.ndarray
    v: np.ndarray
    depth: np.ndarray
    source_index: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        d = np.asarray(self.depth, dtype=np.float64)
        s = np.asarray(self.source_index, dtype=np.int64)
        if not (u.shape == v.shape == d.shape == s.shape) or u.ndim != 1:
            raise ValueError("projection fields must be equal-length 1-d arrays")
        if d.size and not np.all(d > 0):
            raise ValueError("projection depths must be positive")
        for name, a in (("u", u), ("v", v), ("depth", d), ("source_index", s)):
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return self.u.shape[0]

    def __getitem__(self, i: int) -> PixelProjection:
        return PixelProjection(
            float(self.u[i]), float(self.v[i]), float(self.depth[i]), int(self.source_index[i])
        )


def pixel_indices(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-integer pixel of continuous coordinates; ties round half-up."""
    return (
        np.floor(np.asarray(u) + 0.5).astype(np.int64),
        np.floor(np.asarray(v) + 0.5).astype(np.int64),
    )


def project_points(cloud: PointCloud, intr: CameraIntrinsics) -> PixelProjections:
    """Perspective-project camera-frame points onto the image plane.

    Points with z <= Z_MIN or whose nearest pixel falls outside the image are
    omitted; this filtering is the contract, not an error.
    """
    pts = cloud.points
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    front = z > Z_MIN
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(front, intr.fx * x / np.where(front, z, 1.0) + intr.cx, -1.0)
        v = np.where(front, intr.fy * y / np.where(front, z, 1.0) + intr.cy, -1.0)
    iu, iv = pixel_indices(u, v)
    keep = front & (iu >= 0) & (iu < intr.width) & (iv >= 0) & (iv < intr.height)
    idx = np.nonzero(keep)[0]
    return PixelProjections(u[idx], v[idx], z[idx], idx)


def unproject_pixel(u: float, v: float, depth: float, intr: CameraIntrinsics) -> np.ndarray:
    """Invert the pinhole projection at a known depth; returns a 3-vector."""
    if not np.isfinite(depth) or depth <= 0:
        raise ValueError(f"depth must be positive and finite, got {depth!r}")
    return np.array(
        [depth * (u - intr.cx) / intr.fx, depth * (v - intr.cy) / intr.fy, depth]
    )
