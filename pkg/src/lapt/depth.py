"""Sparse z-buffered depth images and their min-pooled low-resolution form.

Pixels with no LiDAR return hold +inf. The sentinel makes min-pooling
mask-free and can never be confused with a valid near depth.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import (
    CameraIntrinsics,
    PixelProjections,
    PointCloud,
    RigidTransform,
    compose,
    pixel_indices,
    project_points,
    transform_points,
)

SENTINEL = np.inf


def _frozen_depth_values(values, name):
    a = np.array(values, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} values must be 2-d, got shape {a.shape}")
    finite = np.isfinite(a)
    if np.any(np.isnan(a)) or np.any(a[finite] <= 0):
        raise ValueError(f"{name} values must be positive (or the +inf sentinel)")
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class DepthImage:
    """Per-pixel nearest depth in meters; +inf where no point projected."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_depth_values(self.values, "depth image"))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LowResDepth:
    """Depth image decimated by ``d_f`` via window minimum."""

    values: np.ndarray
    d_f: int

    def __post_init__(self):
        if int(self.d_f) < 1:
            raise ValueError("decimation factor must be a positive integer")
        object.__setattr__(self, "d_f", int(self.d_f))
        object.__setattr__(self, "values", _frozen_depth_values(self.values, "low-res depth"))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def rasterize_depth(projections: PixelProjections, width: int, height: int) -> DepthImage:
    """Z-buffer projections into a width x height image, keeping the nearest.

    Output is independent of input order: ties at a pixel hold equal values.
    """
    iu, iv = pixel_indices(projections.u, projections.v)
    if iu.size and (
        iu.min() < 0 or iu.max() >= width or iv.min() < 0 or iv.max() >= height
    ):
        raise ValueError("projections must be in bounds for the target image")
    out = np.full((height, width), SENTINEL)
    _kernels.scatter_min(iu, iv, projections.depth, out)
    return DepthImage(out)


def minpool(d: DepthImage, d_f: int) -> LowResDepth:
    """Minimum over each d_f x d_f window; all-sentinel windows stay +inf."""
    d_f = int(d_f)
    if d_f < 1:
        raise ValueError("decimation factor must be a positive integer")
    if d.height % d_f or d.width % d_f:
        raise ValueError(
            f"depth image {d.width}x{d.height} not divisible by decimation factor {d_f}"
        )
    return LowResDepth(_kernels.minpool2d(d.values, d_f), d_f)


def depth_for_camera(
    cloud: PointCloud,
    lidar_extrinsics: RigidTransform,
    camera_extrinsics: RigidTransform,
    intr: CameraIntrinsics,
    d_f: int,
) -> tuple[DepthImage, LowResDepth]:
    """LiDAR cloud to (full-res, min-pooled) depth for one camera.

    Extrinsics map vehicle->sensor, so the chain camera_extrinsics o
    lidar_extrinsics^-1 carries LiDAR-frame points into the camera frame.
    """
    lidar_to_cam = compose(camera_extrinsics, lidar_extrinsics.invert())
    cam_cloud = transform_points(cloud, lidar_to_cam)
    proj = project_points(cam_cloud, intr)
    full = rasterize_depth(proj, intr.width, intr.height)
    return full, minpool(full, d_f)
