"""Synthetic-scene oracle: analytic raycasting with exactly known geometry.

Scenes are a horizontal ground plane plus oriented boxes. A spinning-LiDAR
model enumerates rays elevation-major, azimuth-minor, so simulated clouds are
reproducible byte for byte; cameras get dense per-pixel depth renders from
the same surfaces, which is what makes end-to-end exactness tests possible.
"""

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .depth import DepthImage
from .geometry import CameraIntrinsics, PointCloud, RigidTransform
from .groundtruth import Box3D

# Surface-id palette for the synthetic RGB render (ground, then boxes).
_SKY_RGB = (0, 0, 0)
_GROUND_RGB = (90, 90, 90)
_BOX_PALETTE = [
    (200, 60, 60),
    (60, 180, 60),
    (70, 90, 220),
    (210, 180, 40),
    (180, 60, 200),
    (40, 200, 200),
]


@dataclass(frozen=True)
class LidarSpec:
    """Spinning-LiDAR ray pattern: one ray per (elevation, azimuth) pair.

    Azimuth k sweeps 2*pi*k/n_azimuth about the sensor z axis; elevation
    tilts toward +z. Positive elevation points toward the sensor's +z side.
    """

    n_azimuth: int
    elevations: tuple[float, ...]
    max_range: float

    def __post_init__(self):
        if int(self.n_azimuth) < 1:
            raise ValueError("n_azimuth must be at least 1")
        if not self.max_range > 0:
            raise ValueError("max_range must be positive")
        object.__setattr__(self, "n_azimuth", int(self.n_azimuth))
        object.__setattr__(self, "elevations", tuple(float(e) for e in self.elevations))

    def ray_directions(self) -> np.ndarray:
        """Unit directions in the sensor frame, elevation-major."""
        az = 2.0 * np.pi * np.arange(self.n_azimuth) / self.n_azimuth
        dirs = np.empty((len(self.elevations) * self.n_azimuth, 3))
        for i, e in enumerate(self.elevations):
            ce, se = math.cos(e), math.sin(e)
            block = dirs[i * self.n_azimuth : (i + 1) * self.n_azimuth]
            block[:, 0] = ce * np.cos(az)
            block[:, 1] = ce * np.sin(az)
            block[:, 2] = se
        return dirs


@dataclass(frozen=True)
class SceneCamera:
    """A camera placed in the scene: vehicle->camera pose plus intrinsics."""

    name: str
    pose: RigidTransform
    intrinsics: CameraIntrinsics


@dataclass(frozen=True)
class Scene:
    """Ground plane at a fixed height plus oriented boxes, vehicle frame."""

    ground_height: float = 0.0
    boxes: tuple[Box3D, ...] = ()
    lidar_pose: RigidTransform = field(
        default_factory=lambda: RigidTransform.identity("vehicle", "lidar")
    )
    cameras: tuple[SceneCamera, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        object.__setattr__(self, "cameras", tuple(self.cameras))

    def box_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Box geometry decomposed for the raycast kernel."""
        n = len(self.boxes)
        centers = np.zeros((n, 3))
        halves = np.zeros((n, 3))
        yaw_cos = np.zeros(n)
        yaw_sin = np.zeros(n)
        for i, b in enumerate(self.boxes):
            centers[i] = b.center
            halves[i] = np.asarray(b.size) / 2.0
            yaw_cos[i] = math.cos(b.yaw)
            yaw_sin[i] = math.sin(b.yaw)
        return centers, halves, yaw_cos, yaw_sin


def _cast(scene: Scene, origin, dirs, t_max) -> tuple[np.ndarray, np.ndarray]:
    centers, halves, yaw_cos, yaw_sin = scene.box_arrays()
    return _kernels.raycast_rays(
        np.asarray(origin, dtype=np.float64),
        np.ascontiguousarray(dirs, dtype=np.float64),
        float(scene.ground_height),
        centers,
        halves,
        yaw_cos,
        yaw_sin,
        float(t_max),
    )


def raycast(
    scene: Scene, spec: LidarSpec, dropout: float = 0.0, seed: int = 0
) -> PointCloud:
    """Cast the LiDAR ray pattern and return hits in the LiDAR frame.

    Rays that hit nothing within max_range emit no point. With dropout > 0,
    each return is independently discarded with that probability, driven by
    the seed; order is preserved either way.
    """
    if not 0.0 <= dropout < 1.0:
        raise ValueError("dropout must lie in [0, 1)")
    dirs_lidar = spec.ray_directions()
    to_vehicle = scene.lidar_pose.invert()
    dirs_vehicle = dirs_lidar @ to_vehicle.rotation.T
    t, _ = _cast(scene, to_vehicle.translation, dirs_vehicle, spec.max_range)
    hit = np.isfinite(t)
    points = dirs_lidar[hit] * t[hit, None]
    if dropout > 0.0:
        keep = np.random.default_rng(seed).random(points.shape[0]) >= dropout
        points = points[keep]
    return PointCloud(points, scene.lidar_pose.frame_to)


def _pixel_ray_dirs(intr: CameraIntrinsics) -> np.ndarray:
    """Unnormalized pixel-center rays with unit z, so t equals depth."""
    us = np.arange(intr.width, dtype=np.float64)
    vs = np.arange(intr.height, dtype=np.float64)
    xn = (us - intr.cx) / intr.fx
    yn = (vs - intr.cy) / intr.fy
    gx, gy = np.meshgrid(xn, yn)
    return np.stack([gx, gy, np.ones_like(gx)], axis=-1).reshape(-1, 3)


def render_ideal_depth(scene: Scene, camera: SceneCamera) -> DepthImage:
    """Exact per-pixel nearest-surface depth; sentinel where only sky."""
    intr = camera.intrinsics
    to_vehicle = camera.pose.invert()
    dirs = _pixel_ray_dirs(intr) @ to_vehicle.rotation.T
    t, _ = _cast(scene, to_vehicle.translation, dirs, np.inf)
    return DepthImage(t.reshape(intr.height, intr.width))


def render_rgb(scene: Scene, camera: SceneCamera) -> np.ndarray:
    """Flat-shaded (H, W, 3) uint8 render keyed by the surface hit."""
    intr = camera.intrinsics
    to_vehicle = camera.pose.invert()
    dirs = _pixel_ray_dirs(intr) @ to_vehicle.rotation.T
    _, hit_id = _cast(scene, to_vehicle.translation, dirs, np.inf)
    palette = np.array(
        [_SKY_RGB, _GROUND_RGB]
        + [_BOX_PALETTE[i % len(_BOX_PALETTE)] for i in range(len(scene.boxes))],
        dtype=np.uint8,
    )
    return palette[hit_id + 1].reshape(intr.height, intr.width, 3)


def lidar_pose(position, frame_to: str = "lidar", frame_from: str = "vehicle") -> RigidTransform:
    """Vehicle->lidar pose for a sensor at ``position``, axes parallel."""
    pos = np.asarray(position, dtype=np.float64)
    return RigidTransform(np.eye(3), -pos, frame_from, frame_to)


def camera_pose(
    position,
    yaw: float = 0.0,
    pitch: float = 0.0,
    frame_to: str = "camera",
    frame_from: str = "vehicle",
) -> RigidTransform:
    """Vehicle->camera pose for a camera at ``position``.

    Yaw 0 looks along vehicle +x; positive pitch tilts the view up and
    negative down. pitch = -pi/2 is the nadir view, with image rows running
    along vehicle -x.
    """
    forward = np.array(
        [math.cos(yaw) * math.cos(pitch), math.sin(yaw) * math.cos(pitch), math.sin(pitch)]
    )
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    norm = np.linalg.norm(right)
    if norm < 1e-12:
        right = np.array([math.sin(yaw), -math.cos(yaw), 0.0])
    else:
        right /= norm
    down = np.cross(forward, right)
    rotation = np.stack([right, down, forward])  # rows: camera axes in vehicle coords
    pos = np.asarray(position, dtype=np.float64)
    return RigidTransform(rotation, -rotation @ pos, frame_from, frame_to)


def surface_distance(scene: Scene, points_vehicle: np.ndarray) -> np.ndarray:
    """Distance from each point to the nearest scene surface.

    Used to check that reconstructed points actually lie on simulated
    geometry; exact for the ground plane and box boundaries.
    """
    pts = np.asarray(points_vehicle, dtype=np.float64).reshape(-1, 3)
    dist = np.abs(pts[:, 2] - scene.ground_height)
    for b in scene.boxes:
        c, s = math.cos(b.yaw), math.sin(b.yaw)
        d = pts - b.center
        local = np.stack(
            [c * d[:, 0] + s * d[:, 1], -s * d[:, 0] + c * d[:, 1], d[:, 2]], axis=1
        )
        q = np.abs(local) - np.asarray(b.size) / 2.0
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(q.max(axis=1), 0.0)
        dist = np.minimum(dist, np.abs(outside + inside))
    return dist
