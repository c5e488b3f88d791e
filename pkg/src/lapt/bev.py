"""Depth-guided unprojection of feature maps and pillar pooling into a BEV grid.

The pipeline per camera: each low-resolution feature pixel with a valid
min-pooled depth is lifted to a 3D point along its pixel-center ray, carried
into the vehicle frame, and accumulated into its (x, y) grid cell by summing
feature vectors over the infinite-height pillar. Geometry stays float64;
feature payloads are float32.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .depth import LowResDepth
from .geometry import CameraIntrinsics, RigidTransform, scale_intrinsics


@dataclass(frozen=True)
class GridConfig:
    """Metric extent and resolution of the BEV grid, in the vehicle frame.

    Cells are half-open [edge, edge + cell); a point exactly on x_max or
    y_max is dropped. Cell (i, j) covers x in [x_min + i*cell, ...) and
    y in [y_min + j*cell, ...).
    """

    x_min: float = -50.0
    x_max: float = 50.0
    y_min: float = -50.0
    y_max: float = 50.0
    cell: float = 0.5

    def __post_init__(self):
        if self.cell <= 0:
            raise ValueError("cell size must be positive")
        for lo, hi, axis in ((self.x_min, self.x_max, "x"), (self.y_min, self.y_max, "y")):
            n = (hi - lo) / self.cell
            if n < 1 or abs(n - round(n)) > 1e-9:
                raise ValueError(
                    f"{axis} extent [{lo}, {hi}) must be a positive whole number of {self.cell} m cells"
                )

    @property
    def nx(self) -> int:
        return round((self.x_max - self.x_min) / self.cell)

    @property
    def ny(self) -> int:
        return round((self.y_max - self.y_min) / self.cell)

    def to_dict(self) -> dict:
        return {
            "x_min": self.x_min,
            "x_max": self.x_max,
            "y_min": self.y_min,
            "y_max": self.y_max,
            "cell": self.cell,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridConfig":
        return cls(d["x_min"], d["x_max"], d["y_min"], d["y_max"], d["cell"])

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Center coordinates as (nx, ny) meshes indexed like grid values."""
        xs = self.x_min + (np.arange(self.nx) + 0.5) * self.cell
        ys = self.y_min + (np.arange(self.ny) + 0.5) * self.cell
        return np.meshgrid(xs, ys, indexing="ij")


@dataclass(frozen=True)
class FeatureMap:
    """(n_f, height, width) float32 features at 1/d_f of camera resolution."""

    values: np.ndarray
    d_f: int

    def __post_init__(self):
        a = np.array(self.values, dtype=np.float32)
        if a.ndim != 3:
            raise ValueError(f"feature map must be (channels, height, width), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("feature values must be finite")
        if int(self.d_f) < 1:
            raise ValueError("decimation factor must be a positive integer")
        a.flags.writeable = False
        object.__setattr__(self, "values", a)
        object.__setattr__(self, "d_f", int(self.d_f))

    @property
    def n_f(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class FeaturePointCloud:
    """3D points in a named frame, each carrying an n_f feature vector."""

    points: np.ndarray
    features: np.ndarray
    frame: str

    def __post_init__(self):
        p = np.array(self.points, dtype=np.float64).reshape(-1, 3)
        f = np.array(self.features, dtype=np.float32)
        if f.ndim != 2 or f.shape[0] != p.shape[0]:
            raise ValueError(
                f"features must be (n_points, n_f); got {f.shape} for {p.shape[0]} points"
            )
        if not np.all(np.isfinite(p)) or not np.all(np.isfinite(f)):
            raise ValueError("points and features must be finite")
        p.flags.writeable = False
        f.flags.writeable = False
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "features", f)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def n_f(self) -> int:
        return self.features.shape[1]

    def transformed(self, t: RigidTransform) -> "FeaturePointCloud":
        if self.frame != t.frame_from:
            raise ValueError(
                f"cloud is in frame {self.frame!r} but transform expects {t.frame_from!r}"
            )
        return FeaturePointCloud(t.apply(self.points), self.features, t.frame_to)


@dataclass(frozen=True)
class BevGrid:
    """(n_f, nx, ny) float32 feature grid; untouched cells are exactly zero."""

    values: np.ndarray
    config: GridConfig

    def __post_init__(self):
        a = np.array(self.values, dtype=np.float32)
        if a.ndim != 3 or a.shape[1] != self.config.nx or a.shape[2] != self.config.ny:
            raise ValueError(
                f"grid values must be (n_f, {self.config.nx}, {self.config.ny}), got {a.shape}"
            )
        if not np.all(np.isfinite(a)):
            raise ValueError("grid values must be finite")
        a.flags.writeable = False
        object.__setattr__(self, "values", a)

    @property
    def n_f(self) -> int:
        return self.values.shape[0]


def unproject_features(
    fm: FeatureMap, depth: LowResDepth, intr: CameraIntrinsics, frame: str = "camera"
) -> FeaturePointCloud:
    """Lift feature pixels with a valid depth to camera-frame 3D points.

    ``intr`` is the full-resolution intrinsics; the pixel-center rays of the
    decimated grid come from ``scale_intrinsics``. Sentinel-depth pixels emit
    nothing, so cameras see only geometry actually sampled by the LiDAR.
    Output order is row-major over the feature map.
    """
    if (fm.height, fm.width, fm.d_f) != (depth.height, depth.width, depth.d_f):
        raise ValueError(
            f"feature map {fm.width}x{fm.height}@{fm.d_f} does not match "
            f"depth {depth.width}x{depth.height}@{depth.d_f}"
        )
    if intr.width != fm.width * fm.d_f or intr.height != fm.height * fm.d_f:
        raise ValueError(
            f"intrinsics are {intr.width}x{intr.height} but feature map implies "
            f"{fm.width * fm.d_f}x{fm.height * fm.d_f}"
        )
    low = scale_intrinsics(intr, fm.d_f)
    rows, cols = np.nonzero(np.isfinite(depth.values))
    z = depth.values[rows, cols]
    x = z * (cols - low.cx) / low.fx
    y = z * (rows - low.cy) / low.fy
    feats = fm.values[:, rows, cols].T
    return FeaturePointCloud(np.stack([x, y, z], axis=1), feats, frame)


def pillar_sum_pool(
    cloud: FeaturePointCloud, config: GridConfig, frame: str = "vehicle"
) -> BevGrid:
    """Sum feature vectors over infinite-height pillars; z is ignored.

    Points outside the extent are dropped. Accumulation follows input order,
    which defines the sequential reference output.
    """
    if cloud.frame != frame:
        raise ValueError(f"cloud is in frame {cloud.frame!r}, expected {frame!r}")
    x, y = cloud.points[:, 0], cloud.points[:, 1]
    keep = (x >= config.x_min) & (x < config.x_max) & (y >= config.y_min) & (y < config.y_max)
    ix = np.floor((x[keep] - config.x_min) / config.cell).astype(np.int64)
    iy = np.floor((y[keep] - config.y_min) / config.cell).astype(np.int64)
    out = np.zeros((cloud.n_f, config.nx, config.ny), np.float32)
    _kernels.scatter_add_vectors(ix, iy, cloud.features[keep], out)
    return BevGrid(out, config)


@dataclass(frozen=True)
class CameraView:
    """Everything one camera contributes to the BEV build."""

    name: str
    features: FeatureMap
    depth: LowResDepth
    intrinsics: CameraIntrinsics
    extrinsics: RigidTransform  # vehicle -> camera

    def feature_cloud_vehicle(self) -> FeaturePointCloud:
        cam_cloud = unproject_features(
            self.features, self.depth, self.intrinsics, frame=self.extrinsics.frame_to
        )
        return cam_cloud.transformed(self.extrinsics.invert())


def build_bev(cameras: Sequence[CameraView], config: GridConfig) -> BevGrid:
    """Pool every camera's unprojected features into one vehicle-frame grid.

    Equivalent to pillar-pooling the concatenation of all per-camera clouds;
    cameras are accumulated in order, row-major within each camera.
    """
    if not cameras:
        raise ValueError("at least one camera is required")
    vehicle = cameras[0].extrinsics.frame_from
    n_f = cameras[0].features.n_f
    for cam in cameras:
        if cam.extrinsics.frame_from != vehicle:
            raise ValueError(
                f"camera {cam.name!r} extrinsics start at {cam.extrinsics.frame_from!r}, "
                f"expected the shared vehicle frame {vehicle!r}"
            )
        if cam.features.n_f != n_f:
            raise ValueError(
                f"camera {cam.name!r} has {cam.features.n_f} feature channels, expected {n_f}"
            )
    out = np.zeros((n_f, config.nx, config.ny), np.float32)
    for cam in cameras:
        cloud = cam.feature_cloud_vehicle()
        out += pillar_sum_pool(cloud, config, frame=vehicle).values
    return BevGrid(out, config)


def standin_encoder(image: np.ndarray, d_f: int) -> FeatureMap:
    """Deterministic stand-in for a learned encoder: window-mean RGB in [0, 1].

    Accepts an (H, W, 3) uint8 image whose size is divisible by ``d_f``.
    """
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) RGB image, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise ValueError(f"expected uint8 RGB, got dtype {img.dtype}")
    d_f = int(d_f)
    if d_f < 1:
        raise ValueError("decimation factor must be a positive integer")
    h, w = img.shape[:2]
    if h % d_f or w % d_f:
        raise ValueError(f"image size {w}x{h} not divisible by decimation factor {d_f}")
    win = img.reshape(h // d_f, d_f, w // d_f, d_f, 3).astype(np.float64)
    feats = win.mean(axis=(1, 3)) / 255.0
    return FeatureMap(feats.transpose(2, 0, 1).astype(np.float32), d_f)


def occupancy_readout(grid: BevGrid, threshold: float) -> np.ndarray:
    """Cells whose channel vector has L1 norm above the threshold."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    mass = np.abs(grid.values.astype(np.float64)).sum(axis=0)
    return mass > threshold
