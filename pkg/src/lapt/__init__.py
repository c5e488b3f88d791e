"""LiDAR-aided perspective transform to metric bird's-eye-view grids.

Camera feature maps are lifted to 3D with depths measured by a LiDAR
(projected, z-buffered, min-pooled to the feature resolution), carried into
the vehicle frame, and sum-pooled over infinite-height pillars. Ground-truth
rasterization, IoU/cross-entropy metrics, and a synthetic-scene simulator
round out the pipeline.
"""

from ._kernels import BACKEND
from .bev import (
    BevGrid,
    CameraView,
    FeatureMap,
    FeaturePointCloud,
    GridConfig,
    build_bev,
    occupancy_readout,
    pillar_sum_pool,
    standin_encoder,
    unproject_features,
)
from .depth import (
    SENTINEL,
    DepthImage,
    LowResDepth,
    depth_for_camera,
    minpool,
    rasterize_depth,
)
from .geometry import (
    CameraIntrinsics,
    PixelProjection,
    PixelProjections,
    PointCloud,
    RigidTransform,
    Z_MIN,
    compose,
    project_points,
    rot_x,
    rot_y,
    rot_z,
    scale_intrinsics,
    transform_points,
    unproject_pixel,
)
from .groundtruth import (
    Box3D,
    MapPolygon,
    SemanticGrid,
    build_semantic_grid,
    rasterize_boxes,
    rasterize_polygons,
)
from .metrics import POS_WEIGHT_DEFAULT, EvalReport, bce_loss, iou, overlap_counts
from .simulate import (
    LidarSpec,
    Scene,
    SceneCamera,
    camera_pose,
    lidar_pose,
    raycast,
    render_ideal_depth,
    render_rgb,
    surface_distance,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BevGrid",
    "Box3D",
    "CameraIntrinsics",
    "CameraView",
    "DepthImage",
    "EvalReport",
    "FeatureMap",
    "FeaturePointCloud",
    "GridConfig",
    "LidarSpec",
    "LowResDepth",
    "MapPolygon",
    "PixelProjection",
    "PixelProjections",
    "PointCloud",
    "POS_WEIGHT_DEFAULT",
    "RigidTransform",
    "Scene",
    "SceneCamera",
    "SemanticGrid",
    "SENTINEL",
    "Z_MIN",
    "bce_loss",
    "build_bev",
    "build_semantic_grid",
    "camera_pose",
    "compose",
    "depth_for_camera",
    "iou",
    "lidar_pose",
    "minpool",
    "occupancy_readout",
    "overlap_counts",
    "pillar_sum_pool",
    "project_points",
    "rasterize_boxes",
    "rasterize_depth",
    "rasterize_polygons",
    "raycast",
    "render_ideal_depth",
    "render_rgb",
    "rot_x",
    "rot_y",
    "rot_z",
    "scale_intrinsics",
    "standin_encoder",
    "surface_distance",
    "transform_points",
    "unproject_features",
    "unproject_pixel",
]
