"""Synthetic scenes shared by the unit and acceptance tests."""

import math

import numpy as np

import lapt
from lapt import (
    Box3D,
    CameraIntrinsics,
    CameraView,
    GridConfig,
    LidarSpec,
    RigidTransform,
    Scene,
    SceneCamera,
    camera_pose,
)
from lapt.depth import depth_for_camera
from lapt.bev import standin_encoder
from lapt.simulate import render_rgb


def aligned_exactness_scene():
    """Nadir camera with a co-located LiDAR whose rays hit exact pixel centers.

    The spinning pattern uses elevations atan(fx / k), so in-frustum returns
    project to integer pixels (cx +- k, cy) and (cx, cy +- k). Both surfaces
    (ground, box top) are fronto-parallel to the camera and the box footprint
    edge projects onto a d_f = 16 window boundary, which makes the full
    pipeline exact rather than merely approximate.
    """
    height = 2.0
    intr = CameraIntrinsics(96.0, 96.0, 32.0, 32.0, 64, 64)
    pose = camera_pose([0.0, 0.0, height], pitch=-math.pi / 2, frame_to="cam0")
    lidar = RigidTransform(pose.rotation, pose.translation, "vehicle", "lidar")
    box = Box3D(np.array([0.0, 0.0, 0.25]), (0.48, 0.48, 0.5), 0.0, "crate")
    scene = Scene(0.0, (box,), lidar, (SceneCamera("cam0", pose, intr),))
    spec = LidarSpec(4, tuple(math.atan2(96.0, k) for k in range(1, 31)), 50.0)
    return scene, spec


def ring_rig_scene(n_cameras: int = 6):
    """A camera ring plus a spinning LiDAR over ground with scattered boxes."""
    boxes = (
        Box3D(np.array([6.0, 0.0, 0.75]), (4.2, 1.9, 1.5), 0.2, "vehicle"),
        Box3D(np.array([-5.0, 4.0, 0.9]), (1.8, 1.8, 1.8), -0.7, "vehicle"),
        Box3D(np.array([2.0, -6.0, 0.5]), (0.8, 0.8, 1.0), 1.1, "movable_object"),
        Box3D(np.array([-7.0, -3.0, 0.6]), (2.5, 1.2, 1.2), 2.6, "vehicle"),
    )
    lidar = lapt.lidar_pose([0.0, 0.3, 1.9])
    cams = []
    intr = CameraIntrinsics(64.0, 64.0, 63.5, 47.5, 128, 96)
    for i in range(n_cameras):
        yaw = 2.0 * math.pi * i / n_cameras
        name = f"cam{i}"
        pose = camera_pose([0.0, 0.0, 1.8], yaw=yaw, pitch=math.radians(-25.0), frame_to=name)
        cams.append(SceneCamera(name, pose, intr))
    scene = Scene(0.0, boxes, lidar, tuple(cams))
    spec = LidarSpec(
        180, tuple(math.radians(a) for a in np.linspace(-62.0, -6.0, 15)), 80.0
    )
    return scene, spec


def rig_camera_views(scene: Scene, spec: LidarSpec, d_f: int = 16):
    """CameraView list for a simulated scene, features from the stand-in encoder."""
    cloud = lapt.raycast(scene, spec)
    views = []
    for cam in scene.cameras:
        full, low = depth_for_camera(cloud, scene.lidar_pose, cam.pose, cam.intrinsics, d_f)
        fm = standin_encoder(render_rgb(scene, cam), d_f)
        views.append(CameraView(cam.name, fm, low, cam.intrinsics, cam.pose))
    return cloud, views


def small_grid() -> GridConfig:
    return GridConfig(-16.0, 16.0, -16.0, 16.0, 0.5)
