#!/usr/bin/env python3
"""Generate the shared fixture set consumed by the bindings parity tests.

Inputs and expected outputs are produced by the primary library in-process;
the bindings must reproduce the expected values within 1e-6 relative by
calling through the CLI. Regenerate with:

    python tools/gen_fixtures.py
"""

import json
import math
import os
import shutil
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))

import scenes  # noqa: E402
import lapt  # noqa: E402
from lapt import Box3D, DepthImage, GridConfig, build_bev, build_semantic_grid, minpool  # noqa: E402
from lapt.bev import standin_encoder  # noqa: E402
from lapt.depth import depth_for_camera  # noqa: E402
from lapt.metrics import EvalReport, bce_loss, iou  # noqa: E402
from lapt.groundtruth import MapPolygon, SemanticGrid  # noqa: E402
from lapt.simulate import render_rgb  # noqa: E402
from lapt.tensorio import calibration_to_dict, scene_calibration, write_json, write_tensor  # noqa: E402

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
FIXTURES = os.path.join(ROOT, "fixtures")


def main():
    if os.path.exists(FIXTURES):
        shutil.rmtree(FIXTURES)
    os.makedirs(FIXTURES)
    index = {"tolerance": 1e-6, "cases": {}}

    scene, spec = scenes.ring_rig_scene(2)
    cloud = lapt.raycast(scene, spec)
    rig = scene_calibration(scene)
    calib_path = os.path.join(FIXTURES, "calib.json")
    write_json(calib_path, calibration_to_dict(rig))
    cloud_path = os.path.join(FIXTURES, "cloud.tens")
    write_tensor(cloud_path, cloud.points)

    # minpool: pool an ideal depth render
    os.makedirs(os.path.join(FIXTURES, "minpool"))
    ideal = lapt.render_ideal_depth(scene, scene.cameras[0])
    write_tensor(os.path.join(FIXTURES, "minpool", "depth.tens"), ideal.values)
    index["cases"]["minpool"] = []
    for df in (4, 16):
        expected = minpool(DepthImage(ideal.values), df)
        out = os.path.join(FIXTURES, "minpool", f"expected_df{df}.tens")
        write_tensor(out, expected.values)
        index["cases"]["minpool"].append(
            {"depth": "minpool/depth.tens", "df": df, "expected": f"minpool/expected_df{df}.tens"}
        )

    # depth rasterization through the calibration chain
    os.makedirs(os.path.join(FIXTURES, "depth"))
    cameras = {}
    for cam in scene.cameras:
        full, low = depth_for_camera(cloud, scene.lidar_pose, cam.pose, cam.intrinsics, 16)
        write_tensor(os.path.join(FIXTURES, "depth", f"depth_{cam.name}.tens"), full.values)
        write_tensor(os.path.join(FIXTURES, "depth", f"lowres_{cam.name}.tens"), low.values)
        cameras[cam.name] = {
            "depth": f"depth/depth_{cam.name}.tens",
            "lowres": f"depth/lowres_{cam.name}.tens",
        }
    index["cases"]["depth_raster"] = [
        {"calib": "calib.json", "cloud": "cloud.tens", "df": 16, "cameras": cameras}
    ]

    # single-camera and two-camera BEV builds from feature tensors
    os.makedirs(os.path.join(FIXTURES, "bev"))
    cfg = GridConfig(-16.0, 16.0, -16.0, 16.0, 0.5)
    grid_doc = cfg.to_dict()
    _, views = scenes.rig_camera_views(scene, spec, 16)
    feature_paths = {}
    for view in views:
        p = f"bev/features_{view.name}.tens"
        write_tensor(os.path.join(FIXTURES, p), view.features.values)
        feature_paths[view.name] = p
    index["cases"]["build_bev"] = []
    for picked in ([views[0]], views):
        expected = build_bev(picked, cfg)
        name = f"expected_{len(picked)}cam.tens"
        write_tensor(os.path.join(FIXTURES, "bev", name), expected.values)
        index["cases"]["build_bev"].append(
            {
                "calib": "calib.json",
                "cloud": "cloud.tens",
                "df": 16,
                "grid": grid_doc,
                "features": {v.name: feature_paths[v.name] for v in picked},
                "expected": f"bev/{name}",
            }
        )
    # empty cloud gives an all-zero grid
    empty_path = os.path.join(FIXTURES, "bev", "empty_cloud.tens")
    write_tensor(empty_path, np.zeros((0, 3), np.float64))
    zero = build_bev(
        [
            lapt.CameraView(
                views[0].name,
                views[0].features,
                minpool(
                    DepthImage(np.full((views[0].intrinsics.height, views[0].intrinsics.width), np.inf)),
                    16,
                ),
                views[0].intrinsics,
                views[0].extrinsics,
            )
        ],
        cfg,
    )
    write_tensor(os.path.join(FIXTURES, "bev", "expected_empty.tens"), zero.values)
    index["cases"]["build_bev"].append(
        {
            "calib": "calib.json",
            "cloud": "bev/empty_cloud.tens",
            "df": 16,
            "grid": grid_doc,
            "features": {views[0].name: feature_paths[views[0].name]},
            "expected": "bev/expected_empty.tens",
        }
    )

    # ground-truth rasterization
    os.makedirs(os.path.join(FIXTURES, "gt"))
    boxes = [
        Box3D(np.zeros(3), (2.0, 2.0, 1.0), 0.0, "car"),
        Box3D(np.array([3.0, -2.0, 0.0]), (1.2, 0.8, 1.0), 0.7, "truck"),
    ]
    polys = [MapPolygon(np.array([[-4.0, -4.0], [4.0, -4.0], [0.0, 6.0]]), "road")]
    ann = {
        "boxes": [
            {"center": list(map(float, b.center)), "size": list(b.size), "yaw": b.yaw, "label": b.class_label}
            for b in boxes
        ],
        "polygons": [
            {"vertices": [[float(x), float(y)] for x, y in p.vertices], "label": p.class_label}
            for p in polys
        ],
    }
    write_json(os.path.join(FIXTURES, "gt", "annotations.json"), ann)
    grouping = {"vehicle": ["car", "truck"], "drivable_area": ["road"]}
    # grouping order is semantic (it fixes layer order), so no key sorting here
    with open(os.path.join(FIXTURES, "gt", "classes.json"), "w") as f:
        json.dump(grouping, f, indent=2)
    from lapt.tensorio import load_grouping

    grouping = load_grouping(os.path.join(FIXTURES, "gt", "classes.json"))
    gt_cfg = GridConfig(-8.0, 8.0, -8.0, 8.0, 0.5)
    gt = build_semantic_grid(boxes, polys, grouping, gt_cfg)
    write_tensor(os.path.join(FIXTURES, "gt", "expected.tens"), gt.values)
    index["cases"]["rasterize_gt"] = [
        {
            "annotations": "gt/annotations.json",
            "classes": "gt/classes.json",
            "grid": gt_cfg.to_dict(),
            "expected": "gt/expected.tens",
            "class_names": list(gt.classes),
        }
    ]

    # metrics
    os.makedirs(os.path.join(FIXTURES, "metrics"))
    rng = np.random.default_rng(200)
    pred = rng.integers(0, 2, (24, 24), dtype=np.uint8)
    gt_grid = rng.integers(0, 2, (24, 24), dtype=np.uint8)
    zeros = np.zeros((24, 24), np.uint8)
    write_tensor(os.path.join(FIXTURES, "metrics", "pred.tens"), pred)
    write_tensor(os.path.join(FIXTURES, "metrics", "gt.tens"), gt_grid)
    write_tensor(os.path.join(FIXTURES, "metrics", "zeros.tens"), zeros)
    index["cases"]["iou"] = [
        {"pred": "metrics/pred.tens", "gt": "metrics/gt.tens", "expected": iou(pred, gt_grid)},
        {"pred": "metrics/pred.tens", "gt": "metrics/pred.tens", "expected": 1.0},
        {"pred": "metrics/zeros.tens", "gt": "metrics/zeros.tens", "expected": None},
    ]
    logits = rng.uniform(-6.0, 6.0, (24, 24))
    write_tensor(os.path.join(FIXTURES, "metrics", "logits.tens"), logits)
    index["cases"]["bce"] = [
        {
            "pred": "metrics/logits.tens",
            "gt": "metrics/gt.tens",
            "pos_weight": 2.13,
            "expected": bce_loss(logits, gt_grid, 2.13),
        },
        {
            "pred": "metrics/logits.tens",
            "gt": "metrics/gt.tens",
            "pos_weight": 1.0,
            "expected": bce_loss(logits, gt_grid, 1.0),
        },
    ]

    # validation errors must surface the CLI diagnostics
    bad_features = os.path.join(FIXTURES, "bev", "bad_features.tens")
    write_tensor(bad_features, np.zeros((3, 5, 5), np.float32))
    index["cases"]["errors"] = [
        {
            "op": "build_bev",
            "calib": "calib.json",
            "cloud": "cloud.tens",
            "df": 16,
            "grid": grid_doc,
            "features": {views[0].name: "bev/bad_features.tens"},
            "exit_code": 2,
            "diagnostic": f"camera {views[0].name}: feature map",
        },
        {
            "op": "build_bev",
            "calib": "calib.json",
            "cloud": "missing_cloud.tens",
            "df": 16,
            "grid": grid_doc,
            "features": {views[0].name: feature_paths[views[0].name]},
            "exit_code": 2,
            "diagnostic": "cloud file not found",
        },
        {
            "op": "minpool",
            "depth": "minpool/depth.tens",
            "df": 7,
            "exit_code": 2,
            "diagnostic": "not divisible by decimation factor 7",
        },
    ]

    write_json(os.path.join(FIXTURES, "index.json"), index)
    n_files = sum(len(files) for _, _, files in os.walk(FIXTURES))
    print(f"wrote {n_files} fixture files to {FIXTURES}")


if __name__ == "__main__":
    main()
