"""Command-line surface: simulate, depth, bev, gt, eval.

Exit codes are a stable contract: 0 success, 2 input validation failure,
3 I/O failure. Validation diagnostics name the offending file and field.
All outputs are written atomically and are byte-identical to what the
library produces in-process on the same inputs.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bev import (
    BevGrid,
    CameraView,
    FeatureMap,
    GridConfig,
    build_bev,
    occupancy_readout,
    standin_encoder,
)
from .depth import depth_for_camera
from .groundtruth import SemanticGrid, build_semantic_grid, identity_grouping
from .metrics import EvalReport, POS_WEIGHT_DEFAULT
from .simulate import raycast, render_ideal_depth, render_rgb
from . import tensorio
from .tensorio import (
    calibration_to_dict,
    depth_to_png16,
    load_annotations,
    load_calibration,
    load_grouping,
    load_scene,
    mask_to_png,
    read_cloud,
    read_tensor,
    rgb_to_png,
    scene_calibration,
    write_json,
    write_tensor,
)


def _require_file(path: str, role: str) -> str:
    if not os.path.isfile(path):
        raise ValueError(f"{role} file not found: {path}")
    return path


def _parse_extent(text: str) -> tuple[float, float, float, float]:
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError(
            f"--grid-extent must be 'x_min,x_max,y_min,y_max', got {text!r}"
        )
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError as e:
        raise ValueError(f"--grid-extent: {e}") from e


def _grid_config(args) -> GridConfig:
    x_min, x_max, y_min, y_max = _parse_extent(args.grid_extent)
    return GridConfig(x_min, x_max, y_min, y_max, args.grid_cell)


def _parse_named_paths(pairs, flag: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for item in pairs or []:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            raise ValueError(f"{flag} expects NAME=PATH, got {item!r}")
        if name in out:
            raise ValueError(f"{flag}: duplicate camera name {name!r}")
        out[name] = path
    return out


@dataclass
class RunManifest:
    """Validated inputs of a depth/bev run.

    Checks that every referenced file exists and that feature/image inputs
    name cameras present in the calibration.
    """

    calibration_path: str
    cloud_path: str
    d_f: int
    feature_paths: dict[str, str] = field(default_factory=dict)
    image_paths: dict[str, str] = field(default_factory=dict)

    def load(self):
        if self.d_f < 1:
            raise ValueError(f"--df must be a positive integer, got {self.d_f}")
        if self.feature_paths and self.image_paths:
            raise ValueError("pass either --features or --images, not both")
        rig = load_calibration(_require_file(self.calibration_path, "calibration"))
        cloud = read_cloud(_require_file(self.cloud_path, "cloud"))
        known = {cam.name for cam in rig.cameras}
        for flag, paths in (("--features", self.feature_paths), ("--images", self.image_paths)):
            for name, path in paths.items():
                if name not in known:
                    raise ValueError(
                        f"{flag} {name}: calibration {self.calibration_path} has no such camera"
                    )
                _require_file(path, f"{flag} {name}")
        return rig, cloud


def _camera_depths(rig, cloud, d_f, names=None):
    """Min-pooled depth per camera, computed concurrently."""
    cams = [c for c in rig.cameras if names is None or c.name in names]
    for cam in cams:
        if cam.intrinsics.width % d_f or cam.intrinsics.height % d_f:
            raise ValueError(
                f"camera {cam.name}: image size {cam.intrinsics.width}x"
                f"{cam.intrinsics.height} not divisible by --df {d_f}"
            )
    with ThreadPoolExecutor(max_workers=max(1, len(cams))) as pool:
        results = list(
            pool.map(
                lambda cam: depth_for_camera(cloud, rig.lidar, cam.extrinsics, cam.intrinsics, d_f),
                cams,
            )
        )
    return {cam.name: pair for cam, pair in zip(cams, results)}


def cmd_simulate(args) -> int:
    scene, spec = load_scene(_require_file(args.scene, "scene"))
    os.makedirs(args.out, exist_ok=True)
    cloud = raycast(scene, spec, dropout=args.dropout, seed=args.seed)
    write_tensor(os.path.join(args.out, "cloud.tens"), cloud.points)
    write_json(
        os.path.join(args.out, "calib.json"), calibration_to_dict(scene_calibration(scene))
    )
    for cam in scene.cameras:
        ideal = render_ideal_depth(scene, cam)
        image = render_rgb(scene, cam)
        write_tensor(os.path.join(args.out, f"ideal_depth_{cam.name}.tens"), ideal.values)
        write_tensor(os.path.join(args.out, f"image_{cam.name}.tens"), image)
        if args.render:
            tensorio.atomic_write_bytes(
                os.path.join(args.out, f"ideal_depth_{cam.name}.png"),
                depth_to_png16(ideal.values),
            )
            tensorio.atomic_write_bytes(
                os.path.join(args.out, f"image_{cam.name}.png"), rgb_to_png(image)
            )
    return 0


def cmd_depth(args) -> int:
    if args.depth_image is not None:
        # standalone min-pooling of an existing depth image
        from .depth import DepthImage, minpool

        values = read_tensor(_require_file(args.depth_image, "depth image"))
        if values.ndim != 2 or values.dtype != np.float64:
            raise ValueError(
                f"{args.depth_image}: depth tensor must be 2-d float64, got {values.shape} {values.dtype}"
            )
        pooled = minpool(DepthImage(values), args.df)
        os.makedirs(args.out, exist_ok=True)
        out_path = os.path.join(args.out, "lowres.tens")
        write_tensor(out_path, pooled.values)
        return 0

    if args.calib is None or args.cloud is None:
        raise ValueError("--calib and --cloud are required (or use --depth-image)")
    manifest = RunManifest(args.calib, args.cloud, args.df)
    rig, cloud = manifest.load()
    depths = _camera_depths(rig, cloud, args.df)
    os.makedirs(args.out, exist_ok=True)
    for cam in rig.cameras:
        full, low = depths[cam.name]
        write_tensor(os.path.join(args.out, f"depth_{cam.name}.tens"), full.values)
        write_tensor(os.path.join(args.out, f"lowres_{cam.name}.tens"), low.values)
        if args.render:
            tensorio.atomic_write_bytes(
                os.path.join(args.out, f"depth_{cam.name}.png"), depth_to_png16(full.values)
            )
    return 0


def _load_feature_map(path: str, cam, d_f: int) -> FeatureMap:
    a = read_tensor(path)
    if a.ndim != 3 or a.dtype != np.float32:
        raise ValueError(
            f"{path}: feature tensor must be (n_f, h, w) float32, got {a.shape} {a.dtype}"
        )
    expect = (cam.intrinsics.height // d_f, cam.intrinsics.width // d_f)
    if a.shape[1:] != expect:
        raise ValueError(
            f"camera {cam.name}: feature map {path} is {a.shape[2]}x{a.shape[1]}, "
            f"expected {expect[1]}x{expect[0]} for --df {d_f}"
        )
    return FeatureMap(a, d_f)


def _load_image_features(path: str, cam, d_f: int) -> FeatureMap:
    a = read_tensor(path)
    if a.ndim != 3 or a.shape[2] != 3 or a.dtype != np.uint8:
        raise ValueError(
            f"{path}: image tensor must be (H, W, 3) uint8, got {a.shape} {a.dtype}"
        )
    if a.shape[0] != cam.intrinsics.height or a.shape[1] != cam.intrinsics.width:
        raise ValueError(
            f"camera {cam.name}: image {path} is {a.shape[1]}x{a.shape[0]}, expected "
            f"{cam.intrinsics.width}x{cam.intrinsics.height}"
        )
    return standin_encoder(a, d_f)


def cmd_bev(args) -> int:
    features = _parse_named_paths(args.features, "--features")
    images = _parse_named_paths(args.images, "--images")
    if not features and not images:
        raise ValueError("at least one --features NAME=PATH or --images NAME=PATH is required")
    manifest = RunManifest(args.calib, args.cloud, args.df, features, images)
    rig, cloud = manifest.load()
    config = _grid_config(args)
    named = features or images
    depths = _camera_depths(rig, cloud, args.df, names=set(named))
    views = []
    for cam in rig.cameras:  # calibration order defines accumulation order
        if cam.name not in named:
            continue
        if features:
            fm = _load_feature_map(features[cam.name], cam, args.df)
        else:
            fm = _load_image_features(images[cam.name], cam, args.df)
        views.append(CameraView(cam.name, fm, depths[cam.name][1], cam.intrinsics, cam.extrinsics))
    grid = build_bev(views, config)
    os.makedirs(args.out, exist_ok=True)
    write_tensor(os.path.join(args.out, "bev.tens"), grid.values)
    write_json(
        os.path.join(args.out, "bev.json"),
        {"grid": config.to_dict(), "n_f": grid.n_f, "cameras": [v.name for v in views]},
    )
    if args.threshold is not None:
        occ = occupancy_readout(grid, args.threshold)
        write_tensor(os.path.join(args.out, "occupancy.tens"), occ.astype(np.uint8))
        if args.render:
            tensorio.atomic_write_bytes(
                os.path.join(args.out, "occupancy.png"), mask_to_png(occ)
            )
    return 0


def cmd_gt(args) -> int:
    boxes, polygons = load_annotations(_require_file(args.annotations, "annotations"))
    if args.classes is not None:
        grouping = load_grouping(_require_file(args.classes, "class grouping"))
    else:
        grouping = identity_grouping(boxes, polygons)
    config = _grid_config(args)
    grid = build_semantic_grid(boxes, polygons, grouping, config)
    os.makedirs(args.out, exist_ok=True)
    write_tensor(os.path.join(args.out, "gt.tens"), grid.values)
    write_json(
        os.path.join(args.out, "gt.json"),
        {"classes": list(grid.classes), "grid": config.to_dict()},
    )
    if args.render:
        for i, name in enumerate(grid.classes):
            tensorio.atomic_write_bytes(
                os.path.join(args.out, f"gt_{name}.png"),
                mask_to_png(grid.values[i].astype(bool)),
            )
    return 0


def _load_semantic(path: str, classes=None, config=None) -> SemanticGrid:
    values = read_tensor(path)
    if values.ndim == 2:
        values = values[None]
    if values.ndim != 3:
        raise ValueError(f"{path}: semantic grid tensor must be 2-d or 3-d, got {values.shape}")
    sidecar = os.path.splitext(path)[0] + ".json"
    if os.path.isfile(sidecar):
        doc = tensorio.read_json(sidecar)
        if classes is None and "classes" in doc:
            classes = tuple(str(c) for c in doc["classes"])
        if config is None and "grid" in doc:
            config = GridConfig.from_dict(doc["grid"])
    if classes is None:
        classes = tuple(f"class_{i}" for i in range(values.shape[0]))
    if len(classes) != values.shape[0]:
        raise ValueError(
            f"{path}: grid has {values.shape[0]} layers but {len(classes)} classes"
        )
    if config is None:
        config = GridConfig(0.0, float(values.shape[1]), 0.0, float(values.shape[2]), 1.0)
    try:
        return SemanticGrid(classes, values, config)
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from e


def cmd_eval(args) -> int:
    gt = _load_semantic(_require_file(args.gt, "ground truth grid"))
    if args.logits:
        values = read_tensor(_require_file(args.pred, "prediction grid"))
        if values.ndim == 2:
            values = values[None]
        if values.ndim != 3 or not np.issubdtype(values.dtype, np.floating):
            raise ValueError(
                f"{args.pred}: logit tensor must be 2-d or 3-d float, got "
                f"{values.shape} {values.dtype}"
            )
        report = EvalReport.from_logits(
            values, gt, threshold=args.threshold, pos_weight=args.pos_weight
        )
    else:
        if args.pos_weight is not None:
            raise ValueError("--pos-weight requires --logits")
        pred = _load_semantic(
            _require_file(args.pred, "prediction grid"), classes=gt.classes, config=gt.config
        )
        report = EvalReport.from_grids(pred, gt, threshold=args.threshold)
    print(report.format_table())
    if report.loss is not None:
        print(f"loss (pos_weight={report.pos_weight}): {report.loss:.6f}")
    if args.out is not None:
        write_json(args.out, report.to_dict())
    return 0


def _add_grid_flags(p):
    p.add_argument(
        "--grid-extent",
        default="-50,50,-50,50",
        help="metric extent as x_min,x_max,y_min,y_max; use --grid-extent=-50,50,-50,50 "
        "when the value starts with a minus sign (default %(default)s)",
    )
    p.add_argument(
        "--grid-cell", type=float, default=0.5, help="cell size in meters (default %(default)s)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lapt",
        description="LiDAR-aided perspective transform: camera features to metric BEV grids.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="raycast a synthetic scene to cloud/depth/image files")
    p.add_argument("scene", help="scene description JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="dropout RNG seed (default 0)")
    p.add_argument("--dropout", type=float, default=0.0, help="per-return drop probability")
    p.add_argument("--render", action="store_true", help="also write PNG renders")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("depth", help="z-buffer a LiDAR cloud into per-camera depth images")
    p.add_argument("--calib", help="calibration JSON")
    p.add_argument("--cloud", help="point cloud (.tens, .xyz, or .ply)")
    p.add_argument("--df", type=int, default=16, help="decimation factor (default 16)")
    p.add_argument(
        "--depth-image",
        help="min-pool an existing full-resolution depth tensor instead of rasterizing",
    )
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--render", action="store_true", help="also write PNG renders")
    p.set_defaults(func=cmd_depth)

    p = sub.add_parser("bev", help="project camera features into a BEV feature grid")
    p.add_argument("--calib", required=True, help="calibration JSON")
    p.add_argument("--cloud", required=True, help="point cloud (.tens, .xyz, or .ply)")
    p.add_argument(
        "--features",
        action="append",
        metavar="NAME=PATH",
        help="per-camera feature tensor (repeatable)",
    )
    p.add_argument(
        "--images",
        action="append",
        metavar="NAME=PATH",
        help="per-camera RGB image tensor; the stand-in encoder is applied (repeatable)",
    )
    p.add_argument("--df", type=int, default=16, help="decimation factor (default 16)")
    _add_grid_flags(p)
    p.add_argument("--threshold", type=float, help="also write the occupancy readout")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--render", action="store_true", help="also write PNG renders")
    p.set_defaults(func=cmd_bev)

    p = sub.add_parser("gt", help="rasterize annotations into binary semantic grids")
    p.add_argument("annotations", help="annotation JSON (boxes and polygons)")
    p.add_argument("--classes", help="class grouping JSON (target -> source labels)")
    _add_grid_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--render", action="store_true", help="also write PNG renders")
    p.set_defaults(func=cmd_gt)

    p = sub.add_parser("eval", help="score a prediction grid against ground truth")
    p.add_argument("pred", help="prediction grid tensor")
    p.add_argument("gt", help="ground-truth grid tensor")
    p.add_argument(
        "--threshold", type=float, default=0.5, help="probability threshold (default 0.5)"
    )
    p.add_argument(
        "--logits", action="store_true", help="prediction values are logits, not probabilities"
    )
    p.add_argument(
        "--pos-weight",
        type=float,
        default=None,
        help=f"also report weighted cross-entropy (e.g. {POS_WEIGHT_DEFAULT}); requires --logits",
    )
    p.add_argument("--out", help="write the report JSON here")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
