import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

import scenes
import lapt
from lapt import GridConfig, build_bev, minpool, standin_encoder
from lapt.cli import main
from lapt.depth import depth_for_camera
from lapt.tensorio import (
    encode_tensor,
    read_tensor,
    scene_calibration,
    write_tensor,
)


def scene_json(tmp_path, n_cameras=2):
    scene, spec = scenes.ring_rig_scene(n_cameras)
    doc = {
        "ground_height": scene.ground_height,
        "boxes": [
            {
                "center": list(b.center),
                "size": list(b.size),
                "yaw": b.yaw,
                "label": b.class_label,
            }
            for b in scene.boxes
        ],
        "lidar": {
            "pose": [float(v) for v in scene.lidar_pose.as_matrix().ravel()],
            "spec": {
                "n_azimuth": spec.n_azimuth,
                "elevations": list(spec.elevations),
                "max_range": spec.max_range,
            },
        },
        "cameras": [
            {
                "name": c.name,
                "pose": [float(v) for v in c.pose.as_matrix().ravel()],
                "intrinsics": {
                    "fx": c.intrinsics.fx,
                    "fy": c.intrinsics.fy,
                    "cx": c.intrinsics.cx,
                    "cy": c.intrinsics.cy,
                    "width": c.intrinsics.width,
                    "height": c.intrinsics.height,
                },
            }
            for c in scene.cameras
        ],
    }
    path = str(tmp_path / "scene.json")
    with open(path, "w") as f:
        json.dump(doc, f)
    return path, scene, spec


@pytest.fixture()
def sim_dir(tmp_path):
    path, scene, spec = scene_json(tmp_path)
    out = str(tmp_path / "sim")
    assert main(["simulate", path, "--out", out]) == 0
    return out, scene, spec


class TestSimulateCommand:
    def test_outputs_exist(self, sim_dir):
        out, scene, _ = sim_dir
        names = set(os.listdir(out))
        assert {"cloud.tens", "calib.json"} <= names
        for cam in scene.cameras:
            assert f"ideal_depth_{cam.name}.tens" in names
            assert f"image_{cam.name}.tens" in names

    def test_byte_identical_across_runs(self, tmp_path):
        path, _, _ = scene_json(tmp_path)
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        assert main(["simulate", path, "--out", out1]) == 0
        assert main(["simulate", path, "--out", out2]) == 0
        for name in os.listdir(out1):
            a = open(os.path.join(out1, name), "rb").read()
            b = open(os.path.join(out2, name), "rb").read()
            assert a == b, name

    def test_matches_library(self, sim_dir):
        out, scene, spec = sim_dir
        cloud = lapt.raycast(scene, spec)
        assert (
            open(os.path.join(out, "cloud.tens"), "rb").read()
            == encode_tensor(cloud.points)
        )

    def test_missing_scene_file(self, tmp_path, capsys):
        assert main(["simulate", str(tmp_path / "absent.json"), "--out", str(tmp_path)]) == 2
        assert "absent.json" in capsys.readouterr().err

    def test_render_flag(self, tmp_path):
        path, scene, _ = scene_json(tmp_path)
        out = str(tmp_path / "r")
        assert main(["simulate", path, "--out", out, "--render"]) == 0
        assert os.path.exists(os.path.join(out, f"image_{scene.cameras[0].name}.png"))


class TestDepthCommand:
    def test_matches_in_process(self, sim_dir, tmp_path):
        out, scene, spec = sim_dir
        dep = str(tmp_path / "dep")
        code = main(
            [
                "depth",
                "--calib", os.path.join(out, "calib.json"),
                "--cloud", os.path.join(out, "cloud.tens"),
                "--df", "16",
                "--out", dep,
            ]
        )
        assert code == 0
        cloud = lapt.raycast(scene, spec)
        for cam in scene.cameras:
            full, low = depth_for_camera(
                cloud, scene.lidar_pose, cam.pose, cam.intrinsics, 16
            )
            on_disk = open(os.path.join(dep, f"depth_{cam.name}.tens"), "rb").read()
            assert on_disk == encode_tensor(full.values)
            on_disk_low = open(os.path.join(dep, f"lowres_{cam.name}.tens"), "rb").read()
            assert on_disk_low == encode_tensor(low.values)

    def test_empty_cloud_gives_sentinel_depth(self, sim_dir, tmp_path):
        out, scene, _ = sim_dir
        empty = str(tmp_path / "empty.tens")
        write_tensor(empty, np.zeros((0, 3), np.float64))
        dep = str(tmp_path / "dep")
        assert main(
            ["depth", "--calib", os.path.join(out, "calib.json"), "--cloud", empty,
             "--df", "16", "--out", dep]
        ) == 0
        cam = scene.cameras[0].name
        assert np.all(np.isinf(read_tensor(os.path.join(dep, f"depth_{cam}.tens"))))

    def test_missing_cloud_names_path(self, sim_dir, tmp_path, capsys):
        out, _, _ = sim_dir
        missing = str(tmp_path / "nope.tens")
        code = main(
            ["depth", "--calib", os.path.join(out, "calib.json"), "--cloud", missing,
             "--df", "16", "--out", str(tmp_path / "d")]
        )
        assert code == 2
        assert "nope.tens" in capsys.readouterr().err

    def test_non_divisible_df_names_camera(self, sim_dir, tmp_path, capsys):
        out, scene, _ = sim_dir
        code = main(
            ["depth", "--calib", os.path.join(out, "calib.json"),
             "--cloud", os.path.join(out, "cloud.tens"),
             "--df", "7", "--out", str(tmp_path / "d")]
        )
        assert code == 2
        assert scene.cameras[0].name in capsys.readouterr().err

    def test_pool_only_mode(self, sim_dir, tmp_path):
        out, scene, _ = sim_dir
        name = scene.cameras[0].name
        pooled_dir = str(tmp_path / "pool")
        code = main(
            ["depth", "--depth-image", os.path.join(out, f"ideal_depth_{name}.tens"),
             "--df", "8", "--out", pooled_dir]
        )
        assert code == 0
        from lapt import DepthImage

        ideal = read_tensor(os.path.join(out, f"ideal_depth_{name}.tens"))
        expected = minpool(DepthImage(ideal), 8).values
        np.testing.assert_array_equal(
            read_tensor(os.path.join(pooled_dir, "lowres.tens")), expected
        )


class TestBevCommand:
    def _run(self, sim_dir, tmp_path, source_flag):
        out, scene, spec = sim_dir
        args = [
            "bev",
            "--calib", os.path.join(out, "calib.json"),
            "--cloud", os.path.join(out, "cloud.tens"),
            "--df", "16",
            "--grid-extent=-16,16,-16,16",
            "--grid-cell", "0.5",
            "--out", str(tmp_path / "bev"),
            "--threshold", "0",
        ]
        for cam in scene.cameras:
            args += [source_flag, f"{cam.name}={os.path.join(out, f'image_{cam.name}.tens')}"]
        return args, str(tmp_path / "bev")

    def test_matches_library_and_is_deterministic(self, sim_dir, tmp_path):
        out, scene, spec = sim_dir
        args, bev_dir = self._run(sim_dir, tmp_path, "--images")
        assert main(args) == 0
        first = open(os.path.join(bev_dir, "bev.tens"), "rb").read()

        cloud, views = scenes.rig_camera_views(scene, spec, 16)
        cfg = GridConfig(-16, 16, -16, 16, 0.5)
        expected = build_bev(views, cfg)
        assert first == encode_tensor(expected.values)

        sidecar = json.load(open(os.path.join(bev_dir, "bev.json")))
        assert sidecar["grid"] == cfg.to_dict()
        assert sidecar["n_f"] == 3

        assert main(args) == 0
        assert open(os.path.join(bev_dir, "bev.tens"), "rb").read() == first

    def test_feature_tensors_accepted(self, sim_dir, tmp_path):
        out, scene, spec = sim_dir
        feat_paths = []
        for cam in scene.cameras:
            img = read_tensor(os.path.join(out, f"image_{cam.name}.tens"))
            fm = standin_encoder(img, 16)
            p = str(tmp_path / f"feat_{cam.name}.tens")
            write_tensor(p, fm.values)
            feat_paths.append((cam.name, p))
        args = [
            "bev",
            "--calib", os.path.join(out, "calib.json"),
            "--cloud", os.path.join(out, "cloud.tens"),
            "--df", "16",
            "--grid-extent=-16,16,-16,16",
            "--out", str(tmp_path / "bev2"),
        ]
        for name, p in feat_paths:
            args += ["--features", f"{name}={p}"]
        assert main(args) == 0
        a = read_tensor(str(tmp_path / "bev2" / "bev.tens"))
        assert a.shape == (3, 64, 64) and np.abs(a).sum() > 0

    def test_unknown_camera_rejected(self, sim_dir, tmp_path, capsys):
        out, _, _ = sim_dir
        args = [
            "bev", "--calib", os.path.join(out, "calib.json"),
            "--cloud", os.path.join(out, "cloud.tens"),
            "--images", f"ghost={os.path.join(out, 'cloud.tens')}",
            "--out", str(tmp_path / "x"),
        ]
        assert main(args) == 2
        assert "ghost" in capsys.readouterr().err

    def test_bad_name_value_pair(self, sim_dir, tmp_path, capsys):
        out, _, _ = sim_dir
        args = [
            "bev", "--calib", os.path.join(out, "calib.json"),
            "--cloud", os.path.join(out, "cloud.tens"),
            "--images", "justapath.tens",
            "--out", str(tmp_path / "x"),
        ]
        assert main(args) == 2
        assert "NAME=PATH" in capsys.readouterr().err

    def test_dimension_mismatch_names_camera(self, sim_dir, tmp_path, capsys):
        out, scene, _ = sim_dir
        bad = str(tmp_path / "bad.tens")
        write_tensor(bad, np.zeros((3, 5, 5), np.float32))
        args = [
            "bev", "--calib", os.path.join(out, "calib.json"),
            "--cloud", os.path.join(out, "cloud.tens"),
            "--df", "16",
            "--features", f"{scene.cameras[0].name}={bad}",
            "--out", str(tmp_path / "x"),
        ]
        assert main(args) == 2
        assert scene.cameras[0].name in capsys.readouterr().err


class TestGtAndEvalCommands:
    def _write_annotations(self, tmp_path):
        doc = {
            "boxes": [
                {"center": [0, 0, 0], "size": [2, 2, 1], "yaw": 0.0, "label": "car"}
            ],
            "polygons": [],
        }
        path = str(tmp_path / "ann.json")
        with open(path, "w") as f:
            json.dump(doc, f)
        return path

    def test_gt_box_example(self, tmp_path):
        ann = self._write_annotations(tmp_path)
        out = str(tmp_path / "gt")
        code = main(
            ["gt", ann, "--grid-extent=-2,2,-2,2", "--grid-cell", "0.5", "--out", out]
        )
        assert code == 0
        values = read_tensor(os.path.join(out, "gt.tens"))
        assert values.shape == (1, 8, 8) and values.sum() == 16
        sidecar = json.load(open(os.path.join(out, "gt.json")))
        assert sidecar["classes"] == ["car"]

    def test_gt_with_grouping(self, tmp_path):
        ann = self._write_annotations(tmp_path)
        cls = str(tmp_path / "cls.json")
        with open(cls, "w") as f:
            json.dump({"vehicle": ["car", "truck"]}, f)
        out = str(tmp_path / "gt")
        assert main(
            ["gt", ann, "--classes", cls, "--grid-extent=-2,2,-2,2",
             "--grid-cell", "0.5", "--out", out]
        ) == 0
        sidecar = json.load(open(os.path.join(out, "gt.json")))
        assert sidecar["classes"] == ["vehicle"]

    def test_eval_self_is_perfect(self, tmp_path, capsys):
        ann = self._write_annotations(tmp_path)
        out = str(tmp_path / "gt")
        main(["gt", ann, "--grid-extent=-2,2,-2,2", "--grid-cell", "0.5", "--out", out])
        gt_path = os.path.join(out, "gt.tens")
        report_path = str(tmp_path / "report.json")
        assert main(["eval", gt_path, gt_path, "--out", report_path]) == 0
        stdout = capsys.readouterr().out
        assert "car" in stdout and "100.00%" in stdout
        report = json.load(open(report_path))
        assert report["classes"]["car"]["iou"] == 1.0

    def test_eval_logits_loss(self, tmp_path):
        gt = np.zeros((1, 4, 4), np.uint8)
        gt[0, 0, 0] = 1
        logits = np.full((1, 4, 4), -3.0, np.float32)
        logits[0, 0, 0] = 3.0
        gt_path = str(tmp_path / "gt.tens")
        pred_path = str(tmp_path / "pred.tens")
        write_tensor(gt_path, gt)
        write_tensor(pred_path, logits)
        report_path = str(tmp_path / "rep.json")
        assert main(
            ["eval", pred_path, gt_path, "--logits", "--pos-weight", "2.13",
             "--out", report_path]
        ) == 0
        report = json.load(open(report_path))
        from lapt import bce_loss

        expected = bce_loss(logits.astype(np.float64), gt, 2.13)
        assert report["loss"] == pytest.approx(expected, rel=1e-12)
        assert report["classes"]["class_0"]["iou"] == 1.0

    def test_eval_shape_mismatch(self, tmp_path, capsys):
        a = str(tmp_path / "a.tens")
        b = str(tmp_path / "b.tens")
        write_tensor(a, np.zeros((1, 4, 4), np.uint8))
        write_tensor(b, np.zeros((1, 5, 5), np.uint8))
        assert main(["eval", a, b]) == 2


class TestSubprocessInvocation:
    def test_module_entry_point(self, tmp_path):
        path, _, _ = scene_json(tmp_path)
        out = subprocess.run(
            [sys.executable, "-m", "lapt", "simulate", path, "--out", str(tmp_path / "s")],
            capture_output=True,
            text=True,
        )
        assert out.returncode == 0, out.stderr
        assert os.path.exists(tmp_path / "s" / "cloud.tens")

    def test_validation_exit_code(self, tmp_path):
        out = subprocess.run(
            [sys.executable, "-m", "lapt", "simulate", str(tmp_path / "no.json"),
             "--out", str(tmp_path)],
            capture_output=True,
            text=True,
        )
        assert out.returncode == 2
        assert "no.json" in out.stderr

    def test_end_to_end_compose(self, tmp_path):
        path, scene, _ = scene_json(tmp_path)
        sim = str(tmp_path / "sim")
        dep = str(tmp_path / "dep")
        bev = str(tmp_path / "bev")
        env = dict(os.environ)
        run = lambda *args: subprocess.run(
            [sys.executable, "-m", "lapt", *args], capture_output=True, text=True, env=env
        )
        assert run("simulate", path, "--out", sim).returncode == 0
        assert run(
            "depth", "--calib", f"{sim}/calib.json", "--cloud", f"{sim}/cloud.tens",
            "--df", "16", "--out", dep,
        ).returncode == 0
        args = [
            "bev", "--calib", f"{sim}/calib.json", "--cloud", f"{sim}/cloud.tens",
            "--df", "16", "--grid-extent=-16,16,-16,16", "--out", bev,
        ]
        for cam in scene.cameras:
            args += ["--images", f"{cam.name}={sim}/image_{cam.name}.tens"]
        assert run(*args).returncode == 0
        grid = read_tensor(os.path.join(bev, "bev.tens"))
        assert np.abs(grid).sum() > 0
