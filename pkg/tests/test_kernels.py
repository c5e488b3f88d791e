import os
import subprocess
import sys

import numpy as np
import pytest

from lapt import _kernels

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not active")


@needs_numba
class TestBackendParity:
    """The numba loops and the numpy fallbacks must agree bitwise."""

    def test_scatter_min(self):
        rng = np.random.default_rng(70)
        n = 50_000
        iu = rng.integers(0, 64, n)
        iv = rng.integers(0, 48, n)
        depth = rng.uniform(0.1, 90.0, n)
        a = np.full((48, 64), np.inf)
        b = np.full((48, 64), np.inf)
        _kernels.scatter_min_numba(iu, iv, depth, a)
        _kernels.scatter_min_numpy(iu, iv, depth, b)
        np.testing.assert_array_equal(a, b)

    def test_minpool2d(self):
        rng = np.random.default_rng(71)
        values = rng.uniform(0.1, 50.0, (128, 96))
        values[rng.random((128, 96)) < 0.5] = np.inf
        for df in (2, 4, 8, 16):
            np.testing.assert_array_equal(
                _kernels.minpool2d_numba(values, df), _kernels.minpool2d_numpy(values, df)
            )

    def test_scatter_add_vectors(self):
        rng = np.random.default_rng(72)
        n = 30_000
        ix = rng.integers(0, 32, n)
        iy = rng.integers(0, 32, n)
        feats = rng.uniform(-1, 1, (n, 4)).astype(np.float32)
        a = np.zeros((4, 32, 32), np.float32)
        b = np.zeros((4, 32, 32), np.float32)
        _kernels.scatter_add_vectors_numba(ix, iy, feats, a)
        _kernels.scatter_add_vectors_numpy(ix, iy, feats, b)
        np.testing.assert_array_equal(a, b)

    def test_raycast_rays(self):
        rng = np.random.default_rng(73)
        n_rays = 5_000
        dirs = rng.normal(size=(n_rays, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        origin = np.array([0.0, 0.0, 1.7])
        n_box = 6
        centers = np.append(rng.uniform(-6, 6, (n_box, 2)), rng.uniform(0, 2, (n_box, 1)), axis=1)
        halves = rng.uniform(0.2, 1.5, (n_box, 3))
        yaws = rng.uniform(-np.pi, np.pi, n_box)
        args = (origin, dirs, 0.0, centers, halves, np.cos(yaws), np.sin(yaws), 50.0)
        t_a, id_a = _kernels.raycast_rays_numba(*args)
        t_b, id_b = _kernels.raycast_rays_numpy(*args)
        np.testing.assert_array_equal(t_a, t_b)
        np.testing.assert_array_equal(id_a, id_b)


class TestBackendSelection:
    def test_env_flag_forces_numpy(self):
        code = "import lapt; print(lapt.BACKEND)"
        env = dict(os.environ, LAPT_DISABLE_NUMBA="1")
        out = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True
        )
        assert out.returncode == 0, out.stderr
        assert out.stdout.strip() == "numpy"

    def test_flag_zero_means_enabled(self):
        assert not _kernels.numba_disabled_by_env() or os.environ.get("LAPT_DISABLE_NUMBA")

    def test_active_backend_consistent(self):
        if _kernels.HAVE_NUMBA:
            assert _kernels.BACKEND == "numba"
            assert _kernels.scatter_min is _kernels.scatter_min_numba
        else:
            assert _kernels.BACKEND == "numpy"
            assert _kernels.scatter_min is _kernels.scatter_min_numpy
