"""Hot numeric kernels with two interchangeable backends.

Every kernel exists twice: a numba ``@njit`` loop (``*_numba``) and a pure
vectorized numpy implementation (``*_numpy``). The module-level names
(``scatter_min``, ``minpool2d``, ``scatter_add_vectors``, ``raycast_rays``)
are bound to one backend at import time:

* numba, when importable, unless the environment variable
  ``LAPT_DISABLE_NUMBA`` is set to anything other than ``""`` or ``"0"``;
* the numpy fallback otherwise.

Both variants stay importable so the benchmark suite and the backend-parity
tests can compare them directly. The two backends must agree bitwise: the
kernels only select, min, or accumulate in a fixed order, with no fastmath.
"""

import os

import numpy as np

# Minimum ray parameter: hits closer than this are treated as self-hits.
RAY_EPS = 1e-9

_NO_HIT = -1
_HIT_GROUND = 0


def numba_disabled_by_env() -> bool:
    return os.environ.get("LAPT_DISABLE_NUMBA", "").strip() not in ("", "0")


try:
    if numba_disabled_by_env():
        raise ImportError("numba disabled via LAPT_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


# ---------------------------------------------------------------------------
# z-buffer scatter-min


def scatter_min_numpy(iu, iv, depth, out):
    """Per-pixel minimum of depths scattered at integer pixel indices."""
    np.minimum.at(out, (iv, iu), depth)


def _scatter_min_loop(iu, iv, depth, out):
    for n in range(iu.shape[0]):
        d = depth[n]
        if d < out[iv[n], iu[n]]:
            out[iv[n], iu[n]] = d


# ---------------------------------------------------------------------------
# window min-pooling


def minpool2d_numpy(values, df):
    h, w = values.shape
    return values.reshape(h // df, df, w // df, df).min(axis=(1, 3))


def _minpool2d_loop(values, df):
    h, w = values.shape
    out = np.empty((h // df, w // df), values.dtype)
    for i in range(h // df):
        for j in range(w // df):
            m = values[i * df, j * df]
            for a in range(df):
                for b in range(df):
                    v = values[i * df + a, j * df + b]
                    if v < m:
                        m = v
            out[i, j] = m
    return out


# ---------------------------------------------------------------------------
# pillar sum-pooling scatter-add


def scatter_add_vectors_numpy(ix, iy, feats, out):
    """Accumulate per-point feature vectors into out[:, ix, iy]."""
    for c in range(out.shape[0]):
        np.add.at(out[c], (ix, iy), feats[:, c])


def _scatter_add_vectors_loop(ix, iy, feats, out):
    for n in range(ix.shape[0]):
        for c in range(out.shape[0]):
            out[c, ix[n], iy[n]] += feats[n, c]


# ---------------------------------------------------------------------------
# raycasting against a ground plane and yaw-rotated boxes
#
# Boxes are passed decomposed (centers, half sizes, yaw cos/sin) so the same
# kernel serves both backends without object types. Returns, per ray, the
# smallest parameter t with RAY_EPS < t <= t_max and the id of the surface
# hit: -1 none, 0 ground plane, 1 + b for box b. Rays starting inside a box
# do not hit it.


def raycast_rays_numpy(origin, dirs, ground_z, centers, halves, yaw_cos, yaw_sin, t_max):
    n = dirs.shape[0]
    best_t = np.full(n, np.inf)
    best_id = np.full(n, _NO_HIT, np.int64)

    dz = dirs[:, 2]
    nonflat = dz != 0.0
    t = np.where(nonflat, (ground_z - origin[2]) / np.where(nonflat, dz, 1.0), np.inf)
    ok = (t > RAY_EPS) & (t <= t_max) & (t < best_t)
    best_t[ok] = t[ok]
    best_id[ok] = _HIT_GROUND

    for b in range(centers.shape[0]):
        c, s = yaw_cos[b], yaw_sin[b]
        px = origin[0] - centers[b, 0]
        py = origin[1] - centers[b, 1]
        pz = origin[2] - centers[b, 2]
        # rotate into the box frame (inverse yaw)
        p = np.array([c * px + s * py, -s * px + c * py, pz])
        dx = c * dirs[:, 0] + s * dirs[:, 1]
        dy = -s * dirs[:, 0] + c * dirs[:, 1]
        d = np.stack([dx, dy, dirs[:, 2]], axis=1)

        tlo = np.full(n, -np.inf)
        thi = np.full(n, np.inf)
        for a in range(3):
            da = d[:, a]
            zero = da == 0.0
            safe = np.where(zero, 1.0, da)
            t1 = (-halves[b, a] - p[a]) / safe
            t2 = (halves[b, a] - p[a]) / safe
            lo = np.minimum(t1, t2)
            hi = np.maximum(t1, t2)
            inside = abs(p[a]) <= halves[b, a]
            lo = np.where(zero, np.where(inside, -np.inf, np.inf), lo)
            hi = np.where(zero, np.where(inside, np.inf, -np.inf), hi)
            tlo = np.maximum(tlo, lo)
            thi = np.minimum(thi, hi)

        ok = (thi >= tlo) & (tlo > RAY_EPS) & (tlo <= t_max) & (tlo < best_t)
        best_t[ok] = tlo[ok]
        best_id[ok] = 1 + b

    return best_t, best_id


def _raycast_rays_loop(origin, dirs, ground_z, centers, halves, yaw_cos, yaw_sin, t_max):
    n = dirs.shape[0]
    best_t = np.full(n, np.inf)
    best_id = np.full(n, _NO_HIT, np.int64)
    for i in range(n):
        dz = dirs[i, 2]
        if dz != 0.0:
            t = (ground_z - origin[2]) / dz
            if RAY_EPS < t <= t_max and t < best_t[i]:
                best_t[i] = t
                best_id[i] = _HIT_GROUND
        for b in range(centers.shape[0]):
            c = yaw_cos[b]
            s = yaw_sin[b]
            px = origin[0] - centers[b, 0]
            py = origin[1] - centers[b, 1]
            p0 = c * px + s * py
            p1 = -s * px + c * py
            p2 = origin[2] - centers[b, 2]
            d0 = c * dirs[i, 0] + s * dirs[i, 1]
            d1 = -s * dirs[i, 0] + c * dirs[i, 1]
            d2 = dirs[i, 2]
            tlo = -np.inf
            thi = np.inf
            miss = False
            for a in range(3):
                if a == 0:
                    pa, da = p0, d0
                elif a == 1:
                    pa, da = p1, d1
                else:
                    pa, da = p2, d2
                ha = halves[b, a]
                if da == 0.0:
                    if abs(pa) > ha:
                        miss = True
                        break
                else:
                    t1 = (-ha - pa) / da
                    t2 = (ha - pa) / da
                    lo = min(t1, t2)
                    hi = max(t1, t2)
                    if lo > tlo:
                        tlo = lo
                    if hi < thi:
                        thi = hi
            if miss:
                continue
            if thi >= tlo and RAY_EPS < tlo <= t_max and tlo < best_t[i]:
                best_t[i] = tlo
                best_id[i] = 1 + b
    return best_t, best_id


if HAVE_NUMBA:
    scatter_min_numba = njit(cache=True)(_scatter_min_loop)
    minpool2d_numba = njit(cache=True)(_minpool2d_loop)
    scatter_add_vectors_numba = njit(cache=True)(_scatter_add_vectors_loop)
    raycast_rays_numba = njit(cache=True)(_raycast_rays_loop)

    BACKEND = "numba"
    scatter_min = scatter_min_numba
    minpool2d = minpool2d_numba
    scatter_add_vectors = scatter_add_vectors_numba
    raycast_rays = raycast_rays_numba
else:
    scatter_min_numba = None
    minpool2d_numba = None
    scatter_add_vectors_numba = None
    raycast_rays_numba = None

    BACKEND = "numpy"
    scatter_min = scatter_min_numpy
    minpool2d = minpool2d_numpy
    scatter_add_vectors = scatter_add_vectors_numpy
    raycast_rays = raycast_rays_numpy


def warm_up():
    """Trigger JIT compilation of every kernel on tiny inputs."""
    iu = np.zeros(1, np.int64)
    scatter_min(iu, iu, np.ones(1), np.full((2, 2), np.inf))
    minpool2d(np.full((2, 2), np.inf), 2)
    scatter_add_vectors(iu, iu, np.ones((1, 1), np.float32), np.zeros((1, 2, 2), np.float32))
    raycast_rays(
        np.zeros(3),
        np.array([[0.0, 0.0, -1.0]]),
        -1.0,
        np.zeros((1, 3)),
        np.full((1, 3), 0.5),
        np.ones(1),
        np.zeros(1),
        np.inf,
    )
