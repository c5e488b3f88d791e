"""Binary BEV ground truth from 3D box annotations and map polygons.

A cell is marked when its center lies inside a shape footprint (z ignored).
Containment is closed: centers exactly on a footprint edge count as inside,
so abutting polygons rasterize without seam holes.
"""

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .bev import GridConfig

_EDGE_EPS = 1e-12


@dataclass(frozen=True)
class Box3D:
    """Oriented box: center, (length, width, height), yaw about vertical."""

    center: np.ndarray
    size: tuple[float, float, float]
    yaw: float
    class_label: str

    def __post_init__(self):
        c = np.array(self.center, dtype=np.float64).reshape(3)
        size = tuple(float(s) for s in self.size)
        if len(size) != 3 or any(s <= 0 for s in size):
            raise ValueError(f"box size components must be positive, got {size}")
        if not (-math.pi < self.yaw <= math.pi):
            raise ValueError(f"yaw must lie in (-pi, pi], got {self.yaw!r}")
        if not np.all(np.isfinite(c)):
            raise ValueError("box center must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "size", size)

    def footprint_corners(self) -> np.ndarray:
        """(4, 2) BEV corners, counter-clockwise."""
        half_l, half_w = self.size[0] / 2.0, self.size[1] / 2.0
        local = np.array(
            [[half_l, half_w], [-half_l, half_w], [-half_l, -half_w], [half_l, -half_w]]
        )
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + self.center[:2]


def _segments_properly_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0


@dataclass(frozen=True)
class MapPolygon:
    """Simple (non-self-intersecting) polygon in the vehicle ground plane."""

    vertices: np.ndarray
    class_label: str

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError(f"polygon needs at least 3 (x, y) vertices, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("polygon vertices must be finite")
        n = v.shape[0]
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue  # adjacent edges share a vertex
                if _segments_properly_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]):
                    raise ValueError(
                        f"polygon is self-intersecting (edges {i} and {j} cross)"
                    )
        v.flags.writeable = False
        object.__setattr__(self, "vertices", v)


def _points_in_polygon(px: np.ndarray, py: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Even-odd containment for flat point arrays; boundary counts as inside."""
    inside = np.zeros(px.shape, dtype=bool)
    on_edge = np.zeros(px.shape, dtype=bool)
    n = verts.shape[0]
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        # exact-ish on-segment test, scaled to the edge length
        cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        scale = max(abs(x2 - x1), abs(y2 - y1), 1.0)
        collinear = np.abs(cross) <= _EDGE_EPS * scale
        within = (
            (px >= min(x1, x2) - _EDGE_EPS)
            & (px <= max(x1, x2) + _EDGE_EPS)
            & (py >= min(y1, y2) - _EDGE_EPS)
            & (py <= max(y1, y2) + _EDGE_EPS)
        )
        on_edge |= collinear & within
        # half-open crossing rule so shared vertices are counted once
        crosses = (y1 > py) != (y2 > py)
        if np.any(crosses):
            with np.errstate(divide="ignore", invalid="ignore"):
                x_at = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (px < x_at)
    return inside | on_edge


def rasterize_boxes(boxes: Sequence[Box3D], config: GridConfig) -> np.ndarray:
    """Cells whose center falls inside any box footprint; bool (nx, ny)."""
    cx, cy = config.cell_centers()
    out = np.zeros(cx.shape, dtype=bool)
    for box in boxes:
        c, s = math.cos(box.yaw), math.sin(box.yaw)
        dx = cx - box.center[0]
        dy = cy - box.center[1]
        local_x = c * dx + s * dy
        local_y = -s * dx + c * dy
        out |= (np.abs(local_x) <= box.size[0] / 2.0) & (np.abs(local_y) <= box.size[1] / 2.0)
    return out


def rasterize_polygons(polys: Sequence[MapPolygon], config: GridConfig) -> np.ndarray:
    """Cells whose center is inside any polygon (even-odd); bool (nx, ny)."""
    cx, cy = config.cell_centers()
    out = np.zeros(cx.shape, dtype=bool)
    px, py = cx.ravel(), cy.ravel()
    for poly in polys:
        out |= _points_in_polygon(px, py, poly.vertices).reshape(cx.shape)
    return out


@dataclass(frozen=True)
class SemanticGrid:
    """(C, nx, ny) per-class grid: uint8 binary, or float probabilities."""

    classes: tuple[str, ...]
    values: np.ndarray
    config: GridConfig

    def __post_init__(self):
        classes = tuple(self.classes)
        a = np.asarray(self.values)
        if a.ndim != 3 or a.shape != (len(classes), self.config.nx, self.config.ny):
            raise ValueError(
                f"grid values must be ({len(classes)}, {self.config.nx}, {self.config.ny}), "
                f"got {a.shape}"
            )
        if a.dtype == np.uint8 or a.dtype == bool:
            a = a.astype(np.uint8)
            if not np.all((a == 0) | (a == 1)):
                raise ValueError("binary semantic grids may only contain 0 and 1")
        elif np.issubdtype(a.dtype, np.floating):
            if not np.all((a >= 0.0) & (a <= 1.0)):
                raise ValueError("probability grids must lie in [0, 1]")
            a = a.astype(np.float32) if a.dtype != np.float64 else a
        else:
            raise ValueError(f"unsupported semantic grid dtype {a.dtype}")
        a = np.array(a)
        a.flags.writeable = False
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "values", a)

    @property
    def is_binary(self) -> bool:
        return self.values.dtype == np.uint8


def build_semantic_grid(
    boxes: Sequence[Box3D],
    polygons: Sequence[MapPolygon],
    grouping: Mapping[str, Sequence[str]],
    config: GridConfig,
) -> SemanticGrid:
    """Rasterize annotations into one binary layer per target class.

    ``grouping`` maps each target class to the source labels it absorbs;
    layers follow the mapping's order. Labels not mentioned anywhere are
    ignored.
    """
    layers = []
    for target, sources in grouping.items():
        wanted = set(sources)
        layer = rasterize_boxes([b for b in boxes if b.class_label in wanted], config)
        layer |= rasterize_polygons(
            [p for p in polygons if p.class_label in wanted], config
        )
        layers.append(layer)
    values = np.stack(layers).astype(np.uint8) if layers else np.zeros(
        (0, config.nx, config.ny), np.uint8
    )
    return SemanticGrid(tuple(grouping.keys()), values, config)


def identity_grouping(
    boxes: Sequence[Box3D], polygons: Sequence[MapPolygon]
) -> dict[str, list[str]]:
    """One target class per distinct source label, sorted."""
    labels = sorted(
        {b.class_label for b in boxes} | {p.class_label for p in polygons}
    )
    return {label: [label] for label in labels}
