"""Human-shaped and rectangular screens on a plane normal to the LoS.

A silhouette is an occupancy grid of square cells of side ``pitch_m`` in the
plane's (u, v) coordinates.  Cell ``(i, j)`` of the array covers
``[(i0 + i) p, (i0 + i + 1) p) x [(j0 + j) p, (j0 + j + 1) p)``, so the lattice
is anchored at the plane origin (the body centroid) and never re-gridded when
the screen is translated.

Boundaries are traced along cell edges ("crack" edges) with the occupied side
on the left, so outer contours run counter-clockwise and holes clockwise.
Diagonal-only contacts are split (occupied cells are 4-connected).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from ..geometry import GeometryError, Plane, as_vec, project_points

DEFAULT_PITCH_M = 0.01
HUMAN_SHAPED = "human_shaped"
RECTANGULAR = "rectangular"
SYNTHETIC = "synthetic"

# step vectors for direction codes 0..3 (counter-clockwise order)
_STEP = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]])


class ScreenError(ValueError):
    pass


@dataclass(frozen=True)
class HumanFrame:
    """Body point cloud at one instant; ``point_ids`` give marker identity."""

    t_s: float
    points: np.ndarray
    point_ids: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1 and pts.size == 3:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
            raise ScreenError("a frame needs at least one 3-D point")
        if not np.all(np.isfinite(pts)) or not np.isfinite(self.t_s):
            raise ScreenError("non-finite frame data")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "t_s", float(self.t_s))
        if self.point_ids is not None:
            ids = np.asarray(self.point_ids)
            if ids.shape != (len(pts),):
                raise ScreenError("point_ids must match the number of points")
            object.__setattr__(self, "point_ids", ids)

    @property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)


@dataclass(frozen=True)
class ScreenSilhouette:
    plane: Plane
    pitch_m: float
    occupancy: np.ndarray  # bool, [n_u, n_v]
    index_origin: tuple[int, int]  # lattice index (i0, j0) of occupancy[0, 0]
    boundary: tuple[np.ndarray, ...]  # closed chains of (u, v) vertices, last != first
    kind: str = SYNTHETIC
    _smoothed: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def area_m2(self) -> float:
        return float(self.occupancy.sum()) * self.pitch_m**2

    @property
    def is_empty(self) -> bool:
        return not self.occupancy.any()

    def cell_centers(self) -> np.ndarray:
        """(N, 2) centers of occupied cells."""
        i, j = np.nonzero(self.occupancy)
        p = self.pitch_m
        return np.stack([(i + self.index_origin[0] + 0.5) * p, (j + self.index_origin[1] + 0.5) * p], axis=-1)

    def extent(self) -> tuple[float, float, float, float]:
        """(u_min, u_max, v_min, v_max) of the occupied cells."""
        if self.is_empty:
            raise ScreenError("empty screen has no extent")
        i, j = np.nonzero(self.occupancy)
        p = self.pitch_m
        i0, j0 = self.index_origin
        return ((i.min() + i0) * p, (i.max() + i0 + 1) * p, (j.min() + j0) * p, (j.max() + j0 + 1) * p)

    def occupied_at(self, u: float, v: float) -> bool:
        """Occupancy at (u, v); points on a cell edge or corner see every touching cell."""
        p = self.pitch_m
        cand = []
        for x, origin in ((u / p, self.index_origin[0]), (v / p, self.index_origin[1])):
            k = int(np.floor(x))
            idx = {k}
            r = round(x)
            if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
                idx = {int(r) - 1, int(r)}
            cand.append([k - origin for k in idx])
        nu, nv = self.occupancy.shape
        for i in cand[0]:
            for j in cand[1]:
                if 0 <= i < nu and 0 <= j < nv and self.occupancy[i, j]:
                    return True
        return False

    def translated(self, origin) -> "ScreenSilhouette":
        """Same silhouette on a parallel plane through ``origin``."""
        plane = Plane(as_vec(origin), self.plane.normal)
        return replace(self, plane=plane, _smoothed=self._smoothed)

    def smoothed_boundary(self, sigma_m: float) -> tuple[np.ndarray, ...]:
        """Boundary chains low-passed along arc length (circular Gaussian)."""
        key = round(sigma_m / self.pitch_m, 6)
        out = self._smoothed.get(key)
        if out is None:
            sig = sigma_m / self.pitch_m
            out = tuple(
                ndimage.gaussian_filter1d(c, sig, axis=0, mode="wrap") if sig > 0 and len(c) > 4 else c.copy()
                for c in self.boundary
            )
            self._smoothed[key] = out
        return out


# -- grids and boundaries -------------------------------------------------------


def trace_boundary(occ: np.ndarray, index_origin=(0, 0)) -> list[np.ndarray]:
    """Closed crack-edge chains (integer lattice vertices) with occupied cells on the left."""
    a = np.pad(np.asarray(occ, dtype=bool), 1)
    core = a[1:-1, 1:-1]
    nbr = {
        0: ~a[1:-1, :-2],  # below empty -> bottom edge runs +u
        1: ~a[2:, 1:-1],  # right empty -> right edge runs +v
        2: ~a[1:-1, 2:],  # above empty -> top edge runs -u
        3: ~a[:-2, 1:-1],  # left empty -> left edge runs -v
    }
    start_off = {0: (0, 0), 1: (1, 0), 2: (1, 1), 3: (0, 1)}
    out_edges: dict[tuple[int, int], list[int]] = {}
    for d, empty in nbr.items():
        ii, jj = np.nonzero(core & empty)
        di, dj = start_off[d]
        for i, j in zip((ii + di).tolist(), (jj + dj).tolist()):
            out_edges.setdefault((i, j), []).append(d)

    chains = []
    used: set[tuple[int, int, int]] = set()
    for v0 in sorted(out_edges):
        for d0 in out_edges[v0]:
            if (v0[0], v0[1], d0) in used:
                continue
            verts = []
            v, d = v0, d0
            while (v[0], v[1], d) not in used:
                used.add((v[0], v[1], d))
                verts.append(v)
                v = (v[0] + int(_STEP[d, 0]), v[1] + int(_STEP[d, 1]))
                d = _next_dir(out_edges[v], d)
            chains.append((np.asarray(verts, dtype=float) + np.asarray(index_origin, dtype=float)))
    return chains


def _next_dir(options, d):
    for turn in (1, 0, 3):  # left, straight, right: keeps diagonal contacts apart
        nd = (d + turn) % 4
        if nd in options:
            return nd
    raise ScreenError("broken boundary")  # unreachable for a valid grid


def _make_screen(plane, pitch, occ, i0, j0, kind) -> ScreenSilhouette:
    occ = np.asarray(occ, dtype=bool)
    chains = tuple(c * pitch for c in trace_boundary(occ, (i0, j0)))
    return ScreenSilhouette(plane, float(pitch), occ, (int(i0), int(j0)), chains, kind)


def _check_between(frame: HumanFrame, tx, rx) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a, b = as_vec(tx), as_vec(rx)
    d = b - a
    length = np.linalg.norm(d)
    if length == 0:
        raise GeometryError("tx and rx coincide")
    n = d / length
    c = frame.centroid
    s = float(np.dot(c - a, n))
    if not 0.0 < s < length:
        raise ScreenError("body centroid is outside the Tx-Rx slab")
    return a, n, c


def screen_plane(frame: HumanFrame, tx, rx) -> Plane:
    _, n, c = _check_between(frame, tx, rx)
    return Plane(c, n)


def _rasterize(uv: np.ndarray, pitch: float):
    idx = np.floor(uv / pitch).astype(np.int64)
    lo = idx.min(axis=0) - 1
    hi = idx.max(axis=0) + 2
    occ = np.zeros(tuple(hi - lo), dtype=bool)
    occ[idx[:, 0] - lo[0], idx[:, 1] - lo[1]] = True
    return occ, int(lo[0]), int(lo[1])


def build_screen(frame: HumanFrame, tx, rx, pitch_m: float = DEFAULT_PITCH_M) -> ScreenSilhouette:
    """Project the cloud onto the plane through its centroid and close the raster."""
    if not pitch_m > 0:
        raise ScreenError("pitch_m must be positive")
    plane = screen_plane(frame, tx, rx)
    occ, i0, j0 = _rasterize(project_points(frame.points, plane), pitch_m)
    # one-cell margin already present; closing with a 3x3 block fills pinholes
    occ = ndimage.binary_closing(np.pad(occ, 1), structure=np.ones((3, 3), bool))[1:-1, 1:-1]
    return _make_screen(plane, pitch_m, occ, i0, j0, HUMAN_SHAPED)


def rect_screen(frame: HumanFrame, tx, rx, pitch_m: float = DEFAULT_PITCH_M) -> ScreenSilhouette:
    """Cell-aligned bounding rectangle of the projected cloud."""
    if not pitch_m > 0:
        raise ScreenError("pitch_m must be positive")
    plane = screen_plane(frame, tx, rx)
    idx = np.floor(project_points(frame.points, plane) / pitch_m).astype(np.int64)
    lo, hi = idx.min(axis=0), idx.max(axis=0)
    occ = np.pad(np.ones(tuple(hi - lo + 1), dtype=bool), 1)
    return _make_screen(plane, pitch_m, occ, int(lo[0]) - 1, int(lo[1]) - 1, RECTANGULAR)


def mask_screen(plane: Plane, pitch_m: float, inside, extent, kind: str = SYNTHETIC) -> ScreenSilhouette:
    """Screen from an indicator ``inside(u, v) -> bool array`` sampled at cell centers.

    ``extent`` = (u_min, u_max, v_min, v_max) bounds the cells considered.
    """
    if not pitch_m > 0:
        raise ScreenError("pitch_m must be positive")
    u0, u1, v0, v1 = extent
    i0 = int(np.floor(u0 / pitch_m)) - 1
    j0 = int(np.floor(v0 / pitch_m)) - 1
    i1 = int(np.ceil(u1 / pitch_m)) + 1
    j1 = int(np.ceil(v1 / pitch_m)) + 1
    uc = (np.arange(i0, i1) + 0.5) * pitch_m
    vc = (np.arange(j0, j1) + 0.5) * pitch_m
    occ = np.asarray(inside(uc[:, None], vc[None, :]), dtype=bool)
    occ = np.broadcast_to(occ, (len(uc), len(vc))).copy()
    occ[0, :] = occ[-1, :] = False
    occ[:, 0] = occ[:, -1] = False
    return _make_screen(plane, pitch_m, occ, i0, j0, kind)


def box_screen(plane: Plane, u_range, v_range, pitch_m: float = DEFAULT_PITCH_M) -> ScreenSilhouette:
    """Rectangle given in plane coordinates (cells whose centers fall inside)."""
    (ua, ub), (va, vb) = u_range, v_range

    def inside(u, v):
        return (u > ua) & (u < ub) & (v > va) & (v < vb)

    return mask_screen(plane, pitch_m, inside, (ua, ub, va, vb), RECTANGULAR)


def ellipse_screen(plane: Plane, center, semi_axes, pitch_m: float = DEFAULT_PITCH_M, angle_rad: float = 0.0) -> ScreenSilhouette:
    cu, cv = center
    a, b = semi_axes
    c, s = np.cos(angle_rad), np.sin(angle_rad)

    def inside(u, v):
        x = (u - cu) * c + (v - cv) * s
        y = -(u - cu) * s + (v - cv) * c
        return (x / a) ** 2 + (y / b) ** 2 < 1.0

    r = max(a, b)
    return mask_screen(plane, pitch_m, inside, (cu - r, cu + r, cv - r, cv + r))


def empty_screen(plane: Plane, pitch_m: float = DEFAULT_PITCH_M) -> ScreenSilhouette:
    return _make_screen(plane, pitch_m, np.zeros((1, 1), bool), 0, 0, SYNTHETIC)


def los_plane(tx, rx, fraction: float = 0.5) -> Plane:
    """Plane normal to the LoS crossing it at ``fraction`` of the way from tx."""
    a, b = as_vec(tx), as_vec(rx)
    if not 0.0 < fraction < 1.0:
        raise ScreenError("fraction must be in (0, 1)")
    return Plane.through(a + fraction * (b - a), b - a)
