"""Stationary-phase edge diffraction from a silhouette boundary.

Each boundary point where the unfolded Tx-P-Rx length L(s) is a local minimum
along arc length is a diffraction point.  Its contribution is the knife-edge
diffraction term ``D(nu) = F(nu) - H(-nu)`` scaled by the stationary-phase
weight ``w = sqrt(L''_straight / L'')``, where ``L''_straight = 1/r1 + 1/r2`` is
the value a straight edge would give.  Writing ``L'' = L''_straight + dL''``
this is ``1/sqrt(1 + dL'' * rho_eff)`` with ``rho_eff = r1 r2 / (r1 + r2)``.
For an infinite strip (two parallel edges) the sum reproduces the exact
Fresnel result.

The field is computed instead by the paraxial boundary line integral
``U = 1 - (1/2pi) oint (1 - exp(-j k dL)) dtheta`` over the raw boundary when
the stationary-phase picture does not hold:

* a point is degenerate (the weight blows up because the boundary hugs a
  circle about the LoS piercing point), or fails the local check (L(s) departs
  from its quadratic model or the tangent turns across its Fresnel span) while
  it is near the shadow boundary (|nu| <= 4) or carries at least 5 % of the
  total field;
* a corner of the boundary lies near the shadow boundary or would contribute
  at least 5 % of the total field.  Corners are not stationary points, but
  their diffraction is not negligible there.

Such samples are flagged in :class:`FieldResult`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import find_peaks

from ..geometry import as_vec, project_to_plane, segment_plane_intersection
from ..qd_channel import CARRIER_HZ, wavelength
from .knife_edge import clearance_nu, diffraction_term
from .screen import ScreenError, ScreenSilhouette

# weights above this mark a near-continuum of stationary points
MAX_WEIGHT = 2.0
# stationary points with |nu| up to this must pass the quadratic-model check
NU_CHECK = 4.0
# ... as must any point contributing at least this fraction of the total field
REL_CHECK = 0.05
# tangent turning (rad) over +-2 sigma that marks a corner of the smoothed boundary
CORNER_TURN_RAD = 0.6
# allowed phase departure (rad) of L(s) from its quadratic model
QUAD_TOL_RAD = 0.5
FRESNEL_SPAN = 2.0
# largest tangent turning (rad) allowed across the Fresnel span
TURN_TOL_RAD = 0.3
# extrema shallower than this many wavelengths of path length are staircase noise
PROMINENCE_WL = 0.25
MINIMUM = "min"
MAXIMUM = "max"


@dataclass(frozen=True)
class DiffractionPath:
    point: tuple[float, float]  # (u, v) on the screen plane
    unfolded_len_m: float
    nu: float  # positive when the LoS pierces the occupied side of the edge
    coeff: complex  # weight * D(nu), relative to free space
    curvature_term: float  # L''(s) in 1/m
    weight: complex
    kind: str = MINIMUM
    degenerate: bool = False
    quadratic: bool = True  # L(s) stays quadratic over +-2 Fresnel lengths


@dataclass(frozen=True)
class FieldResult:
    gain: complex
    blocked: bool
    paths: tuple[DiffractionPath, ...]
    fallback: bool  # boundary integration used instead of stationary points
    nu_min: float


@dataclass(frozen=True)
class _Geom:
    tx: np.ndarray
    rx: np.ndarray
    d: float
    lam: float
    o_uv: np.ndarray  # LoS piercing point in plane coordinates
    blocked: bool


def _geometry(screen: ScreenSilhouette, tx, rx, f_hz) -> _Geom:
    a, b = as_vec(tx), as_vec(rx)
    hit = segment_plane_intersection(a, b, screen.plane)
    if hit is None or not 0.0 < hit[0] < 1.0:
        raise ScreenError("screen plane does not lie strictly between tx and rx")
    u, v = project_to_plane(hit[1], screen.plane)
    blocked = screen.occupied_at(u, v)
    return _Geom(a, b, float(np.linalg.norm(b - a)), wavelength(f_hz), np.array([u, v]), blocked)


def path_lengths(screen: ScreenSilhouette, uv: np.ndarray, tx, rx) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(L, r1, r2) for plane points ``uv`` of shape (..., 2)."""
    p = screen.plane.to_world(uv[..., 0], uv[..., 1])
    r1 = np.linalg.norm(p - as_vec(tx), axis=-1)
    r2 = np.linalg.norm(p - as_vec(rx), axis=-1)
    return r1 + r2, r1, r2


def default_smoothing_m(screen: ScreenSilhouette, tx, rx, f_hz=CARRIER_HZ) -> float:
    """Boundary low-pass scale: a quarter of the first Fresnel-zone radius, at least one cell."""
    a, b = as_vec(tx), as_vec(rx)
    d1 = abs(screen.plane.signed_distance(a))
    d2 = abs(screen.plane.signed_distance(b))
    fz = np.sqrt(wavelength(f_hz) * d1 * d2 / (d1 + d2))
    return max(screen.pitch_m, 0.25 * fz)


def nu_min(screen: ScreenSilhouette, tx, rx, f_hz=CARRIER_HZ) -> float:
    """Signed clearance of the boundary point closest (in excess path) to the LoS.

    Negative when the LoS is unobstructed, positive when it is blocked.  An
    empty screen gives -inf.
    """
    g = _geometry(screen, tx, rx, f_hz)
    if screen.is_empty:
        return -np.inf
    excess = min(float(path_lengths(screen, c, tx, rx)[0].min()) for c in screen.boundary) - g.d
    return float(clearance_nu(excess, g.lam, 1.0 if g.blocked else -1.0))


def _circular_extrema(values: np.ndarray, prominence: float) -> np.ndarray:
    """Indices of local minima of a closed sequence with at least ``prominence``."""
    n = len(values)
    tiled = np.concatenate([values, values, values])
    idx, _ = find_peaks(-tiled, prominence=prominence)
    idx = idx[(idx >= n) & (idx < 2 * n)] - n
    return np.unique(idx)


def _local_fit(s: np.ndarray, length: np.ndarray, i: int, half_width: float, total: float):
    """Quadratic least squares of L about vertex i; returns (s_offset, L_at, L'')."""
    ds = s - s[i]
    ds = (ds + 0.5 * total) % total - 0.5 * total
    sel = np.abs(ds) <= half_width
    if sel.sum() < 5:
        sel = np.argsort(np.abs(ds))[:5]
    x, y = ds[sel], length[sel] - length[i]
    c2, c1, c0 = np.polyfit(x, y, 2)
    curv = 2.0 * c2
    off = -c1 / (2.0 * c2) if c2 != 0 else 0.0
    off = float(np.clip(off, x.min(), x.max()))
    return off, length[i] + c0 + c1 * off + c2 * off * off, curv


def find_stationary_points(
    screen: ScreenSilhouette,
    tx,
    rx,
    f_hz: float = CARRIER_HZ,
    smoothing_m: float | None = None,
    include_maxima: bool = False,
) -> list[DiffractionPath]:
    """Local minima of L along the (smoothed) boundary, strongest first.

    Extrema whose depth is below a quarter wavelength of path length are
    treated as staircase noise and merged into their neighbors.
    """
    if screen.is_empty or not screen.boundary:
        raise ScreenError("screen has no boundary")
    g = _geometry(screen, tx, rx, f_hz)
    sigma = default_smoothing_m(screen, tx, rx, f_hz) if smoothing_m is None else smoothing_m
    half_width = max(2.0 * screen.pitch_m, 2.0 * sigma)
    out = []
    for chain in screen.smoothed_boundary(sigma):
        if len(chain) < 3:
            continue
        seg = np.linalg.norm(np.diff(chain, axis=0, append=chain[:1]), axis=1)
        total = float(seg.sum())
        s = np.concatenate([[0.0], np.cumsum(seg)[:-1]])
        length, _, _ = path_lengths(screen, chain, tx, rx)
        kinds = [(MINIMUM, _circular_extrema(length, PROMINENCE_WL * g.lam))]
        if include_maxima:
            kinds.append((MAXIMUM, _circular_extrema(-length, PROMINENCE_WL * g.lam)))
        for kind, idx in kinds:
            for i in idx:
                off, lfit, curv = _local_fit(s, length, int(i), half_width, total)
                path = _make_path(screen, g, chain, s, total, int(i), off, curv, kind)
                quad = _quadratic_ok(s, length, int(i), off, lfit, curv, total, g) and _straight_enough(chain, s, int(i), off, curv, total, g)
                out.append(replace(path, quadratic=quad))
    out.sort(key=lambda p: (p.unfolded_len_m, p.point))
    return out


def _quadratic_ok(s, length, i, off, lfit, curv, total, g: _Geom) -> bool:
    """Does L(s) follow its local quadratic across the Fresnel span of the point?

    Corners, tight bends and short chains near the stationary point break the
    stationary-phase amplitude; those points are flagged.
    """
    span = _fresnel_span(curv, g)
    if 2 * span >= total:
        return False
    ds = s - (s[i] + off)
    ds = (ds + 0.5 * total) % total - 0.5 * total
    sel = np.abs(ds) <= span
    model = lfit + 0.5 * curv * ds[sel] ** 2
    k = 2 * np.pi / g.lam
    return bool(k * np.max(np.abs(length[sel] - model)) <= QUAD_TOL_RAD)


def _fresnel_span(curv, g: _Geom) -> float:
    straight = 2.0 / (g.d * 0.5)  # upper bound of 1/r1 + 1/r2 scale, only sets the span
    return FRESNEL_SPAN * np.sqrt(g.lam / max(abs(curv), 0.25 * straight))


def _straight_enough(chain, s, i, off, curv, total, g: _Geom) -> bool:
    """Tangent direction must not turn by more than TURN_TOL_RAD across the span."""
    span = _fresnel_span(curv, g)
    if 2 * span >= total:
        return False
    ds = s - (s[i] + off)
    ds = (ds + 0.5 * total) % total - 0.5 * total
    sel = np.nonzero(np.abs(ds) <= span)[0]
    order = sel[np.argsort(ds[sel])]
    t = np.diff(chain[order], axis=0)
    ang = np.unwrap(np.arctan2(t[:, 1], t[:, 0]))
    return bool(ang.size < 2 or np.ptp(ang) <= TURN_TOL_RAD)


def _point_on_chain(chain, s, total, i, off):
    n = len(chain)
    target = (s[i] + off) % total
    k = int(np.searchsorted(s, target, side="right") - 1) % n
    seg_start = chain[k]
    seg_end = chain[(k + 1) % n]
    seg_len = np.linalg.norm(seg_end - seg_start)
    t = 0.0 if seg_len == 0 else (target - s[k]) / seg_len
    tangent = seg_end - seg_start if seg_len > 0 else chain[(i + 1) % n] - chain[i - 1]
    return seg_start + t * (seg_end - seg_start), tangent / np.linalg.norm(tangent)


def _make_path(screen, g: _Geom, chain, s, total, i, off, curv, kind) -> DiffractionPath:
    p, t = _point_on_chain(chain, s, total, i, off)
    length, r1, r2 = path_lengths(screen, p, g.tx, g.rx)
    length, r1, r2 = float(length), float(r1), float(r2)
    # occupied side is to the left of the tangent
    left = np.array([-t[1], t[0]])
    side = float(np.dot(g.o_uv - p, left))
    nu = float(clearance_nu(length - g.d, g.lam, 1.0 if side >= 0 else -1.0))
    straight = 1.0 / r1 + 1.0 / r2
    ratio = abs(curv) / straight
    degenerate = ratio < 1.0 / MAX_WEIGHT**2
    w = 1.0 / np.sqrt(max(ratio, 1.0 / MAX_WEIGHT**2))
    weight = complex(w) if kind == MINIMUM else 1j * w
    coeff = weight * diffraction_term(nu)
    return DiffractionPath((float(p[0]), float(p[1])), length, nu, complex(coeff), float(curv), weight, kind, bool(degenerate))


def boundary_elements(screen: ScreenSilhouette, tx, rx, f_hz: float = CARRIER_HZ, max_dphase: float = 0.3, nsub=None):
    """Discretized boundary line integral: (nsub per raw edge, excess path, dtheta) per element.

    Each raw boundary edge is cut into ``nsub`` pieces, enough that the phase
    ``k dL`` moves by at most ``max_dphase`` per piece.  Passing ``nsub``
    reuses a discretization, e.g. for the same screen at another position.
    """
    g = _geometry(screen, tx, rx, f_hz)
    k = 2 * np.pi / g.lam
    chains = screen.boundary
    a = np.concatenate(chains)
    b = np.concatenate([np.roll(c, -1, axis=0) for c in chains])
    if nsub is None:
        la = path_lengths(screen, a, tx, rx)[0]
        lb = path_lengths(screen, b, tx, rx)[0]
        # phase slope is monotone enough across one cell to size the sub-steps from the ends
        nsub = np.maximum(1, np.ceil(k * np.abs(lb - la) / max_dphase).astype(int) + 1)
    excess, dtheta = [], []
    for n in np.unique(nsub):
        sel = nsub == n
        t = np.linspace(0.0, 1.0, n + 1)
        pts = a[sel, None, :] + t[None, :, None] * (b[sel] - a[sel])[:, None, :]
        rel = pts - g.o_uv
        theta = np.arctan2(rel[..., 1], rel[..., 0])
        dt = np.diff(theta, axis=1)
        dtheta.append(((dt + np.pi) % (2 * np.pi) - np.pi).ravel())
        mid = 0.5 * (pts[:, 1:] + pts[:, :-1])
        excess.append((path_lengths(screen, mid, tx, rx)[0] - g.d).ravel())
    return nsub, np.concatenate(excess), np.concatenate(dtheta)


def boundary_sum(excess: np.ndarray, dtheta: np.ndarray, lam: float) -> complex:
    """Field from boundary elements; leading axes of the arrays are kept."""
    k = 2 * np.pi / lam
    out = 1.0 - np.sum((1.0 - np.exp(-1j * k * excess)) * dtheta, axis=-1) / (2 * np.pi)
    return complex(out) if np.ndim(out) == 0 else out


def boundary_integral_field(screen: ScreenSilhouette, tx, rx, f_hz: float = CARRIER_HZ, max_dphase: float = 0.3) -> complex:
    """Paraxial line-integral field over the raw (unsmoothed) boundary."""
    _, excess, dtheta = boundary_elements(screen, tx, rx, f_hz, max_dphase)
    return boundary_sum(excess, dtheta, wavelength(f_hz))


def corner_nu(screen: ScreenSilhouette, tx, rx, f_hz: float = CARRIER_HZ, smoothing_m: float | None = None) -> float:
    """Smallest |nu| over corner vertices of the smoothed boundary (inf if none).

    Corners carry vertex-diffraction terms that stationary points do not
    model; close to the LoS they spoil the sum even when no stationary point
    sits on them.
    """
    g = _geometry(screen, tx, rx, f_hz)
    sigma = default_smoothing_m(screen, tx, rx, f_hz) if smoothing_m is None else smoothing_m
    w = max(2.0 * sigma, 2.0 * screen.pitch_m)
    best = np.inf
    for chain in screen.smoothed_boundary(sigma):
        if len(chain) < 5:
            continue
        seg = np.diff(chain, axis=0, append=chain[:1])
        ds = np.linalg.norm(seg, axis=1)
        total = float(ds.sum())
        if 2 * w >= total:
            continue
        ang = np.unwrap(np.arctan2(seg[:, 1], seg[:, 0]))
        s = np.cumsum(ds) - 0.5 * ds  # arc length at segment midpoints
        turn_total = ang[-1] - ang[0] + (np.arctan2(np.sin(ang[0] - ang[-1]), np.cos(ang[0] - ang[-1])))
        # periodic extension: one lap adds the total turning (+-2 pi)
        s3 = np.concatenate([s - total, s, s + total])
        a3 = np.concatenate([ang - turn_total, ang, ang + turn_total])
        turn = np.interp(s + w, s3, a3) - np.interp(s - w, s3, a3)
        sel = np.abs(turn) > CORNER_TURN_RAD
        if not np.any(sel):
            continue
        length = path_lengths(screen, chain[sel], tx, rx)[0]
        best = min(best, float(clearance_nu(np.min(length) - g.d, g.lam)))
    return best


def edge_field_detail(
    screen: ScreenSilhouette,
    tx,
    rx,
    f_hz: float = CARRIER_HZ,
    smoothing_m: float | None = None,
    include_maxima: bool = False,
) -> FieldResult:
    g = _geometry(screen, tx, rx, f_hz)
    if screen.is_empty:
        return FieldResult(1.0 + 0.0j, False, (), False, -np.inf)
    nmin = nu_min(screen, tx, rx, f_hz)
    paths = tuple(find_stationary_points(screen, tx, rx, f_hz, smoothing_m, include_maxima))
    if paths:
        # The LoS term must agree with the sign of nu at the nearest boundary
        # point, whose normal passes through the piercing point; near an edge
        # the cell rule of los_blocked and the smoothed boundary can disagree.
        inside = paths[0].nu >= 0
        gain = complex((0.0 if inside else 1.0) + sum(p.coeff for p in paths))
        floor = REL_CHECK * abs(gain)
        suspect = any(p.degenerate or (not p.quadratic and (abs(p.nu) <= NU_CHECK or abs(p.coeff) >= floor)) for p in paths)
        if not suspect:
            nc = corner_nu(screen, tx, rx, f_hz, smoothing_m)
            suspect = bool(np.isfinite(nc) and (nc <= NU_CHECK or abs(diffraction_term(nc)) >= floor))
        if not suspect:
            return FieldResult(gain, g.blocked, paths, False, nmin)
    return FieldResult(boundary_integral_field(screen, tx, rx, f_hz), g.blocked, paths, True, nmin)


def edge_field(screen: ScreenSilhouette, tx, rx, f_hz: float = CARRIER_HZ, **kw) -> complex:
    """LoS-normalized field behind the screen from stationary-point edge diffraction."""
    return edge_field_detail(screen, tx, rx, f_hz, **kw).gain
