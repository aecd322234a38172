"""Synthetic body point clouds: a capped cylinder and an articulated walker.

Surfaces are sampled on regular (angle, length) grids at roughly
``spacing_m`` so that projected clouds have no holes wider than one cell.
Point order (and hence identity) is fixed for a given set of shape
parameters, which is what per-point interpolation between frames needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .screen import HumanFrame

DEFAULT_SPACING_M = 0.008


def _cylinder_surface(radius_a, radius_b, length, spacing):
    """Elliptic tube along +z from 0 to length, in its local frame."""
    perim = np.pi * (3 * (radius_a + radius_b) - np.sqrt((3 * radius_a + radius_b) * (radius_a + 3 * radius_b)))
    n_t = max(8, int(np.ceil(perim / spacing)))
    n_z = max(2, int(np.ceil(length / spacing)) + 1)
    t = np.arange(n_t) * 2 * np.pi / n_t
    z = np.linspace(0.0, length, n_z)
    tt, zz = np.meshgrid(t, z, indexing="ij")
    side = np.stack([radius_a * np.cos(tt).ravel(), radius_b * np.sin(tt).ravel(), zz.ravel()], axis=-1)
    # end caps as concentric rings
    caps = []
    for zc in (0.0, length):
        for frac in np.arange(spacing, 1.0, spacing / max(radius_a, radius_b)):
            n = max(6, int(np.ceil(perim * frac / spacing)))
            a = np.arange(n) * 2 * np.pi / n
            caps.append(np.stack([frac * radius_a * np.cos(a), frac * radius_b * np.sin(a), np.full(n, zc)], axis=-1))
        caps.append(np.array([[0.0, 0.0, zc]]))
    return np.concatenate([side] + caps)


def _sphere_surface(radius, spacing):
    n_phi = max(4, int(np.ceil(np.pi * radius / spacing)) + 1)
    pts = []
    for phi in np.linspace(0.0, np.pi, n_phi):
        ring = 2 * np.pi * radius * np.sin(phi)
        n = max(1, int(np.ceil(ring / spacing)))
        a = np.arange(n) * 2 * np.pi / n
        pts.append(np.stack([radius * np.sin(phi) * np.cos(a), radius * np.sin(phi) * np.sin(a), np.full(n, radius * np.cos(phi))], axis=-1))
    return np.concatenate(pts)


def _rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def _rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def _rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def cylinder_phantom(center_xy=(0.0, 0.0), diameter=0.4, height=1.7, rounded_top=True, spacing_m=DEFAULT_SPACING_M) -> np.ndarray:
    """Vertical cylinder standing on z=0, optionally with a hemispherical top of the same radius."""
    r = 0.5 * diameter
    body_h = height - r if rounded_top else height
    pts = _cylinder_surface(r, r, body_h, spacing_m)
    if rounded_top:
        cap = _sphere_surface(r, spacing_m)
        cap = cap[cap[:, 2] >= 0.0] + [0.0, 0.0, body_h]
        pts = np.concatenate([pts, cap])
    return pts + [center_xy[0], center_xy[1], 0.0]


def cylinder_silhouette_area(diameter=0.4, height=1.7, rounded_top=True) -> float:
    r = 0.5 * diameter
    if rounded_top:
        return diameter * (height - r) + 0.5 * np.pi * r * r
    return diameter * height


@dataclass(frozen=True)
class WalkerShape:
    """Body dimensions in meters; defaults describe a 1.75 m adult."""

    hip_height: float = 0.92
    shoulder_height: float = 1.45
    torso_half_width: float = 0.17
    torso_half_depth: float = 0.11
    head_radius: float = 0.11
    leg_radius: float = 0.065
    leg_offset: float = 0.09
    arm_radius: float = 0.045
    arm_length: float = 0.66
    shoulder_offset: float = 0.215


@dataclass(frozen=True)
class Pose:
    leg_swing_rad: float = 0.0  # + moves the left leg forward
    arm_swing_rad: float = 0.0  # + moves the left arm forward
    arm_abduction_rad: float = 0.0  # sideways lift of both arms (pi/2 = arms out)


def walker_points(pose: Pose = Pose(), position=(0.0, 0.0), heading_rad: float = 0.0, shape: WalkerShape = WalkerShape(), spacing_m=DEFAULT_SPACING_M) -> np.ndarray:
    """Articulated cylinder phantom; body x is forward, y left, z up.

    The point count and order depend only on ``shape`` and ``spacing_m``.
    """
    s = shape
    parts = []
    torso = _cylinder_surface(s.torso_half_depth, s.torso_half_width, s.shoulder_height - s.hip_height, spacing_m)
    parts.append(torso + [0.0, 0.0, s.hip_height])
    head = _sphere_surface(s.head_radius, spacing_m) + [0.0, 0.0, s.shoulder_height + 0.9 * s.head_radius]
    parts.append(head)
    leg = _cylinder_surface(s.leg_radius, s.leg_radius, s.hip_height, spacing_m) - [0.0, 0.0, s.hip_height]
    for side, sign in ((1.0, 1.0), (-1.0, -1.0)):
        # legs hang from the hip joint; rotation about body y swings them fore/aft
        rot = _rot_y(-sign * pose.leg_swing_rad)
        parts.append(leg @ rot.T + [0.0, side * s.leg_offset, s.hip_height])
    arm = _cylinder_surface(s.arm_radius, s.arm_radius, s.arm_length, spacing_m) - [0.0, 0.0, s.arm_length]
    for side, sign in ((1.0, 1.0), (-1.0, -1.0)):
        rot = _rot_x(side * pose.arm_abduction_rad) @ _rot_y(-sign * pose.arm_swing_rad)
        parts.append(arm @ rot.T + [0.0, side * s.shoulder_offset, s.shoulder_height])
    pts = np.concatenate(parts)
    return pts @ _rot_z(heading_rad).T + [position[0], position[1], 0.0]


def gait_pose(t_s: float, stride_hz: float = 0.9, leg_amp_rad: float = np.deg2rad(22), arm_amp_rad: float = np.deg2rad(18)) -> Pose:
    ph = 2 * np.pi * stride_hz * t_s
    return Pose(leg_swing_rad=leg_amp_rad * np.sin(ph), arm_swing_rad=-arm_amp_rad * np.sin(ph))


def walk_frames(
    start_xy,
    velocity_xy,
    duration_s: float,
    frame_rate_hz: float = 120.0,
    t0: float = 0.0,
    shape: WalkerShape = WalkerShape(),
    stride_hz: float = 0.9,
    spacing_m=DEFAULT_SPACING_M,
) -> list[HumanFrame]:
    """Walker moving at constant velocity, facing its direction of travel, sampled like MoCap."""
    v = np.asarray(velocity_xy, dtype=float)
    heading = float(np.arctan2(v[1], v[0])) if np.any(v) else 0.0
    n = int(np.floor(duration_s * frame_rate_hz + 1e-9)) + 1
    frames = []
    for i in range(n):
        t = t0 + i / frame_rate_hz
        pos = np.asarray(start_xy, dtype=float) + v * (t - t0)
        amp = 1.0 if np.any(v) else 0.0
        pose = gait_pose(t - t0, stride_hz, amp * np.deg2rad(22), amp * np.deg2rad(18))
        pts = walker_points(pose, pos, heading, shape, spacing_m)
        frames.append(HumanFrame(t, pts, np.arange(len(pts))))
    return frames


def rigid_frames(points: np.ndarray, velocity, times) -> list[HumanFrame]:
    """A cloud translated at constant velocity (3-vector), one frame per time."""
    pts = np.asarray(points, dtype=float)
    v = np.asarray(velocity, dtype=float)
    t0 = float(times[0])
    ids = np.arange(len(pts))
    return [HumanFrame(float(t), pts + v * (float(t) - t0), ids) for t in times]
