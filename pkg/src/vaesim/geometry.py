"""Positions, orientations and trajectories of scene objects.

Vectors are plain ``numpy`` arrays of shape ``(3,)``.  Orientations are
Euler angles ``(z, y, x)`` in radians; the rotation matrix applies the
z rotation first, then y, then x (``R = Rz @ Ry @ Rx``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

CARTESIAN = "cartesian"
SPHERICAL = "spherical"


class Euler(NamedTuple):
    """Orientation as rotations about z, y and x, in radians."""

    z: float = 0.0
    y: float = 0.0
    x: float = 0.0

    @classmethod
    def from_degrees(cls, z: float = 0.0, y: float = 0.0, x: float = 0.0) -> "Euler":
        return cls(*np.deg2rad([z, y, x]).tolist())

    def to_degrees(self) -> tuple[float, float, float]:
        return tuple(np.rad2deg(self).tolist())


def euler_to_matrix(e: Sequence[float]) -> np.ndarray:
    """Rotation matrix for Euler angles ``(z, y, x)``."""
    z, y, x = e
    cz, sz = np.cos(z), np.sin(z)
    cy, sy = np.cos(y), np.sin(y)
    cx, sx = np.cos(x), np.sin(x)
    rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    return rz @ ry @ rx


def normalize(v: np.ndarray) -> np.ndarray:
    """Unit vector along ``v``; the zero vector is returned unchanged."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        return v.copy()
    return v / n


def cart2sph(p: np.ndarray) -> tuple[float, float, float]:
    """(radius, azimuth, elevation) about the origin."""
    x, y, z = p
    r = float(np.sqrt(x * x + y * y + z * z))
    az = float(np.arctan2(y, x))
    el = float(np.arctan2(z, np.hypot(x, y)))
    return r, az, el


def sph2cart(r: float, az: float, el: float) -> np.ndarray:
    return r * np.array([np.cos(az) * np.cos(el), np.sin(az) * np.cos(el), np.sin(el)])


@dataclass(frozen=True)
class Pose:
    position: np.ndarray
    orientation: Euler = Euler()
    rotation: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "orientation", Euler(*self.orientation))
        object.__setattr__(self, "rotation", euler_to_matrix(self.orientation))


def relative_position(p_obj: np.ndarray, ref: Pose) -> np.ndarray:
    """Position of ``p_obj`` in the local frame of ``ref``."""
    return ref.rotation.T @ (np.asarray(p_obj, dtype=float) - ref.position)


def to_world(p_local: np.ndarray, ref: Pose) -> np.ndarray:
    """Inverse of :func:`relative_position`."""
    return ref.rotation @ np.asarray(p_local, dtype=float) + ref.position


def _interp_index(times: np.ndarray, t: float) -> tuple[int, float] | int:
    if t <= times[0]:
        return 0
    if t >= times[-1]:
        return len(times) - 1
    i = int(np.searchsorted(times, t, side="right")) - 1
    return i, (t - times[i]) / (times[i + 1] - times[i])


class Trajectory:
    """Time-stamped positions and orientations with linear interpolation.

    Positions interpolate in Cartesian coordinates or in spherical
    coordinates about the origin.  Orientations interpolate component-wise.
    Times outside the sampled range clamp to the end samples.
    """

    def __init__(self, position_samples=None, orientation_samples=None, mode: str = CARTESIAN):
        if mode not in (CARTESIAN, SPHERICAL):
            raise ValueError(f"unknown interpolation mode {mode!r}")
        self.mode = mode
        self.pos_times, self.positions = self._check(position_samples, (0.0, 0.0, 0.0))
        self.rot_times, self.orientations = self._check(orientation_samples, (0.0, 0.0, 0.0))

    @staticmethod
    def _check(samples, default):
        if not samples:
            samples = [(0.0, default)]
        samples = sorted(((float(t), tuple(map(float, v))) for t, v in samples), key=lambda s: s[0])
        times = np.array([s[0] for s in samples])
        values = np.array([s[1] for s in samples], dtype=float)
        if values.shape[1:] != (3,):
            raise ValueError("trajectory samples need three components")
        if np.any(np.diff(times) <= 0):
            raise ValueError("trajectory sample times must be strictly increasing")
        if not np.all(np.isfinite(values)) or not np.all(np.isfinite(times)):
            raise ValueError("trajectory samples must be finite")
        return times, values

    @classmethod
    def static(cls, position, orientation=Euler()) -> "Trajectory":
        return cls([(0.0, position)], [(0.0, orientation)])

    @property
    def is_static(self) -> bool:
        return len(self.pos_times) == 1 and len(self.rot_times) == 1

    @property
    def end_time(self) -> float:
        return float(max(self.pos_times[-1], self.rot_times[-1]))

    def position_at(self, t: float) -> np.ndarray:
        k = _interp_index(self.pos_times, t)
        if isinstance(k, int):
            return self.positions[k].copy()
        i, u = k
        p0, p1 = self.positions[i], self.positions[i + 1]
        if self.mode == CARTESIAN:
            return p0 + u * (p1 - p0)
        r0, az0, el0 = cart2sph(p0)
        r1, az1, el1 = cart2sph(p1)
        daz = (az1 - az0) % (2 * np.pi)
        # shorter arc; an exact half turn goes the positive way
        if daz > np.pi:
            daz -= 2 * np.pi
        return sph2cart(r0 + u * (r1 - r0), az0 + u * daz, el0 + u * (el1 - el0))

    def orientation_at(self, t: float) -> Euler:
        k = _interp_index(self.rot_times, t)
        if isinstance(k, int):
            return Euler(*self.orientations[k].tolist())
        i, u = k
        o0, o1 = self.orientations[i], self.orientations[i + 1]
        return Euler(*(o0 + u * (o1 - o0)).tolist())

    def pose_at(self, t: float) -> Pose:
        return Pose(self.position_at(t), self.orientation_at(t))


def interpolate(traj: Trajectory, t: float) -> Pose:
    return traj.pose_at(t)
