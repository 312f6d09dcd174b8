"""Per-path signal processing: delay, distance law, air absorption,
source directivity and obstacle diffraction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .polygon import Polygon

DEFAULT_C = 340.0
DEFAULT_FS = 44100.0
AIR_CONSTANT = 7782.0
DEFAULT_R_MIN = 0.1
SINC_TAPS = 8


@dataclass(frozen=True)
class TransmissionParams:
    """Global constants of the transmission model.

    Setting ``air_constant`` to ``inf`` disables air absorption: the
    filter is bypassed instead of degenerating to a pole at 1.
    """

    fs: float = DEFAULT_FS
    c: float = DEFAULT_C
    air_constant: float = AIR_CONSTANT
    r_min: float = DEFAULT_R_MIN

    def __post_init__(self):
        if not (self.fs > 0 and self.c > 0 and self.air_constant > 0 and self.r_min > 0):
            raise ValueError("fs, c, air_constant and r_min must be positive")

    @property
    def air_enabled(self) -> bool:
        return math.isfinite(self.air_constant)


@dataclass
class OnePoleState:
    """Previous output of a recursive filter."""

    y: float = 0.0

    def reset(self):
        self.y = 0.0


def air_absorption_coeff(r: float, params: TransmissionParams) -> float:
    """Recursive coefficient of the distance-controlled air low-pass."""
    return math.exp(-r * params.fs / (params.c * params.air_constant))


def _air_coeff(r: float, params: TransmissionParams) -> float:
    return air_absorption_coeff(r, params) if params.air_enabled else 0.0


class DelayLine:
    """Ring buffer holding one source's recent input.

    Capacity covers ``max_distance`` of propagation plus one block and
    the interpolator's look-ahead.  Samples are stored as float32.
    """

    def __init__(self, max_distance: float, params: TransmissionParams = TransmissionParams(),
                 block_size: int = 1024, interpolation: str = "nearest", taps: int = SINC_TAPS):
        if max_distance <= 0:
            raise ValueError("max_distance must be positive")
        if interpolation not in ("nearest", "sinc"):
            raise ValueError(f"unknown interpolation {interpolation!r}")
        if taps < 2 or taps % 2:
            raise ValueError("sinc tap count must be even and >= 2")
        self.max_distance = float(max_distance)
        self.params = params
        self.interpolation = interpolation
        self.half = taps // 2
        self.mode = _kernels.NEAREST if interpolation == "nearest" else _kernels.SINC
        self.max_delay = math.ceil(max_distance * params.fs / params.c)
        self.capacity = self.max_delay + block_size + taps
        self.buffer = np.zeros(self.capacity, dtype=np.float32)
        self.pos = 0
        self.last_block = 0
        self.clamp_count = 0

    @property
    def nbytes(self) -> int:
        return self.buffer.nbytes

    def reset(self):
        self.buffer[:] = 0.0
        self.pos = 0
        self.clamp_count = 0

    def push(self, block: np.ndarray):
        """Append a block of input samples."""
        block = np.asarray(block, dtype=np.float32)
        n = len(block)
        if n > self.capacity - self.max_delay - 2 * self.half:
            raise ValueError("block longer than the delay line headroom")
        start = self.pos % self.capacity
        first = min(n, self.capacity - start)
        self.buffer[start:start + first] = block[:first]
        self.buffer[:n - first] = block[first:]
        self.pos += n
        self.last_block = n

    def clamp_distance(self, r: float) -> float:
        lo = self.params.r_min
        if self.mode == _kernels.SINC:
            lo = max(lo, self.half * self.params.c / self.params.fs)
        if r < lo or r > self.max_distance:
            self.clamp_count += 1
            return min(max(r, lo), self.max_distance)
        return r

    def transmit(self, r_begin: float, r_end: float, state: OnePoleState,
                 out: np.ndarray | None = None) -> np.ndarray:
        """Render the most recently pushed block as heard at a distance
        moving linearly from ``r_begin`` to ``r_end``."""
        r0 = self.clamp_distance(r_begin)
        r1 = self.clamp_distance(r_end)
        p = self.params
        if out is None:
            out = np.empty(self.last_block)
        state.y = _kernels.transmit(
            self.buffer, self.pos, r0 * p.fs / p.c, r1 * p.fs / p.c, r0, r1,
            _air_coeff(r0, p), _air_coeff(r1, p), state.y, self.mode, self.half, out)
        return out


def process_transmission(block: np.ndarray, r_begin: float, r_end: float, delay: DelayLine,
                         lp: OnePoleState, params: TransmissionParams | None = None) -> np.ndarray:
    """Push ``block`` into ``delay`` and return the delayed, distance-scaled,
    air-filtered output.  ``params`` defaults to the delay line's."""
    if params is not None and params != delay.params:
        raise ValueError("params differ from the delay line's parameters")
    delay.push(block)
    return delay.transmit(r_begin, r_end, lp)


def directivity_coeff(p_rel_norm_x: float, f6db: float, fs: float) -> float:
    """Low-pass coefficient for a receiver at cosine ``p_rel_norm_x`` off
    the source axis."""
    xi = math.pi * f6db / fs / math.log(2.0)
    base = min(max(0.5 - 0.5 * p_rel_norm_x, 0.0), 1.0)
    return base ** xi


def directivity_filter(block: np.ndarray, p_rec_rel: np.ndarray, f6db: float, state: OnePoleState,
                       params: TransmissionParams = TransmissionParams(),
                       p_rec_rel_end: np.ndarray | None = None) -> np.ndarray:
    """Direction-dependent first-order low-pass.

    ``p_rec_rel`` is the normalized receiver direction in the source frame;
    pass ``p_rec_rel_end`` to ramp the coefficient across the block.
    """
    if not 0 < f6db < params.fs / 2:
        raise ValueError("f6db must lie in (0, fs/2)")
    c0 = directivity_coeff(float(p_rec_rel[0]), f6db, params.fs)
    c1 = c0 if p_rec_rel_end is None else directivity_coeff(float(p_rec_rel_end[0]), f6db, params.fs)
    x = np.asarray(block, dtype=float)
    out = np.empty_like(x)
    state.y = _kernels.lowpass(x, c0, c1, state.y, out)
    return out


class Obstacle(Polygon):
    """Sound-blocking polygon with frequency-independent attenuation
    ``attenuation`` on the direct path."""

    def __init__(self, vertices, attenuation: float = 0.0, name: str = ""):
        super().__init__(vertices)
        if not 0.0 <= attenuation <= 1.0:
            raise ValueError("obstacle attenuation must lie in [0, 1]")
        self.attenuation = float(attenuation)
        self.name = name

    @property
    def aperture(self) -> float:
        return 2.0 * math.sqrt(self.area / math.pi)

    def diffraction_angle(self, p_src: np.ndarray, p_rec: np.ndarray) -> float:
        """Deflection angle of the shortest path around the boundary."""
        q = self.shortest_detour(p_src, p_rec)
        u = np.asarray(p_src, dtype=float) - q
        v = q - np.asarray(p_rec, dtype=float)
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        if nu == 0.0 or nv == 0.0:
            return 0.0
        return float(np.arccos(np.clip(u @ v / (nu * nv), -1.0, 1.0)))


def obstacle_cutoff(theta_o: float, area: float, c: float = DEFAULT_C) -> float:
    """Cut-off of the diffracted path; ``inf`` means no low-pass."""
    if area <= 0:
        raise ValueError("obstacle area must be positive")
    s = math.sin(theta_o)
    if s <= 0.0:
        return math.inf
    a = 2.0 * math.sqrt(area / math.pi)
    return 3.8317 * c / (2.0 * math.pi * a * s)


@dataclass
class ObstacleState:
    stage1: float = 0.0
    stage2: float = 0.0


def apply_obstacle(block: np.ndarray, obstacle: Obstacle, p_src: np.ndarray, p_rec: np.ndarray,
                   state: ObstacleState, params: TransmissionParams = TransmissionParams()) -> np.ndarray:
    """Mix attenuated direct path and low-passed diffracted path."""
    x = np.asarray(block, dtype=float)
    a_o = obstacle.attenuation
    if a_o == 1.0:
        return x.copy()
    theta = obstacle.diffraction_angle(p_src, p_rec)
    f_o = obstacle_cutoff(theta, obstacle.area, params.c)
    c = math.exp(-2.0 * math.pi * f_o / params.fs)
    tmp = np.empty_like(x)
    out = np.empty_like(x)
    state.stage1 = _kernels.lowpass(x, c, c, state.stage1, tmp)
    state.stage2 = _kernels.lowpass(tmp, c, c, state.stage2, out)
    return a_o * x + (1.0 - a_o) * out
