"""Render formats: panning of point sources and decoding of diffuse
first-order Ambisonics (FuMa) sound fields."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.signal import oaconvolve

from . import _kernels
from ._validation import check_block
from .geometry import Euler, euler_to_matrix, sph2cart

SQRT2 = math.sqrt(2.0)
FRONT = np.array([1.0, 0.0, 0.0])


def _direction(p_rel, dims: int = 3) -> np.ndarray:
    p = np.array(p_rel, dtype=float)
    if dims == 2:
        p[2] = 0.0
    n = np.linalg.norm(p)
    if n == 0.0:
        return FRONT.copy()
    return p / n


class SpeakerLayout:
    """Loudspeaker positions in receiver coordinates (meters)."""

    def __init__(self, positions):
        pos = np.atleast_2d(np.asarray(positions, dtype=float))
        if pos.size == 0 or pos.shape[1] != 3:
            raise ValueError("speaker layout needs at least one 3-D position")
        norms = np.linalg.norm(pos, axis=1)
        if np.any(norms == 0):
            raise ValueError("speaker positions must not be at the origin")
        self.positions = pos
        self.directions = pos / norms[:, None]

    @classmethod
    def from_spherical(cls, azimuths_deg, elevations_deg=None, radius=1.0) -> "SpeakerLayout":
        az = np.deg2rad(np.asarray(azimuths_deg, dtype=float))
        el = np.zeros_like(az) if elevations_deg is None else np.deg2rad(np.asarray(elevations_deg, dtype=float))
        r = np.broadcast_to(np.asarray(radius, dtype=float), az.shape)
        return cls([sph2cart(ri, a, e) for ri, a, e in zip(r, az, el)])

    @classmethod
    def ring(cls, n: int, radius: float = 1.0, offset_deg: float = 0.0) -> "SpeakerLayout":
        return cls.from_spherical(offset_deg + 360.0 * np.arange(n) / n, radius=radius)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def azimuths(self) -> np.ndarray:
        return np.arctan2(self.positions[:, 1], self.positions[:, 0])

    @property
    def elevations(self) -> np.ndarray:
        return np.arctan2(self.positions[:, 2], np.hypot(self.positions[:, 0], self.positions[:, 1]))

    def ring_deviation(self) -> float:
        """Largest deviation (radians) of the azimuth spacing from 2*pi/N."""
        n = len(self)
        if n < 2:
            return 0.0
        az = np.sort(np.mod(self.azimuths, 2 * np.pi))
        gaps = np.diff(np.append(az, az[0] + 2 * np.pi))
        return float(np.max(np.abs(gaps - 2 * np.pi / n)))


# -- point-source panning ----------------------------------------------------

def vmic_weight(p_rel, a: float) -> float:
    """Virtual microphone gain: omni (a=0), cardioid (0.5), figure-of-eight (1)."""
    return 1.0 + a * (_direction(p_rel)[0] - 1.0)


def vmic_decoder(a: float) -> np.ndarray:
    return np.array([[SQRT2 * (1.0 - a), a, 0.0, 0.0]])


def nsp_weights(p_rel, layout: SpeakerLayout, dims: int = 3) -> np.ndarray:
    """Nearest speaker panning; ties go to the lowest index."""
    dirs = layout.directions if dims == 3 else _flatten(layout.directions)
    d = 1.0 - dirs @ _direction(p_rel, dims)
    w = np.zeros(len(layout))
    w[int(np.argmin(d))] = 1.0
    return w


def _flatten(dirs: np.ndarray) -> np.ndarray:
    flat = dirs.copy()
    flat[:, 2] = 0.0
    n = np.linalg.norm(flat, axis=1)
    return flat / np.where(n == 0, 1.0, n)[:, None]


def _pair_gains(s1, s2, p):
    m = np.array([[s1[0], s2[0]], [s1[1], s2[1]]])
    if abs(np.linalg.det(m)) < 1e-12:
        raise ValueError("degenerate VBAP speaker pair (colinear speakers)")
    return np.linalg.solve(m, p[:2])


def vbap2d_weights(p_rel, layout: SpeakerLayout) -> np.ndarray:
    """Horizontal vector-base amplitude panning over azimuth-adjacent pairs."""
    n = len(layout)
    if n < 2:
        raise ValueError("VBAP needs at least two speakers")
    dirs = _flatten(layout.directions)
    p = _direction(p_rel, 2)
    az = np.mod(layout.azimuths, 2 * np.pi)
    order = np.argsort(az, kind="stable")
    phi = math.atan2(p[1], p[0]) % (2 * np.pi)
    pairs = [(order[i], order[(i + 1) % n]) for i in range(n)]

    def arc_contains(i, j):
        span = (az[j] - az[i]) % (2 * np.pi) or 2 * np.pi
        return (phi - az[i]) % (2 * np.pi) <= span

    w = np.zeros(n)
    candidates = [pq for pq in pairs if arc_contains(*pq)] + pairs
    for i, j in candidates:
        g = _pair_gains(dirs[i], dirs[j], p)
        if g.min() >= -1e-12:
            g = np.maximum(g, 0.0)
            g /= np.hypot(g[0], g[1])
            w[i] += g[0]
            w[j] += g[1]
            return w
    return nsp_weights(p, layout, dims=2)


def hoa2d_order_gains(order: int, decoder: str = "maxre") -> np.ndarray:
    """Per-order decoder gains g_0..g_M."""
    m = np.arange(order + 1)
    if decoder == "basic":
        return np.ones(order + 1)
    if decoder == "maxre":
        return np.cos(m * np.pi / (2 * order + 2))
    raise ValueError(f"unknown HOA decoder {decoder!r}")


def hoa2d_weights(p_rel, layout: SpeakerLayout, order: int, decoder: str = "maxre") -> np.ndarray:
    """Combined circular-harmonic encode and sampling decode onto a ring."""
    n = len(layout)
    if order < 1:
        raise ValueError("HOA order must be >= 1")
    if n < 2 * order + 1:
        raise ValueError(f"HOA2D order {order} needs at least {2 * order + 1} speakers, got {n}")
    p = _direction(p_rel, 2)
    phi = math.atan2(p[1], p[0])
    g = hoa2d_order_gains(order, decoder)
    m = np.arange(1, order + 1)
    diff = phi - layout.azimuths
    return (g[0] + 2.0 * np.cos(np.outer(diff, m)) @ g[1:]) / n


# FuMa channel sequence of the Ambisonics Association definition
FUMA_CHANNELS = "WXYZRSTUVKLMNOPQ"
FUMA_HORIZONTAL = "WXYUVPQ"
_C3_1 = math.sqrt(135.0 / 256.0)
_C3_2 = math.sqrt(27.0 / 4.0)


def _fuma_all(az: float, el: float) -> np.ndarray:
    ca, sa, ce, se = math.cos(az), math.sin(az), math.cos(el), math.sin(el)
    c2a, s2a, c3a, s3a = math.cos(2 * az), math.sin(2 * az), math.cos(3 * az), math.sin(3 * az)
    return np.array([
        1.0 / SQRT2,
        ca * ce, sa * ce, se,
        1.5 * se * se - 0.5,
        ca * 2.0 * se * ce, sa * 2.0 * se * ce,
        c2a * ce * ce, s2a * ce * ce,
        0.5 * se * (5.0 * se * se - 3.0),
        _C3_1 * ca * ce * (5.0 * se * se - 1.0),
        _C3_1 * sa * ce * (5.0 * se * se - 1.0),
        _C3_2 * c2a * se * ce * ce,
        _C3_2 * s2a * se * ce * ce,
        c3a * ce ** 3,
        s3a * ce ** 3,
    ])


def fuma_channels(order: int, dims: int = 3) -> str:
    if order not in (1, 2, 3):
        raise ValueError("Ambisonics order must be 1, 2 or 3")
    if dims not in (2, 3):
        raise ValueError("dims must be 2 or 3")
    names = FUMA_CHANNELS[:(order + 1) ** 2]
    if dims == 2:
        names = "".join(c for c in names if c in FUMA_HORIZONTAL)
    return names


def ambi_fuma_weights(p_rel, order: int, dims: int = 3) -> np.ndarray:
    """Furse-Malham plane-wave encoding weights."""
    names = fuma_channels(order, dims)
    p = _direction(p_rel, dims)
    az = math.atan2(p[1], p[0])
    el = math.atan2(p[2], math.hypot(p[0], p[1]))
    full = _fuma_all(az, el)
    return full[[FUMA_CHANNELS.index(c) for c in names]]


# -- receiver formats ----------------------------------------------------------

class ReceiverFormat:
    """Base class; ``n_channels`` are output channels, ``n_mix`` the channels
    panning and decoding operate on (they differ for binaural)."""

    dims = 3
    kind = ""

    @property
    def n_channels(self) -> int:
        return self.n_mix

    @property
    def n_mix(self) -> int:
        raise NotImplementedError

    def weights(self, p_rel) -> np.ndarray:
        raise NotImplementedError

    def decoder(self) -> np.ndarray:
        raise NotImplementedError

    def make_postprocessor(self):
        return None


class VirtualMic(ReceiverFormat):
    kind = "omni"

    def __init__(self, a: float = 0.0):
        if not 0.0 <= a <= 1.0:
            raise ValueError("directivity coefficient must lie in [0, 1]")
        self.a = float(a)

    @property
    def n_mix(self):
        return 1

    def weights(self, p_rel):
        return np.array([vmic_weight(p_rel, self.a)])

    def decoder(self):
        return vmic_decoder(self.a)


class _SpeakerFormat(ReceiverFormat):
    def __init__(self, layout: SpeakerLayout, dims: int = 3):
        if dims not in (2, 3):
            raise ValueError("dims must be 2 or 3")
        self.layout = layout
        self.dims = dims

    @property
    def n_mix(self):
        return len(self.layout)

    def decoder(self):
        return speaker_decoder(self.layout, self.dims)


class NSP(_SpeakerFormat):
    kind = "nsp"

    def weights(self, p_rel):
        return nsp_weights(p_rel, self.layout, self.dims)


class VBAP2D(_SpeakerFormat):
    kind = "vbap"

    def __init__(self, layout: SpeakerLayout):
        super().__init__(layout, dims=2)
        if len(layout) < 2:
            raise ValueError("VBAP needs at least two speakers")

    def weights(self, p_rel):
        return vbap2d_weights(p_rel, self.layout)


class HOA2D(_SpeakerFormat):
    kind = "hoa2d"

    def __init__(self, layout: SpeakerLayout, order: int, decoder: str = "maxre"):
        super().__init__(layout, dims=2)
        if len(layout) < 2 * order + 1:
            raise ValueError(f"HOA2D order {order} needs at least {2 * order + 1} speakers")
        self.order = int(order)
        self.decoder_type = decoder
        self._gains = hoa2d_order_gains(order, decoder)
        self._m = np.arange(1, order + 1)
        self._az = layout.azimuths

    def weights(self, p_rel):
        p = _direction(p_rel, 2)
        phi = math.atan2(p[1], p[0])
        g = self._gains
        return (g[0] + 2.0 * np.cos(np.outer(phi - self._az, self._m)) @ g[1:]) / len(self._az)


class AmbiFuma(ReceiverFormat):
    kind = "fuma"

    def __init__(self, order: int = 1, dims: int = 3):
        self.channels = fuma_channels(order, dims)
        self.order = order
        self.dims = dims

    @property
    def n_mix(self):
        return len(self.channels)

    def weights(self, p_rel):
        return ambi_fuma_weights(p_rel, self.order, self.dims)

    def decoder(self):
        d = np.zeros((self.n_mix, 4))
        for col, name in enumerate("WXYZ"):
            if name in self.channels:
                d[self.channels.index(name), col] = 1.0
        return d


class Binaural(ReceiverFormat):
    """Speaker-based rendering to virtual loudspeakers followed by HRIR
    convolution; ``hrirs`` has shape (n_speakers, 2, length)."""

    kind = "binaural"

    def __init__(self, inner: _SpeakerFormat, hrirs):
        h = np.asarray(hrirs, dtype=float)
        if h.ndim != 3 or h.shape[1] != 2:
            raise ValueError("HRIRs must have shape (n_speakers, 2, length)")
        if h.shape[0] != inner.n_mix:
            raise ValueError(f"{inner.n_mix} virtual speakers but {h.shape[0]} HRIR pairs")
        self.inner = inner
        self.hrirs = h
        self.dims = inner.dims

    @property
    def n_mix(self):
        return self.inner.n_mix

    @property
    def n_channels(self):
        return 2

    def weights(self, p_rel):
        return self.inner.weights(p_rel)

    def decoder(self):
        return self.inner.decoder()

    def make_postprocessor(self):
        return BinauralFIR(self.hrirs)


def speaker_decoder(layout: SpeakerLayout, dims: int = 3) -> np.ndarray:
    """First-order max-rE decoder for diffuse sound onto a speaker array."""
    n = len(layout)
    s = layout.directions if dims == 3 else _flatten(layout.directions)
    g = 1.0 / math.sqrt(dims)
    d = np.empty((n, 4))
    d[:, 0] = SQRT2
    d[:, 1:] = g * s
    if dims == 2:
        d[:, 3] = 0.0
    return d / n


def diffuse_decoder(fmt: ReceiverFormat) -> np.ndarray:
    return fmt.decoder()


# -- diffuse fields and mixing ------------------------------------------------

def _rotation(o) -> np.ndarray:
    o = np.asarray(o, dtype=float)
    return o if o.shape == (3, 3) else euler_to_matrix(o)


def foa_rotate(foa, orientation=Euler(), box_orientation=None) -> np.ndarray:
    """Express a FuMa B-format block in the frame of a receiver.

    The directional channels are rotated by the box orientation (if
    given) and then by the inverse receiver orientation.  Orientations may
    be Euler angles or 3x3 rotation matrices.
    """
    f = check_block(foa, 4)
    rot = _rotation(orientation).T
    if box_orientation is not None:
        rot = rot @ _rotation(box_orientation)
    out = np.empty_like(f)
    out[0] = f[0]
    out[1:] = rot @ f[1:]
    return out


def receiver_mix(points: Iterable[tuple], diffuse: Iterable = (), decoder: np.ndarray | None = None,
                 n_channels: int | None = None, block_size: int | None = None) -> np.ndarray:
    """Sum panned point-source blocks and decoded diffuse blocks.

    ``points`` yields ``(w, y)`` or ``(w_prev, w, y)``; weights ramp
    linearly per sample from ``w_prev`` to ``w``.
    """
    points = list(points)
    diffuse = list(diffuse)
    if n_channels is None:
        if points:
            n_channels = len(points[0][-2])
        elif decoder is not None:
            n_channels = decoder.shape[0]
        else:
            raise ValueError("cannot infer channel count")
    if block_size is None:
        if points:
            block_size = len(points[0][-1])
        elif diffuse:
            block_size = np.shape(diffuse[0])[1]
        else:
            block_size = 0
    out = np.zeros((n_channels, block_size))
    for item in points:
        w0, w1, y = (item[0], item[0], item[1]) if len(item) == 2 else item
        w0 = np.asarray(w0, dtype=float)
        w1 = np.asarray(w1, dtype=float)
        if len(w0) != n_channels or len(w1) != n_channels:
            raise ValueError(f"weight vector length {len(w1)} != {n_channels} channels")
        _kernels.mix_into(out, w0, w1, np.asarray(y, dtype=float))
    if diffuse:
        if decoder is None or decoder.shape != (n_channels, 4):
            raise ValueError("diffuse input needs a decoder of shape (n_channels, 4)")
        total = np.zeros((4, block_size))
        for f in diffuse:
            total += check_block(f, 4)
        out += decoder @ total
    return out


class BinauralFIR:
    """Convolves virtual speaker signals with HRIR pairs, carrying the
    convolution tail across blocks."""

    def __init__(self, hrirs):
        self.hrirs = np.asarray(hrirs, dtype=float)
        self.tail = np.zeros((2, self.hrirs.shape[2] - 1))

    def reset(self):
        self.tail[:] = 0.0

    def __call__(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        n_spk, n = z.shape
        if n_spk != self.hrirs.shape[0]:
            raise ValueError(f"expected {self.hrirs.shape[0]} speaker channels, got {n_spk}")
        full = oaconvolve(z[:, None, :], self.hrirs, axes=-1).sum(axis=0)
        length = self.tail.shape[1]
        full[:, :length] += self.tail
        out = full[:, :n].copy()
        rest = full[:, n:]
        self.tail = np.zeros_like(self.tail)
        self.tail[:, :rest.shape[1]] = rest
        return out


def binaural_postprocess(z: np.ndarray, hrirs) -> np.ndarray:
    """Two-channel ear signals from virtual speaker signals.

    ``hrirs`` is either an HRIR array (one block, no carried state) or a
    :class:`BinauralFIR` that keeps the tail between calls.
    """
    fir = hrirs if isinstance(hrirs, BinauralFIR) else BinauralFIR(hrirs)
    return fir(z)


# -- HRIR sets -------------------------------------------------------------------

class HrirSet:
    """Measured or modeled HRIR pairs indexed by direction."""

    def __init__(self, directions, responses, fs: float):
        self.directions = np.asarray(directions, dtype=float)
        self.responses = np.asarray(responses, dtype=float)
        self.fs = float(fs)
        if len(self.directions) == 0:
            raise ValueError("empty HRIR set")
        if self.responses.ndim != 3 or self.responses.shape[:2] != (len(self.directions), 2):
            raise ValueError("HRIR responses must have shape (n_directions, 2, length)")

    def match(self, layout: SpeakerLayout) -> np.ndarray:
        """HRIR pairs of the nearest measured direction for every speaker."""
        dirs = self.directions / np.linalg.norm(self.directions, axis=1)[:, None]
        idx = np.argmax(layout.directions @ dirs.T, axis=1)
        return self.responses[idx]


def load_hrir_set(manifest: str | Path) -> HrirSet:
    """Read an HRIR manifest.

    The manifest is JSON: ``{"entries": [{"azimuth": deg, "elevation": deg,
    "file": "left_right.wav"}, ...]}``; paths are relative to the manifest
    and every file holds one stereo impulse response.
    """
    from .audio import read_wav

    manifest = Path(manifest)
    spec = json.loads(manifest.read_text())
    entries = spec.get("entries", [])
    if not entries:
        raise ValueError(f"{manifest}: no HRIR entries")
    dirs, resp, rates = [], [], set()
    for e in entries:
        data, fs = read_wav(manifest.parent / e["file"])
        if data.shape[0] != 2:
            raise ValueError(f"{e['file']}: HRIR files must be stereo")
        rates.add(fs)
        dirs.append(sph2cart(1.0, math.radians(e["azimuth"]), math.radians(e.get("elevation", 0.0))))
        resp.append(data)
    if len(rates) > 1:
        raise ValueError(f"{manifest}: HRIR files have mixed sample rates")
    if len({r.shape[1] for r in resp}) > 1:
        raise ValueError(f"{manifest}: HRIRs must have equal lengths")
    return HrirSet(dirs, np.stack(resp), rates.pop())
