"""Block-based rendering of a scene.

Each block, geometry is evaluated at the time of the block's last sample;
delays, distance gains, air-filter and directivity coefficients, edge
gains and panning weights then ramp linearly per sample from the previous
block's values.  Reflection and obstacle filter coefficients are updated
once per block.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .audio import AudioPlayer, write_wav
from .geometry import Pose, Trajectory, normalize, relative_position
from .imagesource import Reflector, chain_position, classify_chain, reflector_chains
from .receivers import ReceiverFormat, foa_rotate
from .transmission import (DelayLine, Obstacle, ObstacleState, OnePoleState, TransmissionParams,
                           apply_obstacle, directivity_coeff)


@dataclass
class SceneParams:
    fs: float = 44100.0
    c: float = 340.0
    block_size: int = 1024
    image_order: int = 1
    r_min: float = 0.1
    air_constant: float = 7782.0
    max_distance: float = 1000.0
    interpolation: str = "nearest"
    retarded_time: bool = True

    def transmission(self) -> TransmissionParams:
        return TransmissionParams(fs=self.fs, c=self.c, air_constant=self.air_constant, r_min=self.r_min)


@dataclass
class Source:
    """Point source.  ``audio`` is a WAV path, a sample array or None
    (silence); ``f6db`` enables frequency-dependent directivity."""

    name: str
    trajectory: Trajectory = field(default_factory=lambda: Trajectory.static((0.0, 0.0, 0.0)))
    audio: object = None
    gain: float = 1.0
    loop: bool = False
    f6db: float | None = None


@dataclass
class RangeBox:
    """Box (center and orientation from ``trajectory``) in which a diffuse
    source is audible, with von-Hann ramps of length ``ramp`` at the faces."""

    trajectory: Trajectory
    size: tuple[float, float, float] = (10.0, 10.0, 10.0)
    ramp: float = 0.0

    def __post_init__(self):
        self.size = tuple(float(s) for s in self.size)
        if min(self.size) <= 0:
            raise ValueError("range box dimensions must be positive")
        if self.ramp < 0:
            raise ValueError("range box ramp must be >= 0")


@dataclass
class DiffuseSource:
    """First-order B-format (FuMa, 4 channels) source bound to a range box."""

    name: str
    box: RangeBox
    audio: object = None
    gain: float = 1.0
    loop: bool = False


@dataclass
class Receiver:
    name: str
    format: ReceiverFormat
    trajectory: Trajectory = field(default_factory=lambda: Trajectory.static((0.0, 0.0, 0.0)))
    hrir_manifest: str | None = None


@dataclass
class Scene:
    params: SceneParams = field(default_factory=SceneParams)
    sources: list[Source] = field(default_factory=list)
    diffuse: list[DiffuseSource] = field(default_factory=list)
    reflectors: list[Reflector] = field(default_factory=list)
    obstacles: list[Obstacle] = field(default_factory=list)
    receivers: list[Receiver] = field(default_factory=list)
    name: str = ""
    base_dir: Path | None = None
    # object name -> (line, column) in the scene file, when parsed
    locations: dict = field(default_factory=dict, repr=False, compare=False)

    def objects(self):
        for group in (self.sources, self.diffuse, self.reflectors, self.obstacles, self.receivers):
            yield from group


@dataclass
class RenderJob:
    scene: Scene
    duration: float
    output: str | Path | None = None

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("render duration must be positive")


def diffuse_range_gain(p_rec, box: RangeBox, t: float = 0.0) -> float:
    """Audibility gain of a diffuse source at receiver position ``p_rec``."""
    pose = box.trajectory.pose_at(t)
    local = relative_position(p_rec, pose)
    gain = 1.0
    for coord, size in zip(local, box.size):
        inside = 0.5 * size - abs(coord)
        if inside <= 0.0:
            return 0.0
        if inside < box.ramp:
            gain *= 0.5 - 0.5 * math.cos(math.pi * inside / box.ramp)
    return gain


def _player(audio, fs, loop, gain, n_channels, base_dir, name) -> AudioPlayer:
    if audio is None:
        return AudioPlayer(np.zeros((n_channels, 0)), fs)
    if isinstance(audio, AudioPlayer):
        player = audio
    elif isinstance(audio, (str, Path)):
        path = Path(audio)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        player = AudioPlayer.from_file(path, fs, loop=loop, gain=gain)
    else:
        player = AudioPlayer(audio, fs, loop=loop, gain=gain)
    if player.n_channels != n_channels:
        raise ValueError(f"{name}: expected {n_channels} audio channel(s), got {player.n_channels}")
    return player


class _Path:
    """Per source-receiver path state (primary source or image chain)."""

    __slots__ = ("source", "chain", "air", "directivity", "reflect", "obstacles",
                 "r", "w", "g", "c_dir", "active")

    def __init__(self, source: int, chain: tuple, n_mix: int):
        self.source = source
        self.chain = chain
        self.air = OnePoleState()
        self.directivity = OnePoleState()
        self.reflect = [OnePoleState() for _ in chain]
        self.obstacles: dict[int, ObstacleState] = {}
        self.r = None
        self.w = np.zeros(n_mix)
        self.g = 0.0
        self.c_dir = 0.0
        self.active = False


@dataclass
class BlockStats:
    block: int
    image_sources: int
    clamps: int
    seconds: float


class Renderer:
    """Stateful block renderer for one scene.

    ``process_block()`` returns one (channels, block_size) array per
    receiver, in receiver declaration order.  Contributions are summed in
    a fixed order (primary sources in declaration order, then image
    sources by source, order and reflector sequence).
    """

    def __init__(self, scene: Scene):
        self.scene = scene
        p = scene.params
        if p.block_size < 1:
            raise ValueError("block size must be positive")
        self.params = p
        self.tparams = p.transmission()
        self.block_size = int(p.block_size)
        self.block_index = 0
        self.sources = list(scene.sources)
        self.players = [_player(s.audio, p.fs, s.loop, s.gain, 1, scene.base_dir, s.name) for s in self.sources]
        self.diffuse_players = [_player(d.audio, p.fs, d.loop, d.gain, 4, scene.base_dir, d.name)
                                for d in scene.diffuse]
        self.delays = [DelayLine(p.max_distance, self.tparams, self.block_size, p.interpolation)
                       for _ in self.sources]
        chains = [()] + (reflector_chains(len(scene.reflectors), p.image_order) if scene.reflectors else [])
        self.receivers = list(scene.receivers)
        self.paths = []
        self.decoders = []
        self.post = []
        self.diffuse_gain = []
        for rec in self.receivers:
            n_mix = rec.format.n_mix
            ordered = [(k, ()) for k in range(len(self.sources))]
            ordered += [(k, c) for k in range(len(self.sources)) for c in chains if c]
            self.paths.append([_Path(k, c, n_mix) for k, c in ordered])
            self.decoders.append(rec.format.decoder())
            self.post.append(rec.format.make_postprocessor())
            self.diffuse_gain.append([None] * len(scene.diffuse))
        self.stats: list[BlockStats] = []
        _kernels.warmup()

    @property
    def delay_memory(self) -> int:
        """Bytes held by all delay-line buffers."""
        return sum(d.nbytes for d in self.delays)

    @property
    def n_image_paths(self) -> int:
        return sum(1 for paths in self.paths for path in paths if path.chain)

    def block_end_time(self, index: int | None = None) -> float:
        b = self.block_index if index is None else index
        return ((b + 1) * self.block_size - 1) / self.params.fs

    def _emitter(self, path: _Path, t: float, p_rec: np.ndarray) -> tuple[np.ndarray, float]:
        """Source (or image) position and emission time heard at ``t``."""
        traj = self.sources[path.source].trajectory
        refl = self.scene.reflectors

        def pos(tau):
            p = traj.position_at(tau)
            return chain_position(p, path.chain, refl) if path.chain else p

        p = pos(t)
        if not self.params.retarded_time or traj.is_static:
            return p, t
        tau = t
        for _ in range(50):
            tau_new = t - float(np.linalg.norm(p - p_rec)) / self.params.c
            if abs(tau_new - tau) < 1e-12:
                break
            tau = tau_new
            p = pos(tau)
        return p, tau

    def process_block(self) -> list[np.ndarray]:
        t0 = time.perf_counter()
        P = self.block_size
        t = self.block_end_time()
        first = self.block_index == 0
        clamps_before = sum(d.clamp_count for d in self.delays)
        for player, delay in zip(self.players, self.delays):
            delay.push(player.next_block(P)[0])
        diffuse_blocks = [pl.next_block(P) for pl in self.diffuse_players]
        outputs = []
        n_images = 0
        y = np.empty(P)
        tmp = np.empty(P)
        for ri, rec in enumerate(self.receivers):
            pose = rec.trajectory.pose_at(t)
            fmt = rec.format
            out = np.zeros((fmt.n_mix, P))
            for path in self.paths[ri]:
                n_images += self._render_path(path, fmt, pose, t, out, y, tmp)
            if diffuse_blocks:
                self._render_diffuse(ri, pose, t, first, diffuse_blocks, out)
            if self.post[ri] is not None:
                out = self.post[ri](out)
            outputs.append(out)
        self.stats.append(BlockStats(self.block_index, n_images,
                                     sum(d.clamp_count for d in self.delays) - clamps_before,
                                     time.perf_counter() - t0))
        self.block_index += 1
        return outputs

    def _render_path(self, path: _Path, fmt: ReceiverFormat, pose: Pose, t: float,
                     out: np.ndarray, y: np.ndarray, tmp: np.ndarray) -> int:
        p_rec = pose.position
        p_src, tau = self._emitter(path, t, p_rec)
        source = self.sources[path.source]
        p_eff, gain = p_src, 1.0
        if path.chain:
            res = classify_chain(source.trajectory.position_at(tau), path.chain, self.scene.reflectors, p_rec)
            p_eff, gain = (p_src, 0.0) if res is None else res
        active = gain > 0.0
        if not active and not path.active:
            path.r = None
            return 0
        r = float(np.linalg.norm(p_eff - p_rec))
        w = np.asarray(fmt.weights(relative_position(p_eff, pose)), dtype=float)
        fresh = path.r is None
        if fresh:
            # first block, or a reflection that just became audible: fade in
            r_prev, w_prev = r, w
            g_prev = gain if self.block_index == 0 else 0.0
        else:
            r_prev, w_prev, g_prev = path.r, path.w, path.g
        self.delays[path.source].transmit(r_prev, r, path.air, y)
        if source.f6db is not None and not path.chain:
            src_pose = Pose(p_src, source.trajectory.orientation_at(tau))
            cos_x = normalize(relative_position(p_rec, src_pose))[0]
            c = directivity_coeff(cos_x, source.f6db, self.params.fs)
            path.directivity.y = _kernels.lowpass(y, c if fresh else path.c_dir, c, path.directivity.y, tmp)
            y[:] = tmp
            path.c_dir = c
        if path.chain:
            for k, state in zip(path.chain, path.reflect):
                refl = self.scene.reflectors[k]
                state.y = _kernels.reflect(y, refl.rho, refl.delta, state.y, tmp)
                y[:] = tmp
            if not (g_prev == 1.0 and gain == 1.0):
                y *= g_prev + (gain - g_prev) * (np.arange(1, len(y) + 1) / len(y))
        for oi, obstacle in enumerate(self.scene.obstacles):
            if obstacle.blocks(p_eff, p_rec):
                state = path.obstacles.setdefault(oi, ObstacleState())
                y[:] = apply_obstacle(y, obstacle, p_eff, p_rec, state, self.tparams)
        _kernels.mix_into(out, w_prev, w, y)
        path.r, path.w, path.g, path.active = r, w, gain, active
        return 1 if (path.chain and active) else 0

    def _render_diffuse(self, ri: int, pose: Pose, t: float, first: bool, blocks, out: np.ndarray):
        P = self.block_size
        total = np.zeros((4, P))
        ramp = np.arange(1, P + 1) / P
        for di, (d, block) in enumerate(zip(self.scene.diffuse, blocks)):
            g = diffuse_range_gain(pose.position, d.box, t)
            g_prev = self.diffuse_gain[ri][di]
            if g_prev is None or first:
                g_prev = g
            self.diffuse_gain[ri][di] = g
            if g == 0.0 and g_prev == 0.0:
                continue
            rotated = foa_rotate(block, pose.rotation, d.box.trajectory.pose_at(t).rotation)
            if g_prev == g:
                total += g * rotated
            else:
                total += (g_prev + (g - g_prev) * ramp) * rotated
        out += self.decoders[ri] @ total

    def run(self, n_blocks: int) -> list[np.ndarray]:
        """Render ``n_blocks`` blocks; returns concatenated output per receiver."""
        chunks = [[] for _ in self.receivers]
        for _ in range(n_blocks):
            for i, block in enumerate(self.process_block()):
                chunks[i].append(block)
        return [np.concatenate(c, axis=1) if c else np.zeros((r.format.n_channels, 0))
                for c, r in zip(chunks, self.receivers)]


@dataclass
class RenderResult:
    outputs: list[np.ndarray]
    stats: list[BlockStats]
    clamp_count: int
    realtime_factor: float

    @property
    def audio(self) -> np.ndarray:
        """All receivers' channels stacked in declaration order."""
        return np.concatenate(self.outputs, axis=0)

    def write_report(self, path: str | Path) -> None:
        """Per-block CSV plus a plain-text summary next to it."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["block", "image_sources", "clamps", "seconds"])
            for s in self.stats:
                writer.writerow([s.block, s.image_sources, s.clamps, f"{s.seconds:.6g}"])
        path.with_suffix(".txt").write_text(self.summary() + "\n")

    def summary(self) -> str:
        n_img = [s.image_sources for s in self.stats]
        return "\n".join([
            f"blocks: {len(self.stats)}",
            f"image sources per block: min {min(n_img, default=0)} max {max(n_img, default=0)}",
            f"distance clamps: {self.clamp_count}",
            f"realtime factor: {self.realtime_factor:.4g}",
        ])


def render_offline(job: RenderJob) -> RenderResult:
    """Render ``job.duration`` seconds; write a float32 WAV if
    ``job.output`` is set (with ``.diag.csv``/``.diag.txt`` diagnostics)."""
    renderer = Renderer(job.scene)
    fs = job.scene.params.fs
    n_samples = int(round(job.duration * fs))
    n_blocks = math.ceil(n_samples / renderer.block_size)
    t0 = time.perf_counter()
    outputs = [o[:, :n_samples] for o in renderer.run(n_blocks)]
    elapsed = time.perf_counter() - t0
    result = RenderResult(outputs, renderer.stats, sum(d.clamp_count for d in renderer.delays),
                          elapsed / job.duration)
    if job.output is not None:
        out = Path(job.output)
        write_wav(out, result.audio if outputs else np.zeros((0, n_samples)), int(round(fs)))
        result.write_report(out.with_suffix(".diag.csv"))
    return result
