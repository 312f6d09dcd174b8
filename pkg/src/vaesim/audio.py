"""WAV file I/O and the block-wise audio player."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a WAV file as float64, shape (channels, samples).

    Integer PCM is scaled to [-1, 1).
    """
    fs, data = wavfile.read(str(path))
    if np.issubdtype(data.dtype, np.integer):
        if data.dtype == np.uint8:
            data = (data.astype(np.float64) - 128.0) / 128.0
        else:
            data = data.astype(np.float64) / float(-np.iinfo(data.dtype).min)
    else:
        data = data.astype(np.float64)
    if data.ndim == 1:
        data = data[:, None]
    return np.ascontiguousarray(data.T), int(fs)


def write_wav(path: str | Path, data: np.ndarray, fs: int) -> None:
    """Write (channels, samples) as 32-bit float WAV."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 1:
        data = data[None, :]
    wavfile.write(str(path), int(fs), np.ascontiguousarray(data.T))


class AudioPlayer:
    """Streams fixed-size blocks from a (channels, samples) array.

    At the end of the material the player either wraps around (``loop``)
    or pads with zeros.
    """

    def __init__(self, data, fs: float, loop: bool = False, gain: float = 1.0):
        data = np.asarray(data, dtype=float)
        if data.ndim == 1:
            data = data[None, :]
        self.data = data * gain if gain != 1.0 else data
        self.fs = fs
        self.loop = loop
        self.gain = gain
        self.pos = 0

    @classmethod
    def from_file(cls, path: str | Path, fs: float, loop: bool = False, gain: float = 1.0) -> "AudioPlayer":
        data, file_fs = read_wav(path)
        if file_fs != fs:
            raise ValueError(f"{path}: sample rate {file_fs} Hz does not match scene rate {fs:g} Hz")
        return cls(data, fs, loop=loop, gain=gain)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    def reset(self):
        self.pos = 0

    def next_block(self, n: int) -> np.ndarray:
        """Next ``n`` samples, shape (channels, n)."""
        length = self.data.shape[1]
        if length == 0:
            return np.zeros((self.n_channels, n))
        if self.loop:
            idx = (self.pos + np.arange(n)) % length
            block = self.data[:, idx]
        else:
            block = np.zeros((self.n_channels, n))
            avail = max(0, min(n, length - self.pos))
            block[:, :avail] = self.data[:, self.pos:self.pos + avail]
        self.pos += n
        return block


def audio_player(file: str | Path, fs: float, loop: bool = False, gain: float = 1.0) -> AudioPlayer:
    return AudioPlayer.from_file(file, fs, loop=loop, gain=gain)
