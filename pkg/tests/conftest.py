import sys
import numpy as np
import pytest

from vaesim.engine import Receiver, Scene, SceneParams, Source
from vaesim.geometry import Trajectory
from vaesim.receivers import VirtualMic

FS = 44100


def tone(freq, seconds, fs=FS, amp=1.0):
    t = np.arange(int(round(seconds * fs))) / fs
    return amp * np.sin(2 * np.pi * freq * t)


def peak_frequency(x, fs=FS):
    """FFT peak with parabolic interpolation on the log magnitude."""
    x = np.asarray(x, dtype=float)
    spec = np.abs(np.fft.rfft(x * np.hanning(len(x))))
    k = int(np.argmax(spec[1:-1])) + 1
    a, b, c = np.log(spec[k - 1:k + 2] + 1e-300)
    shift = 0.5 * (a - c) / (a - 2 * b + c)
    return (k + shift) * fs / len(x)


def rms_db(x):
    return 20 * np.log10(np.sqrt(np.mean(np.square(x))))


def omni_scene(sources, **params):
    """Scene with the given sources and one omni receiver at the origin."""
    return Scene(SceneParams(**params), sources=list(sources), receivers=[Receiver("mic", VirtualMic(0.0))])


def static_source(name, pos, audio, **kw):
    return Source(name, Trajectory.static(pos), audio=audio, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
