"""Per-sample DSP loops compiled with numba.

Coefficient ramps use ``v0 + (v1 - v0) * (n + 1) / P`` so that the last
sample of a block sees the block-end value, and equal endpoints give the
endpoint value bit-exactly.
"""

import math

import numpy as np
from numba import njit

NEAREST = 0
SINC = 1


@njit(cache=True)
def _read(buf, pos, d, mode, half):
    cap = buf.shape[0]
    p = pos - d
    if mode == NEAREST:
        m = int(math.floor(p + 0.5))
        if m < 0:
            return 0.0
        return buf[m % cap]
    i0 = int(math.floor(p))
    frac = p - i0
    if frac == 0.0:
        if i0 < 0:
            return 0.0
        return buf[i0 % cap]
    acc = 0.0
    wsum = 0.0
    for k in range(1 - half, half + 1):
        t = k - frac
        x = math.pi * t
        w = math.sin(x) / x * (0.5 + 0.5 * math.cos(math.pi * t / half))
        wsum += w
        m = i0 + k
        if m >= 0:
            acc += w * buf[m % cap]
    return acc / wsum


@njit(cache=True)
def transmit(buf, pos, d0, d1, r0, r1, a0, a1, y, mode, half, out):
    """Read a ramped delay, apply 1/r and the one-pole air filter.

    ``pos`` is the absolute index one past the newest sample in ``buf``;
    ``out`` is aligned with the newest ``len(out)`` samples.
    Returns the filter state.
    """
    n_out = out.shape[0]
    start = pos - n_out
    for n in range(n_out):
        u = (n + 1) / n_out
        d = d0 + (d1 - d0) * u
        r = r0 + (r1 - r0) * u
        a = a0 + (a1 - a0) * u
        x = _read(buf, start + n, d, mode, half)
        y = a * y + (1.0 - a) * (x / r)
        out[n] = y
    return y


@njit(cache=True)
def lowpass(x, c0, c1, y, out):
    """y[n] = (1 - c) x[n] + c y[n-1] with c ramped from c0 to c1."""
    n_out = x.shape[0]
    for n in range(n_out):
        c = c0 + (c1 - c0) * ((n + 1) / n_out)
        y = (1.0 - c) * x[n] + c * y
        out[n] = y
    return y


@njit(cache=True)
def reflect(x, rho, delta, y, out):
    """y[n] = delta y[n-1] + rho x[n]."""
    for n in range(x.shape[0]):
        y = delta * y + rho * x[n]
        out[n] = y
    return y


@njit(cache=True)
def mix_into(out, w0, w1, y):
    """out += w(n) y(n) with weights ramped from w0 to w1 per sample."""
    n_ch, n_out = out.shape
    for c in range(n_ch):
        a = w0[c]
        dw = w1[c] - a
        if a == 0.0 and dw == 0.0:
            continue
        for n in range(n_out):
            out[c, n] += (a + dw * ((n + 1) / n_out)) * y[n]


def warmup():
    """Compile the kernels ahead of timing-sensitive work."""
    buf = np.zeros(16, dtype=np.float32)
    out = np.zeros(4)
    transmit(buf, 16, 1.0, 1.5, 1.0, 1.0, 0.0, 0.0, 0.0, NEAREST, 4, out)
    transmit(buf, 16, 5.5, 5.5, 1.0, 1.0, 0.0, 0.0, 0.0, SINC, 4, out)
    lowpass(out, 0.1, 0.2, 0.0, out)
    reflect(out, 1.0, 0.0, 0.0, out)
    mix_into(np.zeros((2, 4)), np.zeros(2), np.ones(2), out)
