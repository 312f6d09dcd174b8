import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.signal import freqz, lfilter

from conftest import peak_frequency, tone
from vaesim.transmission import (DelayLine, Obstacle, ObstacleState, OnePoleState, TransmissionParams,
                                 air_absorption_coeff, apply_obstacle, directivity_coeff, directivity_filter,
                                 obstacle_cutoff, process_transmission)

FS = 44100
NO_AIR = TransmissionParams(air_constant=math.inf)


def stream(x, delay, r_of_block, block=1024):
    """Push ``x`` block-wise; ``r_of_block(b)`` gives the block-end distance."""
    state = OnePoleState()
    out = []
    r_prev = r_of_block(0)
    for b in range(len(x) // block):
        r = r_of_block(b)
        out.append(process_transmission(x[b * block:(b + 1) * block], r_prev, r, delay, state).copy())
        r_prev = r
    return np.concatenate(out)


def test_air_coeff_examples():
    p = TransmissionParams()
    assert air_absorption_coeff(0.0, p) == 1.0
    # high-precision evaluation of exp(-50*44100/(340*7782))
    assert air_absorption_coeff(50.0, p) == pytest.approx(0.43458178334811879, abs=1e-12)


@given(st.floats(0, 500))
def test_air_coeff_doubling_squares(r):
    p = TransmissionParams()
    assert air_absorption_coeff(2 * r, p) == pytest.approx(air_absorption_coeff(r, p) ** 2, rel=1e-12)
    assert 0 < air_absorption_coeff(r, p) <= 1


def test_params_validated():
    with pytest.raises(ValueError):
        TransmissionParams(c=0)
    assert not NO_AIR.air_enabled


def test_impulse_after_exactly_one_second():
    # r = c metres is fs samples of delay
    p = TransmissionParams(fs=FS, c=340.0, air_constant=math.inf)
    delay = DelayLine(400, p, block_size=1024)
    x = np.zeros(2 * FS)
    x[0] = 1.0
    y = stream(x, delay, lambda b: 340.0)
    assert np.argmax(np.abs(y)) == FS
    assert y[FS] == pytest.approx(1 / 340.0, rel=1e-7)
    assert np.count_nonzero(y) == 1


def test_impulse_with_air_filter():
    p = TransmissionParams(fs=FS, c=340.0)
    delay = DelayLine(400, p)
    x = np.zeros(2 * FS)
    x[0] = 1.0
    y = stream(x, delay, lambda b: 340.0)
    a = air_absorption_coeff(340.0, p)
    expected = np.zeros_like(y)
    expected[FS:] = (1 - a) / 340.0 * a ** np.arange(len(y) - FS)
    np.testing.assert_allclose(y, expected, rtol=1e-6, atol=1e-15)


@pytest.mark.parametrize("r", [0.5, 2.0, 37.0])
def test_dc_steady_state_is_inverse_distance(r):
    delay = DelayLine(100, TransmissionParams())
    y = stream(np.ones(20 * 1024), delay, lambda b: r)
    assert y[-1] == pytest.approx(1 / r, rel=1e-6)


def test_sinc_and_nearest_agree_at_integer_delay(rng):
    p = TransmissionParams(fs=FS, c=FS / 10.0, air_constant=math.inf)  # 10 samples per metre
    x = rng.standard_normal(8 * 512)
    a = stream(x, DelayLine(50, p, 512, "nearest"), lambda b: 3.7, 512)
    b = stream(x, DelayLine(50, p, 512, "sinc"), lambda b: 3.7, 512)
    np.testing.assert_array_equal(a, b)


def test_sinc_fractional_delay_of_sine():
    # half-sample delay of a low-frequency sine is reproduced closely
    p = TransmissionParams(fs=FS, c=FS / 10.0, air_constant=math.inf)
    x = tone(500, 0.5)
    y = stream(x, DelayLine(50, p, 512, "sinc"), lambda b: 2.05, 512)
    n = np.arange(len(y))
    expected = np.sin(2 * np.pi * 500 * (n - 20.5) / FS) / 2.05
    np.testing.assert_allclose(y[2000:20000], expected[2000:20000], atol=2e-3)


def test_transmission_doppler_instantaneous_distance():
    # r(t) read at the current time: 1 kHz becomes f (1 + v/c) = 1100 Hz
    c, v = 343.0, 34.3
    p = TransmissionParams(fs=FS, c=c, air_constant=math.inf)
    x = tone(1000, 5.0)
    block = 256
    r_at = lambda b: 200.0 - v * ((b + 1) * block - 1) / FS
    y = stream(x, DelayLine(250, p, block), r_at, block)
    assert peak_frequency(y[FS:]) == pytest.approx(1000 * (1 + v / c), rel=2e-3)


def test_deterministic(rng):
    x = rng.standard_normal(4096)
    outs = [stream(x, DelayLine(20, TransmissionParams(), interpolation="sinc"), lambda b: 1 + 0.3 * b)
            for _ in range(2)]
    assert outs[0].tobytes() == outs[1].tobytes()


def test_clamp_counts_out_of_range():
    delay = DelayLine(10, TransmissionParams())
    stream(np.ones(4096), delay, lambda b: 50.0)
    assert delay.clamp_count > 0
    delay = DelayLine(10, TransmissionParams())
    stream(np.ones(4096), delay, lambda b: 0.01)
    assert delay.clamp_count > 0


def test_memory_per_metre():
    a = DelayLine(10000, TransmissionParams(), 1024)
    b = DelayLine(20000, TransmissionParams(), 1024)
    per_metre = (b.nbytes - a.nbytes) / 10000
    assert per_metre == pytest.approx(4 * FS / 340, rel=1e-3)
    assert per_metre == pytest.approx(520, rel=0.02)


def test_delay_line_arguments():
    with pytest.raises(ValueError):
        DelayLine(0)
    with pytest.raises(ValueError):
        DelayLine(1, interpolation="cubic")
    with pytest.raises(ValueError):
        DelayLine(1, taps=7)


def test_lowpass_kernel_matches_lfilter(rng):
    x = rng.standard_normal(1000)
    y = directivity_filter(x, np.array([-0.3, 0.95, 0]), 3000.0, OnePoleState())
    c = directivity_coeff(-0.3, 3000.0, FS)
    np.testing.assert_allclose(y, lfilter([1 - c], [1, -c], x), rtol=1e-12, atol=1e-14)


def test_directivity_on_axis_passes():
    x = np.random.default_rng(0).standard_normal(512)
    assert directivity_coeff(1.0, 1000, FS) == 0.0
    np.testing.assert_array_equal(directivity_filter(x, np.array([1.0, 0, 0]), 1000, OnePoleState()), x)


def test_directivity_rear_holds_state():
    state = OnePoleState(0.25)
    assert directivity_coeff(-1.0, 1000, FS) == 1.0
    y = directivity_filter(np.ones(64), np.array([-1.0, 0, 0]), 1000, state)
    np.testing.assert_array_equal(y, 0.25)


@pytest.mark.parametrize("f6", [250.0, 1000.0, 4000.0])
def test_directivity_side_response_matches_filter_formula(f6):
    # measured magnitude at f6 equals the analytic one-pole response
    x = tone(f6, 1.0)
    y = directivity_filter(x, np.array([0.0, 1, 0]), f6, OnePoleState())
    measured = 20 * np.log10(np.std(y[FS // 2:]) / np.std(x[FS // 2:]))
    c = directivity_coeff(0.0, f6, FS)
    _, h = freqz([1 - c], [1, -c], worN=[f6], fs=FS)
    assert measured == pytest.approx(20 * np.log10(abs(h[0])), abs=0.02)
    # the coefficient formula puts the side response near -7 dB, not -6 dB
    assert -7.1 < measured < -6.8


def test_directivity_rejects_bad_f6():
    with pytest.raises(ValueError):
        directivity_filter(np.ones(4), np.array([1.0, 0, 0]), FS, OnePoleState())


def test_obstacle_cutoff_examples():
    assert obstacle_cutoff(math.pi / 2, math.pi, 340) == pytest.approx(103.6717792256866, rel=1e-12)
    assert obstacle_cutoff(0.7, 4 * 2.0, 340) == pytest.approx(obstacle_cutoff(0.7, 2.0, 340) / 2)
    assert obstacle_cutoff(0.0, 1.0) == math.inf
    assert obstacle_cutoff(1e-9, 1.0) > 1e9


SCREEN = [(0, -1, -1), (0, 1, -1), (0, 1, 1), (0, -1, 1)]


def test_obstacle_geometry():
    obs = Obstacle(SCREEN, 0.2)
    assert obs.area == pytest.approx(4)
    assert obs.aperture == pytest.approx(2 * math.sqrt(4 / math.pi))
    # straight through the centre: detour over an edge midpoint at (0, +-1, 0) or (0, 0, +-1)
    theta = obs.diffraction_angle(np.array([-1.0, 0, 0]), np.array([1.0, 0, 0]))
    assert theta == pytest.approx(2 * math.atan(1.0), rel=1e-6)
    with pytest.raises(ValueError):
        Obstacle(SCREEN, 1.5)


def test_obstacle_transparent_and_dc():
    x = np.random.default_rng(3).standard_normal(256)
    src, rec = np.array([-1.0, 0.2, 0]), np.array([1.0, 0, 0.1])
    np.testing.assert_array_equal(apply_obstacle(x, Obstacle(SCREEN, 1.0), src, rec, ObstacleState()), x)
    state = ObstacleState()
    for _ in range(200):
        y = apply_obstacle(np.ones(1024), Obstacle(SCREEN, 0.0), src, rec, state)
    assert y[-1] == pytest.approx(1.0, abs=1e-9)


def test_obstacle_grazing_path_bypasses_filter():
    # source and receiver on the plane of an edge: no deflection, f_o = inf
    x = np.random.default_rng(4).standard_normal(256)
    src, rec = np.array([-1.0, 1.0, 0]), np.array([1.0, 1.0, 0])
    np.testing.assert_allclose(apply_obstacle(x, Obstacle(SCREEN, 0.0), src, rec, ObstacleState()), x,
                               atol=1e-12)


def test_obstacle_is_second_order_lowpass():
    obs = Obstacle(SCREEN, 0.0)
    src, rec = np.array([-1.0, 0, 0]), np.array([1.0, 0, 0])
    f_o = obstacle_cutoff(obs.diffraction_angle(src, rec), obs.area)
    c = math.exp(-2 * math.pi * f_o / FS)
    x = np.random.default_rng(5).standard_normal(2048)
    expected = lfilter([(1 - c) ** 2], np.convolve([1, -c], [1, -c]), x)
    np.testing.assert_allclose(apply_obstacle(x, obs, src, rec, ObstacleState()), expected, atol=1e-12)
