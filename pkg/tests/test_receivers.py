import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import fftconvolve
from scipy.special import factorial, lpmv

from vaesim.audio import write_wav
from vaesim.geometry import Euler, euler_to_matrix, sph2cart
from vaesim.receivers import (HOA2D, NSP, VBAP2D, AmbiFuma, Binaural, BinauralFIR, SpeakerLayout, VirtualMic,
                              ambi_fuma_weights, binaural_postprocess, diffuse_decoder, foa_rotate,
                              fuma_channels, hoa2d_order_gains, hoa2d_weights, load_hrir_set, nsp_weights,
                              receiver_mix, speaker_decoder, vbap2d_weights, vmic_decoder, vmic_weight)

SQRT2 = math.sqrt(2)
azimuth = st.floats(-math.pi, math.pi, allow_nan=False)


def at(az_deg, el_deg=0.0, r=1.0):
    return sph2cart(r, math.radians(az_deg), math.radians(el_deg))


# -- layouts -------------------------------------------------------------------

def test_layout_validation_and_ring():
    with pytest.raises(ValueError):
        SpeakerLayout([(0, 0, 0)])
    ring = SpeakerLayout.ring(8)
    np.testing.assert_allclose(np.degrees(ring.azimuths) % 360, np.arange(0, 360, 45), atol=1e-9)
    assert ring.ring_deviation() < 1e-12
    irregular = SpeakerLayout.from_spherical([0, 100, 240])
    assert math.degrees(irregular.ring_deviation()) == pytest.approx(20)


# -- virtual microphone ----------------------------------------------------------

def test_vmic_examples():
    assert vmic_weight(at(123, 40), 0.0) == 1.0
    np.testing.assert_array_equal(vmic_decoder(0.0), [[SQRT2, 0, 0, 0]])
    assert vmic_weight(at(180), 1.0) == pytest.approx(-1)
    assert vmic_weight(at(90), 0.5) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        VirtualMic(1.5)


# -- NSP -------------------------------------------------------------------------

def test_nsp_examples():
    ring = SpeakerLayout.ring(8)
    assert np.argmax(nsp_weights(at(135), ring)) == 3
    w = nsp_weights(at(40), ring)
    assert np.argmax(w) == 1 and w.sum() == 1
    # exactly between speakers 0 and 1: lowest index wins
    tie = SpeakerLayout.from_spherical([-10, 10])
    np.testing.assert_array_equal(nsp_weights(np.array([1.0, 0, 0]), tie), [1, 0])


@given(azimuth, st.floats(-1.4, 1.4))
def test_nsp_single_unit_weight(az, el):
    w = NSP(SpeakerLayout.ring(7)).weights(sph2cart(2.0, az, el))
    assert np.count_nonzero(w) == 1 and np.sum(w ** 2) == 1.0


# -- VBAP ------------------------------------------------------------------------

def test_vbap_examples():
    quad = SpeakerLayout.from_spherical([0, 90])
    np.testing.assert_allclose(vbap2d_weights(at(45), quad), [SQRT2 / 2, SQRT2 / 2])
    np.testing.assert_allclose(vbap2d_weights(at(0), quad), [1, 0], atol=1e-15)
    np.testing.assert_allclose(vbap2d_weights(at(30), quad), [math.cos(math.radians(30)), 0.5])


@given(azimuth)
def test_vbap_unit_norm_two_active(az):
    layout = SpeakerLayout.from_spherical([0, 30, 110, 180, 250, 330])
    w = vbap2d_weights(sph2cart(1.0, az, 0.3), layout)
    assert abs(np.sum(w ** 2) - 1) < 1e-9
    assert np.count_nonzero(w) <= 2 and np.all(w >= 0)


def test_vbap_continuous_across_speakers():
    layout = SpeakerLayout.ring(5)
    az = np.linspace(-math.pi, math.pi, 20001)
    w = np.array([vbap2d_weights(sph2cart(1, a, 0), layout) for a in az])
    assert np.max(np.abs(np.diff(w, axis=0))) < 1e-3


def test_vbap_irregular_layout_falls_back():
    # 200 degree gap between the two speakers: the far side uses the other arc
    layout = SpeakerLayout.from_spherical([0, 160])
    w = vbap2d_weights(at(-90), layout)
    assert abs(np.sum(w ** 2) - 1) < 1e-9 and np.all(w >= 0)


def test_vbap_needs_two_speakers():
    with pytest.raises(ValueError):
        VBAP2D(SpeakerLayout.from_spherical([0]))


# -- HOA2D -----------------------------------------------------------------------

def test_maxre_gains():
    np.testing.assert_allclose(hoa2d_order_gains(3)[1:], [0.9238795325112867, 0.7071067811865476,
                                                          0.3826834323650898])
    np.testing.assert_array_equal(hoa2d_order_gains(2, "basic"), 1.0)
    with pytest.raises(ValueError):
        hoa2d_order_gains(2, "inphase")


def test_hoa_brute_force_oracle():
    # encode (1, cos m phi, sin m phi) and sample-decode, written out directly
    ring = SpeakerLayout.ring(8)
    phi = math.radians(17)
    M = 2
    g = hoa2d_order_gains(M)
    expected = []
    for theta in ring.azimuths:
        acc = g[0]
        for m in range(1, M + 1):
            acc += 2 * g[m] * (math.cos(m * phi) * math.cos(m * theta) + math.sin(m * phi) * math.sin(m * theta))
        expected.append(acc / 8)
    np.testing.assert_allclose(hoa2d_weights(at(17), ring, M), expected, atol=1e-15)


def test_hoa_basic_symmetric_peak():
    w = hoa2d_weights(at(0), SpeakerLayout.ring(8), 1, "basic")
    assert np.argmax(w) == 0
    np.testing.assert_allclose(w[1:], w[1:][::-1], atol=1e-15)


def test_hoa_rotation_covariance():
    ring = SpeakerLayout.ring(8)
    w0 = hoa2d_weights(at(10), ring, 3)
    w1 = hoa2d_weights(at(55), ring, 3)
    np.testing.assert_allclose(np.roll(w0, 1), w1, atol=1e-12)


def test_hoa_class_matches_function():
    ring = SpeakerLayout.ring(9)
    fmt = HOA2D(ring, 4, "basic")
    np.testing.assert_allclose(fmt.weights(at(71, 20)), hoa2d_weights(at(71, 20), ring, 4, "basic"), atol=1e-15)


def test_hoa_order_guard():
    with pytest.raises(ValueError):
        HOA2D(SpeakerLayout.ring(6), 3)
    with pytest.raises(ValueError):
        hoa2d_weights(at(0), SpeakerLayout.ring(6), 3)


def test_hoa_maxre_energy_ripple():
    ring = SpeakerLayout.ring(8)
    energy = [np.sum(hoa2d_weights(sph2cart(1, a, 0), ring, 3) ** 2) for a in np.linspace(0, 2 * np.pi, 721)]
    ripple = 10 * np.log10(max(energy) / min(energy))
    assert ripple < 0.01


# -- FuMa ------------------------------------------------------------------------

FUMA_FROM_SN3D = {  # Ambisonics Association conversion factors
    "W": 1 / SQRT2, "X": 1, "Y": 1, "Z": 1,
    "R": 1, "S": 2 / math.sqrt(3), "T": 2 / math.sqrt(3), "U": 2 / math.sqrt(3), "V": 2 / math.sqrt(3),
    "K": 1, "L": math.sqrt(45 / 32), "M": math.sqrt(45 / 32), "N": 3 / math.sqrt(5), "O": 3 / math.sqrt(5),
    "P": math.sqrt(8 / 5), "Q": math.sqrt(8 / 5),
}
FUMA_LM = {"W": (0, 0), "X": (1, 1), "Y": (1, -1), "Z": (1, 0), "R": (2, 0), "S": (2, 1), "T": (2, -1),
           "U": (2, 2), "V": (2, -2), "K": (3, 0), "L": (3, 1), "M": (3, -1), "N": (3, 2), "O": (3, -2),
           "P": (3, 3), "Q": (3, -3)}


def sn3d(l, m, az, el):
    am = abs(m)
    norm = math.sqrt((2 - (am == 0)) * factorial(l - am) / factorial(l + am))
    # scipy includes the Condon-Shortley phase; remove it
    p = (-1) ** am * lpmv(am, l, math.sin(el))
    return norm * p * (math.cos(am * az) if m >= 0 else math.sin(am * az))


@settings(max_examples=40)
@given(azimuth, st.floats(-1.5, 1.5))
def test_fuma_matches_sn3d_conversion(az, el):
    w = ambi_fuma_weights(sph2cart(1.0, az, el), 3)
    expected = [FUMA_FROM_SN3D[c] * sn3d(*FUMA_LM[c], az, el) for c in fuma_channels(3)]
    np.testing.assert_allclose(w, expected, atol=1e-12)


def test_fuma_examples():
    np.testing.assert_allclose(ambi_fuma_weights(np.array([1.0, 0, 0]), 1), [1 / SQRT2, 1, 0, 0], atol=1e-15)
    assert fuma_channels(1, 2) == "WXY"
    assert fuma_channels(3, 2) == "WXYUVPQ"
    assert fuma_channels(2) == "WXYZRSTUV"
    for p in (at(33, 60), at(-170, -20)):
        assert ambi_fuma_weights(p, 2)[0] == 1 / SQRT2
    assert AmbiFuma(3, 2).n_channels == 7
    with pytest.raises(ValueError):
        fuma_channels(4)


def test_fuma_2d_ignores_elevation():
    np.testing.assert_allclose(ambi_fuma_weights(at(40, 35), 3, 2), ambi_fuma_weights(at(40), 3, 2), atol=1e-12)


# -- homogeneity -----------------------------------------------------------------

@settings(max_examples=30)
@given(azimuth, st.floats(-1.2, 1.2), st.floats(0.01, 100))
def test_weights_depend_on_direction_only(az, el, scale):
    p = sph2cart(1.0, az, el)
    ring = SpeakerLayout.ring(8)
    for fmt in (VirtualMic(0.5), NSP(ring), VBAP2D(ring), HOA2D(ring, 3), AmbiFuma(3)):
        np.testing.assert_allclose(fmt.weights(p * scale), fmt.weights(p), atol=1e-12)


# -- diffuse decoding ------------------------------------------------------------

def test_speaker_decoder_examples():
    single = SpeakerLayout([(1, 0, 0)])
    np.testing.assert_allclose(speaker_decoder(single, 2), [[SQRT2, 1 / SQRT2, 0, 0]])
    ring = SpeakerLayout.ring(6)
    d = speaker_decoder(ring, 2)
    out = d @ np.array([1.0, 0, 0, 0])
    np.testing.assert_allclose(out, SQRT2 / 6)
    assert abs(d[:, 1].sum()) < 1e-12
    d3 = speaker_decoder(SpeakerLayout([(0, 0, 1), (0, 0, -1)]), 3)
    np.testing.assert_allclose(d3[:, 3], [1 / math.sqrt(3) / 2, -1 / math.sqrt(3) / 2])


def test_diffuse_decoder_per_format():
    np.testing.assert_array_equal(diffuse_decoder(VirtualMic(0.3)), vmic_decoder(0.3))
    np.testing.assert_array_equal(diffuse_decoder(AmbiFuma(1)), np.eye(4))
    d = diffuse_decoder(AmbiFuma(2, 2))
    assert d.shape == (5, 4) and d[0, 0] == 1 and d[2, 2] == 1 and not d[:, 3].any()


def test_foa_rotate_examples(rng):
    foa = rng.standard_normal((4, 64))
    np.testing.assert_array_equal(foa_rotate(foa, Euler()), foa)
    # receiver yawed +90 deg: a source on the world x axis is to its right (-y)
    x_only = np.zeros((4, 1))
    x_only[1] = 1.0
    np.testing.assert_allclose(foa_rotate(x_only, Euler(math.pi / 2, 0, 0))[1:, 0], [0, -1, 0], atol=1e-15)
    # box yawed +90 deg, receiver unrotated: box x maps onto world y
    np.testing.assert_allclose(foa_rotate(x_only, Euler(), Euler(math.pi / 2, 0, 0))[1:, 0], [0, 1, 0],
                               atol=1e-15)
    rotated = foa_rotate(foa, Euler(0.3, -0.7, 1.1), euler_to_matrix(Euler(1, 2, 3)))
    np.testing.assert_array_equal(rotated[0], foa[0])
    np.testing.assert_allclose(np.sum(rotated[1:] ** 2, axis=0), np.sum(foa[1:] ** 2, axis=0), rtol=1e-9)
    with pytest.raises(ValueError):
        foa_rotate(foa[:3], Euler())


# -- mixing ----------------------------------------------------------------------

def test_mix_examples(rng):
    y = rng.standard_normal(32)
    assert not receiver_mix([], n_channels=3, block_size=32).any()
    out = receiver_mix([(np.array([1.0, 0, 0]), y)])
    np.testing.assert_array_equal(out[0], y)
    assert not out[1:].any()


def test_mix_ramps_weights_linearly():
    out = receiver_mix([(np.array([0.0, 1.0]), np.array([1.0, 0.0]), np.ones(4))])
    np.testing.assert_allclose(out, [[0.25, 0.5, 0.75, 1.0], [0.75, 0.5, 0.25, 0.0]])


def test_mix_superposition(rng):
    d = speaker_decoder(SpeakerLayout.ring(4), 2)
    a = [(rng.standard_normal(4), rng.standard_normal(4), rng.standard_normal(16)) for _ in range(3)]
    b = [(rng.standard_normal(4), rng.standard_normal(16)) for _ in range(2)]
    fa, fb = [rng.standard_normal((4, 16))], [rng.standard_normal((4, 16))]
    both = receiver_mix(a + b, fa + fb, d)
    np.testing.assert_allclose(both, receiver_mix(a, fa, d) + receiver_mix(b, fb, d), rtol=1e-12, atol=1e-12)


def test_mix_channel_mismatch():
    with pytest.raises(ValueError):
        receiver_mix([(np.ones(3), np.ones(8))], n_channels=4)
    with pytest.raises(ValueError):
        receiver_mix([], [np.ones((4, 8))], decoder=np.ones((2, 3)), n_channels=2)


# -- binaural --------------------------------------------------------------------

def test_binaural_unit_impulses(rng):
    z = rng.standard_normal((3, 100))
    h = np.zeros((3, 2, 4))
    h[:, :, 0] = 1.0
    out = binaural_postprocess(z, h)
    np.testing.assert_allclose(out, np.vstack([z.sum(0), z.sum(0)]), atol=1e-12)


def test_binaural_delayed_impulses(rng):
    z = rng.standard_normal((2, 50))
    h = np.zeros((2, 2, 8))
    h[:, :, 5] = 1.0
    out = binaural_postprocess(z, h)
    np.testing.assert_allclose(out[:, 5:], np.vstack([z.sum(0), z.sum(0)])[:, :45], atol=1e-12)


def test_binaural_streaming_matches_reference(rng):
    z = rng.standard_normal((4, 1000))
    z[1:] = 0.0
    h = rng.standard_normal((4, 2, 37))
    fir = BinauralFIR(h)
    out = np.hstack([fir(z[:, i:i + 100]) for i in range(0, 1000, 100)])
    ref = np.vstack([fftconvolve(z[0], h[0, 0])[:1000], fftconvolve(z[0], h[0, 1])[:1000]])
    np.testing.assert_allclose(out, ref, atol=1e-10)


def test_binaural_format_checks():
    ring = NSP(SpeakerLayout.ring(4))
    with pytest.raises(ValueError):
        Binaural(ring, np.zeros((3, 2, 8)))
    fmt = Binaural(ring, np.zeros((4, 2, 8)))
    assert fmt.n_channels == 2 and fmt.n_mix == 4


def test_hrir_manifest(tmp_path):
    entries = []
    for i, az in enumerate((0, 90, 180, 270)):
        ir = np.zeros((2, 16))
        ir[0, i] = 1.0
        ir[1, i + 1] = 0.5
        write_wav(tmp_path / f"h{i}.wav", ir, 44100)
        entries.append({"azimuth": az, "elevation": 0, "file": f"h{i}.wav"})
    (tmp_path / "set.json").write_text(json.dumps({"entries": entries}))
    hset = load_hrir_set(tmp_path / "set.json")
    assert hset.responses.shape == (4, 2, 16)
    matched = hset.match(SpeakerLayout.from_spherical([85, -5]))
    assert matched[0, 0, 1] == 1.0 and matched[1, 0, 0] == 1.0


def test_hrir_manifest_errors(tmp_path):
    (tmp_path / "empty.json").write_text(json.dumps({"entries": []}))
    with pytest.raises(ValueError):
        load_hrir_set(tmp_path / "empty.json")
    with pytest.raises(OSError):
        load_hrir_set(tmp_path / "missing.json")
