import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudovoice import testsignals
from pseudovoice.speech_codec import (
    EPS_MAX,
    EPS_MIN,
    FRAME,
    WINDOW,
    PitchHistory,
    VocalParams,
    band_centers,
    band_energies,
    deemphasize,
    encode_frame,
    encode_speech,
    estimate_pitch_speech,
    features_from_params,
    levinson_durbin,
    log_bands_from_features,
    lpc_from_bands,
    mel_filterbank,
    power_spectrum,
    preemphasize,
    synthesize_speech,
    write_filterbank_csv,
)


def test_preemphasis_impulse_and_dc():
    x = np.zeros(6)
    x[0] = 1
    np.testing.assert_allclose(preemphasize(x), [1, -0.85, 0, 0, 0, 0])
    np.testing.assert_allclose(preemphasize(np.full(50, 7.0))[1:], 0.15 * 7.0)
    np.testing.assert_allclose(deemphasize(x), 0.85 ** np.arange(6))
    assert deemphasize(np.ones(2000))[-1] == pytest.approx(1 / 0.15)


def test_emphasis_round_trip_on_pcm():
    x = testsignals.synthetic_speech(1.0, seed=3).astype(float)
    y = np.rint(deemphasize(np.rint(preemphasize(x))))
    assert np.max(np.abs(y[200:] - x[200:])) <= 1 / 0.15


def test_emphasis_state_carries_across_blocks():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(1000)
    a, s = preemphasize(x[:400], return_state=True)
    b = preemphasize(x[400:], prev=s)
    np.testing.assert_allclose(np.r_[a, b], preemphasize(x), atol=1e-12)


def test_filterbank_layout(tmp_path):
    c = band_centers()
    assert c[0] == 0 and c[-1] == pytest.approx(4000)
    w = mel_filterbank()
    assert w.shape == (9, 257)
    assert np.all(w >= 0)
    write_filterbank_csv(tmp_path / "fb.csv")
    assert len((tmp_path / "fb.csv").read_text().splitlines()) == 10


def test_power_spectrum_sum_is_mean_square():
    rng = np.random.default_rng(1)
    x = 100 * rng.standard_normal(WINDOW)
    w = np.hanning(WINDOW + 2)[1:-1]
    assert power_spectrum(x).sum() == pytest.approx(np.mean((x * w) ** 2) / np.mean(w**2), rel=1e-12)


def test_silence_band_energies():
    np.testing.assert_array_equal(band_energies(np.zeros(WINDOW)), 0)


def test_tone_concentrates_in_adjacent_bands():
    t = np.arange(WINDOW) / 8000
    E = band_energies(1000 * np.sin(2 * np.pi * 1000 * t))
    top = np.argsort(E)[::-1][:2]
    assert abs(top[0] - top[1]) == 1
    assert E[top].sum() >= 0.9 * E.sum()


def test_white_noise_follows_filter_areas():
    rng = np.random.default_rng(2)
    E = np.mean([band_energies(rng.standard_normal(WINDOW)) for _ in range(100)], axis=0)
    areas = mel_filterbank().sum(axis=1)
    ratio = (E / E.sum()) / (areas / areas.sum())
    assert np.all(np.abs(ratio - 1) < 0.1)


@pytest.mark.parametrize(
    "signal,expected",
    [(testsignals.pulse_train(100.0, 0.5), 80), (testsignals.sawtooth(250.0, 0.5), 32)],
)
def test_pitch_of_periodic_signals(signal, expected):
    params = encode_speech(signal)
    pitches = np.array([p.pitch for p in params[2:-2]])
    assert np.all(np.abs(pitches - expected) <= 1)
    assert all(p.voiced for p in params[2:-2])


def test_white_noise_unvoiced():
    rng = np.random.default_rng(3)
    flags = [estimate_pitch_speech(1000 * rng.standard_normal(WINDOW))[1] for _ in range(50)]
    assert not any(flags)


def test_unvoiced_repeats_previous_period():
    h = PitchHistory(previous=55.0, voiced=True)
    rng = np.random.default_rng(4)
    p, voiced = estimate_pitch_speech(rng.standard_normal(WINDOW), h)
    assert not voiced and p == 55.0


def test_energy_clamps():
    v = encode_frame(np.zeros(WINDOW), np.zeros(WINDOW))
    assert v.energy == EPS_MIN
    sq = 32767.0 * np.sign(np.sin(2 * np.pi * 200 * np.arange(WINDOW) / 8000))
    v = encode_frame(preemphasize(sq), sq)
    assert v.energy == EPS_MAX


def test_timbre_unit_nonnegative():
    for v in encode_speech(testsignals.synthetic_speech(2.0, seed=5)):
        assert abs(np.linalg.norm(v.timbre) - 1) < 1e-12
        assert np.all(v.timbre >= 0)


def test_features():
    v = VocalParams(900.0, 100.0, np.ones(9) / 3)
    f = features_from_params(v)
    assert f.rho == 0
    np.testing.assert_allclose(f.cepstra[1:], 0, atol=1e-12)
    assert f.cepstra[0] == pytest.approx(3 * np.log10(100.0))
    rng = np.random.default_rng(6)
    d = rng.uniform(0.1, 1, 9)
    v = VocalParams(1e5, 60.0, d / np.linalg.norm(d))
    np.testing.assert_allclose(log_bands_from_features(features_from_params(v)), np.log10(v.band_energies()), atol=1e-9)


def test_levinson_against_direct_solve():
    rng = np.random.default_rng(7)
    x = np.convolve(rng.standard_normal(4000), [1, 0.6, -0.3, 0.2])
    r = np.array([np.dot(x[: x.size - k], x[k:]) for k in range(7)])
    a, k, err = levinson_durbin(r, 6)
    T = np.array([[r[abs(i - j)] for j in range(6)] for i in range(6)])
    np.testing.assert_allclose(a, np.linalg.solve(T, r[1:7]), rtol=1e-9, atol=1e-12)
    assert err == pytest.approx(r[0] - a @ r[1:7])


def test_lpc_flat_and_low_band():
    areas = mel_filterbank().sum(axis=1)
    flat = lpc_from_bands(1e4 * areas)
    assert np.max(np.abs(flat.a)) < 1e-3
    E = np.full(9, 1.0)
    E[0] = 1e6
    assert lpc_from_bands(E).reflection[0] > 0.9


@given(st.lists(st.floats(1e-6, 1e6), min_size=9, max_size=9))
@settings(max_examples=300, deadline=None)
def test_lpc_stable(E):
    assert np.all(np.abs(lpc_from_bands(np.array(E)).reflection) < 1)


def test_lpc_stable_sweep():
    rng = np.random.default_rng(8)
    for E in 10 ** rng.uniform(-2, 7, (10_000, 9)):
        assert np.all(np.abs(lpc_from_bands(E).reflection) < 1)


def test_analysis_by_synthesis_pitch():
    x = testsignals.sawtooth(100.0, 1.0, 6000)
    params = encode_speech(x)
    y = synthesize_speech(params)
    again = encode_speech(y)
    for a, b in zip(params[3:-3], again[3:-3]):
        assert abs(a.pitch - b.pitch) <= 2


def test_synthesized_frame_energy():
    rng = np.random.default_rng(9)
    params = []
    for i in range(60):
        d = rng.uniform(0.05, 1, 9)
        params.append(VocalParams(10 ** rng.uniform(3, 6), rng.uniform(30, 90), d / np.linalg.norm(d), bool(i % 3)))
    y = preemphasize(synthesize_speech(params).astype(float))
    for i, v in enumerate(params):
        seg = y[i * FRAME : (i + 1) * FRAME]
        assert np.mean(seg**2) == pytest.approx(v.energy, rel=0.05)


def test_silence_synthesis_is_quiet():
    params = [VocalParams(EPS_MIN, 128.0, np.ones(9) / 3, False) for _ in range(20)]
    y = synthesize_speech(params).astype(float)
    assert 20 * np.log10(np.sqrt(np.mean(y**2)) / 32768) < -50
