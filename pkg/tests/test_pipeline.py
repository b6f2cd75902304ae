import csv
import math

import numpy as np
import pytest

from oracles import naive_ring_error, naive_rmse
from pseudovoice import testsignals
from pseudovoice.cipher import CipherConfig
from pseudovoice.config import ChannelSpec, PipelineConfig
from pseudovoice.errors import ConfigError
from pseudovoice.pipeline import (
    decrypt,
    encrypt,
    evaluate,
    keygen,
    read_trace,
    rmse_report,
    simulate,
    sweep,
    write_csv,
    write_trace,
)

SEED = "0f" * 32
OTHER = "a5" * 32
CFG = CipherConfig()


@pytest.fixture(scope="module")
def speech():
    return testsignals.synthetic_speech(2.0, seed=1)


@pytest.fixture(scope="module")
def clean(speech):
    return simulate(speech, SEED)


def test_keygen_fresh():
    a, b = keygen(), keygen()
    assert a != b and len(a.hex()) == 64


def test_seed_required():
    with pytest.raises(ConfigError):
        encrypt(np.zeros(160, dtype=np.int16))


def test_duration_and_determinism():
    x = testsignals.synthetic_speech(1.0, seed=2)
    a = encrypt(x, SEED)
    assert abs(a.samples.size / 16000 - 1.0) <= 0.025
    assert a.samples.dtype == np.int16
    np.testing.assert_array_equal(a.samples, encrypt(x, SEED).samples)
    assert not np.array_equal(a.samples, encrypt(x, OTHER).samples)


def test_spectral_occupancy(clean):
    y = clean.encrypted.samples.astype(float)
    P = np.abs(np.fft.rfft(y)) ** 2
    f = np.fft.rfftfreq(y.size, 1 / 16000)
    assert P[(f >= 300) & (f <= 6700)].sum() >= 0.99 * P.sum()
    assert clean.encrypted.report.clipped_samples == 0


def test_padding_restores_length():
    x = testsignals.synthetic_speech(0.5, seed=3)[:3001]
    enc = encrypt(x, SEED)
    assert enc.padding == 39 and enc.n_frames == 19
    dec = decrypt(enc.samples, SEED, n_frames=enc.n_frames, padding=enc.padding)
    assert dec.samples.size == 3001


def test_noiseless_round_trip_within_steps(clean):
    rep = clean.report
    assert rep.guard_errors == 0 and rep.energy_flips == 0 and rep.erased_frames == 0
    for e, d in zip(clean.encrypted.frames, clean.decrypted.frames):
        assert abs(int(np.clip(d.kappa_dec, CFG.kappa_low, CFG.kappa_high)) - e.kappa_init) <= 1
        assert abs(int(np.clip(d.rho_dec, CFG.rho_low, CFG.rho_high)) - e.rho_init) <= 1
    assert rep.rmse_timbre_dec < 1e-3


def test_wrong_seed_matches_random_key_baseline(speech, clean):
    dec = decrypt(clean.encrypted.samples, OTHER, n_frames=clean.encrypted.n_frames)
    rep = rmse_report(clean.encrypted.frames, clean.encrypted.params, dec)
    rng = np.random.default_rng(0)
    k0 = np.array([f.kappa_init for f in clean.encrypted.frames], float)
    # random-key baseline: deciphered index uniform on the ring, clamped to the guards
    base = [np.sqrt(np.mean((np.clip(rng.integers(0, 1 << 16, k0.size), CFG.kappa_low, CFG.kappa_high) - k0) ** 2)) for _ in range(2000)]
    lo, hi = np.percentile(base, [0.5, 99.5])
    assert lo <= rep.rmse_pitch_dec <= hi
    assert rep.rmse_pitch_dec > 100 * max(clean.report.rmse_pitch_dec, 1)


def test_report_matches_naive_oracle(clean, tmp_path):
    write_trace(tmp_path / "t.jsonl", clean.encrypted.trace)
    write_trace(tmp_path / "r.jsonl", clean.decrypted.trace)
    enc, rec = read_trace(tmp_path / "t.jsonl"), read_trace(tmp_path / "r.jsonl")
    pairs = [(naive_ring_error(r["rho_rec"], e["rho_enc"]), 0.0) for e, r in zip(enc, rec)]
    assert clean.report.rmse_energy_rec == pytest.approx(naive_rmse(pairs), rel=1e-9, abs=1e-12)
    pairs = [(naive_ring_error(r["kappa_rec"], e["kappa_enc"]), 0.0) for e, r in zip(enc, rec)]
    assert clean.report.rmse_pitch_rec == pytest.approx(naive_rmse(pairs), rel=1e-9, abs=1e-12)
    again = evaluate(enc, clean.received, SEED)
    assert again.as_dict() == pytest.approx(clean.report.as_dict())


def test_empty_input():
    enc = encrypt(np.zeros(0, dtype=np.int16), SEED)
    assert enc.n_frames == 0 and enc.samples.size == 0


def test_sweep_and_csv(speech, tmp_path):
    rows = sweep(speech[:8000], SEED, snr_db=(20.0, 5.0))
    assert [s for s, _ in rows] == [20.0, 5.0]
    assert rows[0][1].rmse_timbre_rec < rows[1][1].rmse_timbre_rec
    write_csv(tmp_path / "s.csv", rows)
    with open(tmp_path / "s.csv") as fh:
        r = list(csv.reader(fh))
    assert r[0][:3] == ["snr_db", "frames", "rmse_energy_rec"]
    assert len(r) == 3 and float(r[2][0]) == 5.0


def test_channel_from_config(speech):
    cfg = PipelineConfig(channel_kinds="gain", channel_gain_ratio=0.5)
    res = simulate(speech[:8000], SEED, cfg)
    assert float(np.mean(res.received.astype(float) ** 2)) == pytest.approx(0.25 * np.mean(res.encrypted.samples.astype(float) ** 2), rel=1e-2)
    spec = ChannelSpec(("awgn",), 30.0, seed=4)
    a = simulate(speech[:8000], SEED, spec=spec)
    b = simulate(speech[:8000], SEED, spec=spec)
    np.testing.assert_array_equal(a.received, b.received)
    assert math.isfinite(a.report.rmse_energy_rec)
