"""End-to-end encrypt / channel / decrypt and error accounting.

The keystream, the channel noise and the speech synthesizer each have their
own seed; sweeping a channel parameter reuses the same channel seed at every
level so that levels differ only in the impairment strength.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import channel as ch
from .cipher import RING, CipherConfig, DecipheredFrame, EncipheredFrame, PseudoParams, decipher_frame, encipher_frame
from .config import ChannelSpec, PipelineConfig
from .errors import ConfigError, EntropyUnavailable
from .keystream import SEED_BYTES, FrameRandoms, Seed, new_generator, next_frame_randoms
from .pseudospeech import BANK, FS as PSEUDO_FS, PinvTable, SynthesisReport, analyze_pseudospeech, synthesize_pseudospeech
from .speech_codec import FRAME, FS as SPEECH_FS, VocalParams, encode_speech, synthesize_speech

GUARD_ERROR = 1 << 13
FLIP_ERROR = 1 << 15


def keygen() -> Seed:
    try:
        return Seed(os.urandom(SEED_BYTES))
    except NotImplementedError as exc:
        raise EntropyUnavailable("no OS entropy source available") from exc


def _seed(cfg: PipelineConfig, seed) -> Seed:
    if seed is None:
        if not cfg.seed_hex:
            raise ConfigError("a keystream seed is required")
        return Seed.from_hex(cfg.seed_hex)
    if isinstance(seed, Seed):
        return seed
    if isinstance(seed, str):
        return Seed.from_hex(seed)
    return Seed(bytes(seed))


def _randoms(seed: Seed, n: int) -> list[FrameRandoms]:
    g = new_generator(seed)
    return [next_frame_randoms(g) for _ in range(n)]


def _table(cfg: PipelineConfig) -> PinvTable | None:
    if cfg.pinv_table_size_count <= 0:
        return None
    return PinvTable(cfg.pinv_table_size_count, cfg.cipher, BANK, cfg.amplitude_method)


def pad_to_frames(samples) -> tuple[np.ndarray, int]:
    x = np.asarray(samples, dtype=np.int16)
    pad = (-x.size) % FRAME
    return np.concatenate([x, np.zeros(pad, dtype=np.int16)]), pad


# --------------------------------------------------------------------------
# trace records


def encipher_record(t: int, v: VocalParams, e: EncipheredFrame) -> dict:
    return {
        "frame": t,
        "energy": float(v.energy),
        "pitch": float(v.pitch),
        "timbre": [float(a) for a in v.timbre],
        "kappa_init": int(e.kappa_init),
        "kappa_enc": int(e.kappa_enc),
        "rho_init": int(e.rho_init),
        "rho_enc": int(e.rho_enc),
        "chi_init": [int(a) for a in e.chi_init],
        "chi_enc": [int(a) for a in e.chi_enc],
        "pseudo_energy": float(e.pseudo.energy),
        "pseudo_pitch": float(e.pseudo.pitch),
        "dtilde": [float(a) for a in e.pseudo.timbre],
    }


def decipher_record(t: int, r: PseudoParams, d: DecipheredFrame, erased: bool) -> dict:
    return {
        "frame": t,
        "erased": bool(erased),
        "pseudo_energy": float(r.energy),
        "pseudo_pitch": float(r.pitch),
        "dtilde": [float(a) for a in r.timbre],
        "kappa_rec": float(d.kappa_rec),
        "kappa_dec": float(d.kappa_dec),
        "rho_rec": float(d.rho_rec),
        "rho_dec": float(d.rho_dec),
        "energy": float(d.params.energy),
        "pitch": float(d.params.pitch),
        "timbre": [float(a) for a in d.params.timbre],
    }


def write_trace(path, records) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r) + "\n")


def read_trace(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


# --------------------------------------------------------------------------
# encrypt / decrypt


@dataclass
class EncryptResult:
    samples: np.ndarray
    n_frames: int
    padding: int
    frames: list
    params: list
    trace: list = field(default_factory=list)
    report: SynthesisReport | None = None


@dataclass
class DecryptResult:
    samples: np.ndarray
    n_frames: int
    frames: list
    received: list
    erased: list
    trace: list = field(default_factory=list)


def encrypt(speech, seed=None, cfg: PipelineConfig = PipelineConfig()) -> EncryptResult:
    """8 kHz int16 speech to 16 kHz int16 pseudo-speech."""
    x, pad = pad_to_frames(speech)
    params = encode_speech(x)
    nus = _randoms(_seed(cfg, seed), len(params))
    ccfg = cfg.cipher
    frames = [encipher_frame(v, nu, ccfg) for v, nu in zip(params, nus)]
    report = SynthesisReport()
    y = synthesize_pseudospeech([f.pseudo for f in frames], BANK, _table(cfg), report, cfg.amplitude_method)
    trace = [encipher_record(t, v, f) for t, (v, f) in enumerate(zip(params, frames))]
    return EncryptResult(y, len(params), pad, frames, params, trace, report)


def decrypt(pseudo, seed=None, cfg: PipelineConfig = PipelineConfig(), n_frames: int | None = None, padding: int = 0) -> DecryptResult:
    """16 kHz pseudo-speech back to 8 kHz speech."""
    received, _, erased = analyze_pseudospeech(pseudo, n_frames, BANK, cfg.cipher, cfg.pitch_candidates_count)
    nus = _randoms(_seed(cfg, seed), len(received))
    ccfg = cfg.cipher
    frames = [decipher_frame(r, nu, ccfg) for r, nu in zip(received, nus)]
    out = synthesize_speech([f.params for f in frames], cfg.synth_seed_int)
    if padding:
        out = out[: out.size - padding]
    trace = [decipher_record(t, r, d, e) for t, (r, d, e) in enumerate(zip(received, frames, erased))]
    return DecryptResult(out, len(received), frames, received, erased, trace)


def apply_channel(signal, spec: ChannelSpec, rate: int = PSEUDO_FS) -> np.ndarray:
    y = np.asarray(signal, dtype=np.int16)
    rng = np.random.default_rng(spec.seed)
    for kind in spec.kinds:
        if kind == "awgn":
            y = ch.awgn(y, spec.snr_db, rng)
        elif kind == "gain":
            y = ch.gain_scale(y, spec.gain_ratio)
        elif kind == "offset":
            y = ch.sample_offset(y, spec.offset_ms, rate)
        elif kind == "codec":
            y = ch.external_codec(y, spec.codec_cmd, rate)
    return y


# --------------------------------------------------------------------------
# error accounting


def _ring_diff(a, b) -> np.ndarray:
    d = (np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % RING
    return np.where(d >= RING / 2, d - RING, d)


def _rms(v) -> float:
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(np.mean(v**2))) if v.size else 0.0


@dataclass
class RmseReport:
    frames: int
    rmse_energy_rec: float
    rmse_energy_dec: float
    rmse_pitch_rec: float
    rmse_pitch_dec: float
    rmse_timbre_rec: float
    rmse_timbre_dec: float
    guard_errors: int
    energy_flips: int
    pitch_gross_errors: int
    erased_frames: int

    def as_dict(self) -> dict:
        return asdict(self)


def rmse_report(enc_frames: list[EncipheredFrame], enc_params: list[VocalParams], dec: DecryptResult, cfg: CipherConfig = CipherConfig()) -> RmseReport:
    """Frame-level errors, received (``rec``) against transmitted and deciphered (``dec``) against plaintext.

    Energy and pitch errors are in quantizer steps; timbre errors are
    Euclidean. Guard errors count frames whose received index moved by at
    least ``2**13`` steps; flips count deciphered energies off by more than
    half the ring; gross pitch errors exceed one sample of pseudo pitch.
    """
    L = min(len(enc_frames), len(dec.frames))
    ef, df, rp = enc_frames[:L], dec.frames[:L], dec.received[:L]
    r_enc = np.array([f.rho_enc for f in ef], dtype=float)
    k_enc = np.array([f.kappa_enc for f in ef], dtype=float)
    r_rec = np.array([d.rho_rec for d in df])
    k_rec = np.array([d.kappa_rec for d in df])
    r0 = np.array([f.rho_init for f in ef], dtype=float)
    k0 = np.array([f.kappa_init for f in ef], dtype=float)
    r_dec = np.array([np.clip(d.rho_dec, cfg.rho_low, cfg.rho_high) for d in df])
    k_dec = np.array([np.clip(d.kappa_dec, cfg.kappa_low, cfg.kappa_high) for d in df])
    dt = np.array([np.linalg.norm(np.asarray(f.pseudo.timbre) - np.asarray(r.timbre)) for f, r in zip(ef, rp)])
    dd = np.array([np.linalg.norm(np.asarray(v.timbre) - np.asarray(d.params.timbre)) for v, d in zip(enc_params, df)])
    pp = np.array([abs(f.pseudo.pitch - r.pitch) for f, r in zip(ef, rp)])
    er = _ring_diff(r_rec, r_enc)
    kr = _ring_diff(k_rec, k_enc)
    return RmseReport(
        frames=L,
        rmse_energy_rec=_rms(er),
        rmse_energy_dec=_rms(r_dec - r0),
        rmse_pitch_rec=_rms(kr),
        rmse_pitch_dec=_rms(k_dec - k0),
        rmse_timbre_rec=_rms(dt),
        rmse_timbre_dec=_rms(dd),
        guard_errors=int(np.sum((np.abs(er) >= GUARD_ERROR) | (np.abs(kr) >= GUARD_ERROR))),
        energy_flips=int(np.sum(np.abs(r_dec - r0) > FLIP_ERROR)),
        pitch_gross_errors=int(np.sum(pp > 1.0)),
        erased_frames=int(sum(dec.erased[:L])),
    )


@dataclass
class SimulationResult:
    encrypted: EncryptResult
    received: np.ndarray
    decrypted: DecryptResult
    report: RmseReport


def simulate(speech, seed=None, cfg: PipelineConfig = PipelineConfig(), spec: ChannelSpec | None = None) -> SimulationResult:
    spec = cfg.channel if spec is None else spec
    s = _seed(cfg, seed)
    enc = encrypt(speech, s, cfg)
    rx = apply_channel(enc.samples, spec)
    dec = decrypt(rx, s, cfg, enc.n_frames, enc.padding)
    return SimulationResult(enc, rx, dec, rmse_report(enc.frames, enc.params, dec, cfg.cipher))


def evaluate(trace: list[dict], pseudo, seed=None, cfg: PipelineConfig = PipelineConfig(), padding: int = 0) -> RmseReport:
    """Score received pseudo-speech against an encrypt-side trace."""
    frames, params = [], []
    for r in trace:
        pseudo_p = PseudoParams(r["pseudo_energy"], r["pseudo_pitch"], np.asarray(r["dtilde"]))
        frames.append(
            EncipheredFrame(pseudo_p, r["kappa_init"], r["kappa_enc"], r["rho_init"], r["rho_enc"], np.asarray(r["chi_init"]), np.asarray(r["chi_enc"]))
        )
        params.append(VocalParams(r["energy"], r["pitch"], np.asarray(r["timbre"])))
    dec = decrypt(pseudo, seed, cfg, len(trace), padding)
    return rmse_report(frames, params, dec, cfg.cipher)


def sweep(speech, seed=None, cfg: PipelineConfig = PipelineConfig(), snr_db=(), spec: ChannelSpec | None = None) -> list[tuple[float, RmseReport]]:
    """AWGN sweep; every level draws noise from the same channel seed."""
    base = cfg.channel if spec is None else spec
    kinds = base.kinds if "awgn" in base.kinds else base.kinds + ("awgn",)
    s = _seed(cfg, seed)
    enc = encrypt(speech, s, cfg)
    out = []
    for snr in snr_db:
        lvl = ChannelSpec(kinds, float(snr), base.gain_ratio, base.offset_ms, base.codec_cmd, base.seed)
        rx = apply_channel(enc.samples, lvl)
        dec = decrypt(rx, s, cfg, enc.n_frames, enc.padding)
        out.append((float(snr), rmse_report(enc.frames, enc.params, dec, cfg.cipher)))
    return out


def write_csv(path, rows: list[tuple[float, RmseReport]]) -> None:
    names = list(RmseReport.__dataclass_fields__)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["snr_db"] + names)
        for snr, rep in rows:
            d = rep.as_dict()
            w.writerow(["inf" if math.isinf(snr) else snr] + [d[n] for n in names])


__all__ = [
    "EncryptResult",
    "DecryptResult",
    "RmseReport",
    "SimulationResult",
    "apply_channel",
    "decrypt",
    "encrypt",
    "evaluate",
    "keygen",
    "pad_to_frames",
    "read_trace",
    "rmse_report",
    "simulate",
    "sweep",
    "write_csv",
    "write_trace",
    "SPEECH_FS",
    "PSEUDO_FS",
]
