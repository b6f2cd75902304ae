"""Narrowband speech analysis into (energy, pitch, timbre) and a classical resynthesizer.

Analysis runs on 20 ms frames at 8 kHz. Each frame is described by a 40 ms
Hann window centred on it (10 ms look-back, 10 ms look-ahead) from which
nine mel band energies are measured on the pre-emphasized signal. Energies
are normalized as per-sample power, so a full-scale sine measures about
5e8 and is clamped to ``EPS_MAX``.

The resynthesizer stands in for a neural vocoder: a pulse train or white
noise drives an all-pole filter derived from the band energies.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct, idct, irfft, rfft
from scipy.signal import lfilter, lfiltic

FS = 8000
FRAME = 160
WINDOW = 320
LOOKBACK = 80
NFFT = 512
N_BANDS = 9
PREEMPH = 0.85
EPS_MIN, EPS_MAX = 10.0, 1e8
P_MIN, P_MAX = 16.0, 128.0
LPC_ORDER = 12
VOICING_THRESHOLD = 0.3
OCTAVE_RATIO = 0.85


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    rate: int

    def __post_init__(self):
        if self.rate not in (8000, 16000):
            raise ValueError("rate must be 8000 or 16000")
        s = np.asarray(self.samples)
        if s.dtype != np.int16:
            if not np.all(np.isfinite(s)):
                raise ValueError("samples must be finite")
            s = np.clip(np.rint(s), -32768, 32767).astype(np.int16)
        object.__setattr__(self, "samples", s)

    @property
    def duration(self) -> float:
        return self.samples.size / self.rate


@dataclass(frozen=True)
class VocalParams:
    """Per-frame energy, pitch period (samples at 8 kHz) and timbre on S^8.

    ``voiced`` is ``None`` when the value is unknown, e.g. after deciphering.
    """

    energy: float
    pitch: float
    timbre: np.ndarray
    voiced: bool | None = None

    def band_energies(self) -> np.ndarray:
        return self.energy * np.asarray(self.timbre) ** 2


@dataclass(frozen=True)
class FeatureVector:
    cepstra: np.ndarray
    rho: float


@dataclass(frozen=True)
class LpcState:
    """Predictor ``s~[n] = sum_k a[k-1] s[n-k]`` and its residual gain."""

    a: np.ndarray
    gain: float
    reflection: np.ndarray = field(default_factory=lambda: np.zeros(LPC_ORDER))


# --------------------------------------------------------------------------
# emphasis filters


def preemphasize(x, prev: float = 0.0, return_state: bool = False):
    """``y[n] = x[n] - 0.85 x[n-1]``; ``prev`` is the sample before ``x[0]``."""
    x = np.asarray(x, dtype=float)
    y = x.copy()
    if x.size:
        y[0] -= PREEMPH * prev
        y[1:] -= PREEMPH * x[:-1]
    if return_state:
        return y, (float(x[-1]) if x.size else prev)
    return y


def deemphasize(y, prev: float = 0.0, return_state: bool = False):
    """``x[n] = y[n] + 0.85 x[n-1]``; ``prev`` is the output before ``x[0]``."""
    y = np.asarray(y, dtype=float)
    x, zf = lfilter([1.0], [1.0, -PREEMPH], y, zi=[PREEMPH * prev])
    if return_state:
        return x, (float(x[-1]) if x.size else prev)
    return x


# --------------------------------------------------------------------------
# mel filterbank


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def band_centers(fs: int = FS) -> np.ndarray:
    """Centre frequencies (Hz), equally spaced in mel from 0 to Nyquist."""
    return mel_to_hz(np.linspace(0.0, hz_to_mel(fs / 2), N_BANDS))


def mel_filterbank(nfft: int = NFFT, fs: int = FS) -> np.ndarray:
    """``(9, nfft//2+1)`` triangular weights; the half filters at the edges have height 2."""
    c = band_centers(fs)
    f = np.arange(nfft // 2 + 1) * fs / nfft
    w = np.zeros((N_BANDS, f.size))
    for i in range(N_BANDS):
        if i > 0:
            rise = (f - c[i - 1]) / (c[i] - c[i - 1])
            sel = (f >= c[i - 1]) & (f <= c[i])
            w[i, sel] = rise[sel]
        if i < N_BANDS - 1:
            fall = (c[i + 1] - f) / (c[i + 1] - c[i])
            sel = (f >= c[i]) & (f <= c[i + 1])
            w[i, sel] = np.maximum(w[i, sel], fall[sel])
    w[0] *= 2.0
    w[-1] *= 2.0
    return w


_FILTERS = mel_filterbank()
_HANN = np.hanning(WINDOW + 2)[1:-1]


def write_filterbank_csv(path) -> None:
    """Dump band edges and centres so other implementations can compare."""
    c = band_centers()
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["band", "lower_hz", "center_hz", "upper_hz", "peak_gain"])
        for i in range(N_BANDS):
            lo = c[i - 1] if i > 0 else c[0]
            hi = c[i + 1] if i < N_BANDS - 1 else c[-1]
            wr.writerow([i + 1, f"{lo:.6f}", f"{c[i]:.6f}", f"{hi:.6f}", 2 if i in (0, N_BANDS - 1) else 1])


def power_spectrum(window) -> np.ndarray:
    """One-sided PSD whose sum is the window-compensated mean-square power."""
    x = np.asarray(window, dtype=float)
    if x.size != WINDOW:
        raise ValueError(f"expected {WINDOW} samples")
    X = rfft(x * _HANN, NFFT)
    p = np.abs(X) ** 2
    p[1:-1] *= 2.0
    return p / (NFFT * np.sum(_HANN**2))


def band_energies(window) -> np.ndarray:
    return _FILTERS @ power_spectrum(window)


# --------------------------------------------------------------------------
# pitch


@dataclass
class PitchHistory:
    previous: float | None = None
    voiced: bool = False


def normalized_correlation(x, lag_min: int = int(P_MIN), lag_max: int = int(P_MAX)) -> np.ndarray:
    """``r[tau]`` for ``tau`` in ``[lag_min, lag_max]`` over a fixed-length segment."""
    x = np.asarray(x, dtype=float)
    seg = x.size - lag_max
    if seg <= 0:
        raise ValueError("window too short for the lag range")
    a = x[:seg]
    ea = np.dot(a, a)
    out = np.zeros(lag_max - lag_min + 1)
    for i, tau in enumerate(range(lag_min, lag_max + 1)):
        b = x[tau : tau + seg]
        den = np.sqrt(ea * np.dot(b, b))
        out[i] = np.dot(a, b) / den if den > 0 else 0.0
    return out


def estimate_pitch_speech(window, history: PitchHistory | None = None) -> tuple[float, bool]:
    """Open-loop pitch period in samples and a voicing flag.

    Among local correlation peaks within 85% of the best one, a peak close
    to the previous voiced period wins; otherwise the shortest lag wins,
    which suppresses period doubling. Unvoiced frames repeat the previous
    period (``P_MAX`` at the start).
    """
    history = history if history is not None else PitchHistory()
    lo, hi = int(P_MIN), int(P_MAX)
    r = normalized_correlation(window, lo, hi)
    best = r.max()
    fallback = history.previous if history.previous is not None else P_MAX
    if best < VOICING_THRESHOLD:
        history.voiced = False
        return float(fallback), False
    interior = np.r_[False, (r[1:-1] >= r[:-2]) & (r[1:-1] >= r[2:]), False]
    interior[np.argmax(r)] = True
    cand = np.nonzero(interior & (r >= OCTAVE_RATIO * best))[0]
    pick = cand[0]
    if history.voiced and history.previous is not None:
        near = [c for c in cand if abs(c + lo - history.previous) <= 0.15 * history.previous]
        if near:
            pick = max(near, key=lambda c: r[c])
    frac = 0.0
    if 0 < pick < r.size - 1:
        den = r[pick - 1] - 2 * r[pick] + r[pick + 1]
        if den < 0:
            frac = 0.5 * (r[pick - 1] - r[pick + 1]) / den
    p = float(np.clip(pick + lo + frac, P_MIN, P_MAX))
    history.previous, history.voiced = p, True
    return p, True


# --------------------------------------------------------------------------
# frame encoding


def params_from_bands(E, pitch: float, voiced: bool | None = None) -> VocalParams:
    E = np.maximum(np.asarray(E, dtype=float), 0.0)
    total = float(E.sum())
    if total > 0:
        D = np.sqrt(E / total)
        D /= np.linalg.norm(D)
    else:
        D = np.full(N_BANDS, 1.0 / 3.0)
    eps = float(np.clip(total, EPS_MIN, EPS_MAX))
    return VocalParams(eps, float(np.clip(pitch, P_MIN, P_MAX)), D, voiced)


def encode_frame(emph_window, raw_window, history: PitchHistory | None = None) -> VocalParams:
    """Parameters of one frame from its pre-emphasized and raw 40 ms windows."""
    p, voiced = estimate_pitch_speech(raw_window, history)
    return params_from_bands(band_energies(emph_window), p, voiced)


def frame_windows(x: np.ndarray, n_frames: int) -> np.ndarray:
    pad = np.concatenate([np.zeros(LOOKBACK), x, np.zeros(WINDOW)])
    idx = np.arange(n_frames)[:, None] * FRAME + np.arange(WINDOW)[None, :]
    return pad[idx]


def encode_speech(samples) -> list[VocalParams]:
    """Encode an 8 kHz signal; the last partial frame is zero-padded."""
    x = np.asarray(samples, dtype=float)
    n = -(-x.size // FRAME)
    emph = frame_windows(preemphasize(x), n)
    raw = frame_windows(x, n)
    hist = PitchHistory()
    return [encode_frame(emph[i], raw[i], hist) for i in range(n)]


# --------------------------------------------------------------------------
# features


def features_from_params(v: VocalParams) -> FeatureVector:
    E = np.maximum(v.band_energies(), 1e-10)
    return FeatureVector(dct(np.log10(E), type=2, norm="ortho"), (v.pitch - 100.0) / 50.0)


def log_bands_from_features(f: FeatureVector) -> np.ndarray:
    return idct(np.asarray(f.cepstra, dtype=float), type=2, norm="ortho")


# --------------------------------------------------------------------------
# LPC


_AREAS = _FILTERS.sum(axis=1)
_LAG_WINDOW = np.exp(-0.5 * (2 * np.pi * 60.0 / FS * np.arange(LPC_ORDER + 1)) ** 2)


def levinson_durbin(r, order: int = LPC_ORDER):
    """Solve the normal equations for predictor ``a`` with ``s~[n] = sum a_k s[n-k]``.

    Returns ``(a, k, err)`` with reflection coefficients ``k`` and the final
    prediction error power.
    """
    r = np.asarray(r, dtype=float)
    a = np.zeros(order)
    k = np.zeros(order)
    err = r[0]
    for i in range(order):
        if err <= 0:
            break
        acc = r[i + 1] - np.dot(a[:i], r[i:0:-1])
        ki = acc / err
        k[i] = ki
        a_prev = a[:i].copy()
        a[i] = ki
        a[:i] = a_prev - ki * a_prev[::-1]
        err *= 1.0 - ki * ki
    return a, k, err


def band_psd(E) -> np.ndarray:
    """Linear-frequency PSD (257 bins) interpolated from band densities."""
    density = np.asarray(E, dtype=float) / _AREAS
    f = np.arange(NFFT // 2 + 1) * FS / NFFT
    return np.interp(f, band_centers(), density)


def lpc_from_bands(E, order: int = LPC_ORDER, floor: float = 1e-10) -> LpcState:
    E = np.asarray(E, dtype=float)
    if np.all(E < floor):
        return LpcState(np.zeros(order), float(np.sqrt(EPS_MIN)), np.zeros(order))
    r = irfft(band_psd(E), NFFT)[: order + 1] * _LAG_WINDOW[: order + 1]
    r[0] *= 1.0 + 1e-4
    a, k, err = levinson_durbin(r, order)
    return LpcState(a, float(np.sqrt(max(err, 0.0) / r[0])), k)


# --------------------------------------------------------------------------
# synthesis


def guess_voicing(v: VocalParams) -> bool:
    """Voiced when at least half of the energy sits in the four lowest bands."""
    if v.voiced is not None:
        return bool(v.voiced)
    d2 = np.asarray(v.timbre) ** 2
    return bool(d2[:4].sum() >= 0.5 * d2.sum())


def _frame_gain(zir: np.ndarray, zsr: np.ndarray, target: float) -> tuple[float, float]:
    """Gains ``(g_state, g_exc)`` so that ``mean((g_state zir + g_exc zsr)^2) = target``."""
    n = zir.size
    a = np.dot(zsr, zsr)
    b = 2 * np.dot(zir, zsr)
    c = np.dot(zir, zir) - n * target
    if a > 0:
        disc = b * b - 4 * a * c
        if disc >= 0:
            g = (-b + np.sqrt(disc)) / (2 * a)
            if g >= 0:
                return 1.0, g
    tot = zir if a == 0 else zir + zsr
    e = np.dot(tot, tot)
    if e <= 0:
        return 0.0, 0.0
    s = np.sqrt(n * target / e)
    return s, (0.0 if a == 0 else s)


def synthesize_speech(params, seed: int = 0) -> np.ndarray:
    """Render a parameter stream to 8 kHz int16 PCM.

    Frame ``l`` produces samples ``160 l .. 160 l + 159``. The all-pole
    filter runs continuously; each frame's excitation gain is solved so the
    pre-emphasized output has mean-square power equal to the frame energy.
    """
    rng = np.random.default_rng(seed)
    out = np.zeros(len(params) * FRAME)
    hist = np.zeros(LPC_ORDER)  # most recent output first
    phase = 0.0
    for l, v in enumerate(params):
        lpc = lpc_from_bands(v.band_energies())
        den = np.r_[1.0, -lpc.a]
        if guess_voicing(v):
            exc = np.zeros(FRAME)
            period = float(v.pitch)
            t = phase
            while t < FRAME:
                exc[int(t)] = np.sqrt(period)
                t += period
            phase = t - FRAME
        else:
            exc = rng.standard_normal(FRAME)
            phase = 0.0
        zi = lfiltic([1.0], den, hist)
        zir, _ = lfilter([1.0], den, np.zeros(FRAME), zi=zi)
        zsr = lfilter([1.0], den, exc)
        gs, ge = _frame_gain(zir, zsr, v.energy)
        y = gs * zir + ge * zsr
        out[l * FRAME : (l + 1) * FRAME] = y
        hist = y[::-1][:LPC_ORDER].copy()
    speech = deemphasize(out)
    return np.clip(np.rint(speech), -32768, 32767).astype(np.int16)

