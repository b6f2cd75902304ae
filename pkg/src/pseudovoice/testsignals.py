"""Synthetic 8 kHz test signals.

``synthetic_speech`` imitates running speech: voiced vowels from a glottal
pulse train through time-varying formant resonators with gliding pitch,
fricatives from shaped noise, and pauses that leave only a background noise
floor. It stands in for a recorded corpus.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import butter, lfilter

FS = 8000
BLOCK = 80

# (F1, F2, F3) in Hz for a handful of vowels
VOWELS = (
    (730, 1090, 2440),
    (270, 2290, 3010),
    (530, 1840, 2480),
    (570, 840, 2410),
    (300, 870, 2240),
    (660, 1720, 2410),
    (440, 1020, 2240),
)
BANDWIDTHS = (80.0, 110.0, 160.0)


def _resonator(f: float, bw: float):
    r = np.exp(-np.pi * bw / FS)
    th = 2 * np.pi * f / FS
    a = np.array([1.0, -2 * r * np.cos(th), r * r])
    return np.array([a.sum()]), a


def pulse_train(f0: float = 100.0, duration_s: float = 1.0, amplitude: float = 8000.0) -> np.ndarray:
    n = int(round(duration_s * FS))
    x = np.zeros(n)
    x[:: int(round(FS / f0))] = amplitude
    return np.rint(x).astype(np.int16)


def sawtooth(f0: float = 250.0, duration_s: float = 1.0, amplitude: float = 8000.0) -> np.ndarray:
    t = np.arange(int(round(duration_s * FS))) / FS
    x = amplitude * (2 * ((t * f0) % 1.0) - 1)
    return np.rint(x).astype(np.int16)


def _segments(rng: np.random.Generator, n: int):
    """Yield ``(kind, length)`` covering ``n`` samples."""
    pos = 0
    while pos < n:
        u = rng.random()
        if u < 0.6:
            kind, lo, hi = "voiced", 0.12, 0.45
        elif u < 0.8:
            kind, lo, hi = "fricative", 0.06, 0.18
        else:
            kind, lo, hi = "pause", 0.08, 0.35
        m = min(int(rng.uniform(lo, hi) * FS), n - pos)
        yield kind, m
        pos += m


def _envelope(m: int) -> np.ndarray:
    ramp = min(m // 4, 160)
    env = np.ones(m)
    if ramp:
        r = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        env[:ramp] = r
        env[m - ramp :] = r[::-1]
    return env


def _voiced(rng: np.random.Generator, m: int, phase: float) -> tuple[np.ndarray, float]:
    f_start, f_end = rng.uniform(85, 240, size=2)
    f0 = np.linspace(f_start, f_end, m) * (1 + 0.01 * rng.standard_normal(m).cumsum() / np.sqrt(m))
    f0 = np.clip(f0, 70, 400)
    src = np.zeros(m)
    ph = phase + np.cumsum(f0 / FS)
    ticks = np.nonzero(np.diff(np.floor(ph), prepend=np.floor(phase)))[0]
    src[ticks] = 1.0
    # glottal shaping: two-pole lowpass
    src = lfilter([1.0], [1.0, -1.6, 0.64], src)
    v0, v1 = rng.choice(len(VOWELS), size=2)
    out = np.zeros(m)
    zis = [np.zeros(2) for _ in BANDWIDTHS]
    for s in range(0, m, BLOCK):
        e = min(s + BLOCK, m)
        w = s / max(m - 1, 1)
        y = src[s:e]
        for j, bw in enumerate(BANDWIDTHS):
            f = (1 - w) * VOWELS[v0][j] + w * VOWELS[v1][j]
            b, a = _resonator(f, bw)
            y, zis[j] = lfilter(b, a, y, zi=zis[j])
        out[s:e] = y
    out /= np.sqrt(np.mean(out**2)) + 1e-12
    return out, float(ph[-1] % 1.0)


def _fricative(rng: np.random.Generator, m: int) -> np.ndarray:
    lo = rng.uniform(1800, 3000)
    b, a = butter(4, [lo / (FS / 2), 0.95], btype="band")
    y = lfilter(b, a, rng.standard_normal(m))
    return y / (np.sqrt(np.mean(y**2)) + 1e-12)


def synthetic_speech(duration_s: float = 10.0, seed: int = 0, noise_floor_rms: float = 40.0, level_rms: float = 3000.0) -> np.ndarray:
    """Speech-like int16 signal with a stationary background noise floor."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * FS))
    x = np.zeros(n)
    pos, phase = 0, 0.0
    for kind, m in _segments(rng, n):
        if kind == "voiced":
            seg, phase = _voiced(rng, m, phase)
            seg *= level_rms * rng.uniform(0.4, 1.6)
        elif kind == "fricative":
            seg = _fricative(rng, m) * level_rms * rng.uniform(0.1, 0.4)
        else:
            seg = np.zeros(m)
        x[pos : pos + m] = seg * _envelope(m)
        pos += m
    x += noise_floor_rms * rng.standard_normal(n)
    return np.clip(np.rint(x), -32768, 32767).astype(np.int16)
