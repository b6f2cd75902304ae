"""Channel impairments applied to int16 PCM: noise, gain, timing offset, external codecs."""

from __future__ import annotations

import math
import shlex
import subprocess
import tempfile
from pathlib import Path

import numpy as np

from .errors import CodecFailure
from .wavio import read_wav, write_wav

INT16_MIN, INT16_MAX = -32768, 32767
SINC_TAPS = 32


def _to_int16(x: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(x), INT16_MIN, INT16_MAX).astype(np.int16)


def awgn(signal, snr_db: float, rng: np.random.Generator | int | None = None) -> np.ndarray:
    """Add white Gaussian noise at ``snr_db`` relative to the mean signal power.

    ``snr_db = inf`` returns the input unchanged.
    """
    x = np.asarray(signal)
    if x.size == 0:
        raise ValueError("signal must be nonempty")
    if math.isinf(snr_db) and snr_db > 0:
        return x.copy()
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    xf = x.astype(float)
    power = float(np.mean(xf**2))
    noise = rng.standard_normal(x.size) * math.sqrt(power / 10 ** (snr_db / 10))
    return _to_int16(xf + noise)


def gain_scale(signal, factor: float) -> np.ndarray:
    if factor <= 0:
        raise ValueError("gain factor must be positive")
    x = np.asarray(signal)
    if factor == 1:
        return x.copy()
    return _to_int16(x.astype(float) * factor)


def fractional_delay_kernel(frac: float, taps: int = SINC_TAPS) -> np.ndarray:
    """Blackman-windowed sinc delaying by ``frac`` samples (0 <= frac < 1)."""
    n = np.arange(taps) - (taps // 2 - 1)
    h = np.sinc(n - frac) * np.blackman(taps + 2)[1:-1]
    return h / h.sum()


def sample_offset(signal, offset_ms: float, rate: int = 16000) -> np.ndarray:
    """Delay (positive) or advance (negative) by ``offset_ms``, keeping the length.

    The integer part is a shift with zero fill; the fractional part uses a
    32-tap windowed-sinc interpolator.
    """
    if abs(offset_ms) >= 5.0:
        raise ValueError("offset must be below 5 ms")
    x = np.asarray(signal).astype(float)
    d = offset_ms * rate / 1000.0
    whole = math.floor(d)
    frac = d - whole
    if frac > 1 - 1e-9:
        whole, frac = whole + 1, 0.0
    if frac > 1e-9:
        h = fractional_delay_kernel(frac)
        lead = SINC_TAPS // 2 - 1
        y = np.convolve(x, h)[lead : lead + x.size]
    else:
        y = x
    out = np.zeros_like(y)
    if whole >= 0:
        out[whole:] = y[: y.size - whole]
    else:
        out[: y.size + whole] = y[-whole:]
    return _to_int16(out)


def external_codec(signal, command: str, rate: int = 16000, timeout: float = 120.0, frame: int = 320) -> np.ndarray:
    """Round-trip ``signal`` through an external encoder/decoder.

    ``command`` must contain ``{in}`` and ``{out}``; it is run with the input
    WAV and must write a WAV of the same rate whose length is within one
    frame of the input. The result is trimmed or zero-padded to the input
    length.
    """
    if "{in}" not in command or "{out}" not in command:
        raise CodecFailure("command template needs {in} and {out} placeholders")
    x = np.asarray(signal, dtype=np.int16)
    with tempfile.TemporaryDirectory() as tmp:
        src, dst = Path(tmp) / "in.wav", Path(tmp) / "out.wav"
        write_wav(src, x, rate)
        argv = [a.replace("{in}", str(src)).replace("{out}", str(dst)) for a in shlex.split(command)]
        try:
            proc = subprocess.run(argv, capture_output=True, timeout=timeout)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise CodecFailure(f"codec command failed: {exc}") from exc
        if proc.returncode != 0:
            raise CodecFailure(f"codec exited with {proc.returncode}: {proc.stderr.decode(errors='replace')[:200]}")
        try:
            y, r = read_wav(dst)
        except Exception as exc:
            raise CodecFailure(f"codec produced unreadable output: {exc}") from exc
    if r != rate:
        raise CodecFailure(f"codec changed the sample rate to {r}")
    if abs(y.size - x.size) > frame:
        raise CodecFailure(f"codec output length {y.size} differs from {x.size} by more than a frame")
    if y.size < x.size:
        y = np.concatenate([y, np.zeros(x.size - y.size, dtype=np.int16)])
    return y[: x.size].astype(np.int16)
