"""Pseudo-speech modem: harmonic 16 kHz frames carrying enciphered parameters.

A frame is 400 samples. Samples 80..319 (the payload) carry the parameters;
the first and last 80 samples are guard periods that overlap neighbouring
frames under a trapezoidal window, so frame ``t`` starts at sample ``320 t``.

The timbre vector is written into 16 square spectral windows of 400 Hz
between 300 and 6700 Hz. Harmonic amplitudes satisfy the window sums of
the real payload's spectrum exactly, mirrored negative-frequency term
included. Among all such solutions the default (``method="confined"``)
minimizes the energy leaking outside 300-6700 Hz plus a small norm penalty;
``method="real"`` takes the plain minimum-norm solution and
``method="complex"`` solves the complex system ``H B A = D ⊙ W16`` that
ignores the mirror term. Pitch is the harmonic spacing and energy is the
payload sum of squares.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize_scalar

from .cipher import XI, CipherConfig, PseudoParams
from .errors import DegenerateFrame, IllConditioned
from .sphere_maps import torus_project

FS = 16000
FRAME = 400
GUARD = 80
PAYLOAD = 240
HOP = FRAME - GUARD
N_WINDOWS = 16
BAND_LOW, BAND_HIGH, BAND_WIDTH = 300.0, 6700.0, 400.0
FULL_SCALE = 32767
HEADROOM = 0.89
PITCH_CANDIDATES = 1 << 14
OCTAVE_RATIO = 0.85


@dataclass(frozen=True)
class WindowBank:
    """Square spectral windows on the 240-point DFT grid and the phase vector."""

    H: np.ndarray
    W16: np.ndarray
    bins: tuple

    @property
    def support(self) -> np.ndarray:
        return np.nonzero(self.H.any(axis=0))[0]


def window_index(freq: float) -> int:
    """Window number 1..16 owning ``freq`` (Hz), 0 outside 300-6700 Hz."""
    if not BAND_LOW <= freq < BAND_HIGH:
        return 0
    return int((freq - BAND_LOW) // BAND_WIDTH) + 1


def build_window_bank() -> WindowBank:
    H = np.zeros((N_WINDOWS, PAYLOAD))
    for n in range(PAYLOAD):
        k = window_index(n * FS / PAYLOAD)
        if k:
            H[k - 1, n] = 1.0
    W16 = np.exp(2j * np.pi * np.arange(1, N_WINDOWS + 1) / N_WINDOWS)
    bins = tuple(tuple(np.nonzero(row)[0]) for row in H)
    H.setflags(write=False)
    W16.setflags(write=False)
    return WindowBank(H, W16, bins)


BANK = build_window_bank()


def harmonic_count(omega0: float) -> int:
    """Number of harmonics strictly below 6700 Hz."""
    f0 = omega0 / (2 * np.pi)
    # the tolerance keeps a harmonic landing exactly on 6700 Hz out
    return int(np.ceil(BAND_HIGH / f0 - 1e-9) - 1)


def harmonic_dft(omega0: float, K: int) -> np.ndarray:
    """``240 x K`` matrix whose column ``k`` is the DFT of ``exp(j k w0 n / fs)``."""
    n = np.arange(PAYLOAD)
    k = np.arange(1, K + 1)
    return np.fft.fft(np.exp(1j * np.outer(n, k) * omega0 / FS), axis=0)


def system_matrix(omega0: float, bank: WindowBank = BANK) -> np.ndarray:
    """``H B`` for the harmonics of ``omega0``."""
    return bank.H @ harmonic_dft(omega0, harmonic_count(omega0))


def real_system_matrix(omega0: float, bank: WindowBank = BANK) -> np.ndarray:
    """Real ``32 x 2K`` map from ``[Re A, Im A]`` to ``[Re, Im]`` of ``2 H Y`` for ``y = Re z``.

    The DFT of a real frame holds both ``Z_n`` and the mirrored conjugate
    ``conj(Z_{-n})``; including the mirror term makes the window sums exact.
    """
    B = harmonic_dft(omega0, harmonic_count(omega0))
    M = bank.H @ B
    N = np.conj(bank.H @ B[(-np.arange(PAYLOAD)) % PAYLOAD])
    P, Q = M + N, M - N
    return np.block([[P.real, -Q.imag], [P.imag, Q.real]])


METHODS = ("confined", "real", "complex")
DEFAULT_METHOD = "confined"
LEAKAGE_RIDGE = 1e-2

_FREQS = np.abs(np.fft.fftfreq(PAYLOAD, 1.0 / FS))
_OUT_OF_BAND = np.fft.fft(np.eye(PAYLOAD), axis=0)[(_FREQS < BAND_LOW) | (_FREQS > BAND_HIGH)]


def _payload_design(omega0: float, K: int) -> np.ndarray:
    """Real ``240 x 2K`` map from ``[Re A, Im A]`` to the payload samples."""
    ang = np.outer(np.arange(PAYLOAD), np.arange(1, K + 1)) * omega0 / FS
    return np.hstack([np.cos(ang), -np.sin(ang)])


def _pinv(omega0: float, bank: WindowBank, method: str = DEFAULT_METHOD) -> np.ndarray:
    """Right inverse of the window-sum system for ``method``."""
    if method == "complex":
        M = system_matrix(omega0, bank)
    elif method in ("real", "confined"):
        M = real_system_matrix(omega0, bank)
    else:
        raise ValueError(f"method must be one of {METHODS}")
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] <= 1e-10 * s[0]:
        raise IllConditioned(f"system has rank < {M.shape[0]} at omega0 = {omega0}")
    if method != "confined":
        return np.linalg.pinv(M)
    # minimize x^T G x subject to M x = t
    A = _payload_design(omega0, harmonic_count(omega0))
    FA = _OUT_OF_BAND @ A
    G = (FA.conj().T @ FA).real + LEAKAGE_RIDGE * (A.T @ A)
    GiMt = np.linalg.solve(G, M.T)
    return GiMt @ np.linalg.inv(M @ GiMt)


class PinvTable:
    """Pseudo-inverses precomputed on a uniform grid of pitch periods.

    Synthesis with a table uses the pseudo-inverse of the nearest grid
    point while the waveform itself keeps the exact fundamental.
    """

    def __init__(self, size: int = 1 << 12, cfg: CipherConfig = CipherConfig(), bank: WindowBank = BANK, method: str = DEFAULT_METHOD):
        self.periods = np.linspace(cfg.pseudo_p_min, cfg.pseudo_p_max, size)
        self.bank = bank
        self.method = method
        self._cache: dict[int, np.ndarray] = {}

    def lookup(self, omega0: float) -> tuple[float, np.ndarray]:
        p = 2 * np.pi * FS / omega0
        i = int(np.argmin(np.abs(self.periods - p)))
        if i not in self._cache:
            self._cache[i] = _pinv(2 * np.pi * FS / self.periods[i], self.bank, self.method)
        return 2 * np.pi * FS / self.periods[i], self._cache[i]


def solve_amplitudes(dtilde, omega0: float, bank: WindowBank = BANK, table: PinvTable | None = None, method: str = DEFAULT_METHOD) -> np.ndarray:
    """Minimum-norm complex harmonic amplitudes for the target ``D ⊙ W16``.

    See the module docstring for the methods. With a ``table`` its method
    wins and the result has the grid point's harmonic count.
    """
    target = np.asarray(dtilde, dtype=float) * bank.W16
    if table is not None:
        method, pinv = table.method, table.lookup(omega0)[1]
    else:
        pinv = _pinv(omega0, bank, method)
    if method == "complex":
        return pinv @ target
    x = pinv @ np.concatenate([target.real, target.imag])
    K = x.size // 2
    return x[:K] + 1j * x[K:]


def amplitude_residual(amps, dtilde, omega0: float, bank: WindowBank = BANK, method: str = DEFAULT_METHOD) -> float:
    """Residual of the linear system solved by :func:`solve_amplitudes`."""
    target = np.asarray(dtilde) * bank.W16
    if method == "complex":
        M = bank.H @ harmonic_dft(omega0, len(amps))
        return float(np.linalg.norm(M @ amps - target))
    y = harmonic_waveform(amps, omega0, np.arange(GUARD, GUARD + PAYLOAD))
    return float(np.linalg.norm(2 * (bank.H @ np.fft.fft(y)) - target))


def trapezoid() -> np.ndarray:
    w = np.ones(FRAME)
    ramp = (np.arange(GUARD) + 0.5) / GUARD
    w[:GUARD] = ramp
    w[-GUARD:] = ramp[::-1]
    return w


_TRAPEZOID = trapezoid()


@dataclass(frozen=True)
class SynthFrame:
    samples: np.ndarray  # 400 unwindowed samples
    eta: float
    omega0: float
    amplitudes: np.ndarray


def harmonic_waveform(amps, omega0: float, n: np.ndarray) -> np.ndarray:
    """``Re sum_k A_k exp(j k w0 (n - 80) / fs)``."""
    k = np.arange(1, len(amps) + 1)
    return np.real(np.exp(1j * np.outer(n - GUARD, k) * omega0 / FS) @ amps)


def _frame_eta(amps, omega0: float, energy: float) -> float:
    y = harmonic_waveform(amps, omega0, np.arange(GUARD, GUARD + PAYLOAD))
    return float(np.sqrt(energy / np.dot(y, y)))


def _reduce_peaks(amps, dtilde, omega0, energy, limit, bank, method, iterations):
    """Lower the windowed peak by alternating clipping and re-solving the constraint.

    Each pass clips the waveform, fits harmonics to the clipped frame and
    adds back the minimum-norm correction that restores the window sums,
    so the encoded timbre stays exact.
    """
    if method == "complex":
        return amps
    pinv = _pinv(omega0, bank, method)
    M = real_system_matrix(omega0, bank)
    target = np.asarray(dtilde, dtype=float) * bank.W16
    t = np.concatenate([target.real, target.imag])
    n = np.arange(FRAME)
    K = len(amps)
    ang = np.outer(n - GUARD, np.arange(1, K + 1)) * omega0 / FS
    A = np.hstack([np.cos(ang), -np.sin(ang)])
    bound = 0.7 * limit / _TRAPEZOID
    x = np.concatenate([amps.real, amps.imag])
    for _ in range(iterations):
        eta = _frame_eta(x[:K] + 1j * x[K:], omega0, energy)
        y = eta * (A @ x)
        if np.all(np.abs(y) <= limit / _TRAPEZOID):
            break
        yc = np.clip(y, -bound, bound) / eta
        xc, *_ = np.linalg.lstsq(A, yc, rcond=None)
        x = xc + pinv @ (t - M @ xc)
    return x[:K] + 1j * x[K:]


def synth_frame(
    pp: PseudoParams,
    bank: WindowBank = BANK,
    table: PinvTable | None = None,
    method: str = DEFAULT_METHOD,
    peak_limit: float | None = HEADROOM * FULL_SCALE,
    iterations: int = 60,
) -> SynthFrame:
    """One unwindowed 400-sample frame with payload energy exactly ``pp.energy``.

    When the trapezoid-windowed frame would exceed ``peak_limit`` the
    amplitudes are moved within the solution set of the timbre constraint
    to lower the peak.
    """
    omega0 = 2 * np.pi * FS / pp.pitch
    amps = solve_amplitudes(pp.timbre, omega0, bank, table, method)
    if peak_limit is not None:
        eta = _frame_eta(amps, omega0, pp.energy)
        y = eta * harmonic_waveform(amps, omega0, np.arange(FRAME))
        if np.max(np.abs(y * _TRAPEZOID)) > peak_limit:
            amps = _reduce_peaks(amps, pp.timbre, omega0, pp.energy, peak_limit, bank, method, iterations)
    eta = _frame_eta(amps, omega0, pp.energy)
    return SynthFrame(eta * harmonic_waveform(amps, omega0, np.arange(FRAME)), eta, omega0, amps)


def signal_length(n_frames: int) -> int:
    return HOP * n_frames + GUARD if n_frames else 0


def frame_slice(t: int) -> slice:
    return slice(HOP * t, HOP * t + FRAME)


def payload_slice(t: int) -> slice:
    return slice(HOP * t + GUARD, HOP * t + GUARD + PAYLOAD)


def match_energy_int(x: np.ndarray, target: float) -> np.ndarray:
    """Adjust integer samples so ``sum(x^2)`` lands as close to ``target`` as possible.

    A uniform rescale removes most of the gap; the rest is closed by moving
    distinct samples one step each, largest magnitudes first. A step changes
    the energy by ``2|x_i| + 1`` (growing) or ``2|x_i| - 1`` (shrinking).
    """
    lim = int(round(HEADROOM * FULL_SCALE))
    x = x.astype(np.int64).copy()
    e = float(np.dot(x, x))
    if e > 0 and abs(target - e) > 2 * np.abs(x).max() + 1:
        x = np.clip(np.rint(x * np.sqrt(target / e)), -lim, lim).astype(np.int64)
    for _ in range(8):
        diff = target - float(np.dot(x, x))
        moved = False
        for i in np.argsort(-np.abs(x), kind="stable"):
            a = abs(int(x[i]))
            if diff > 0 and 2 * a + 1 <= 2 * diff and a < lim:
                x[i] += 1 if x[i] >= 0 else -1
                diff -= 2 * a + 1
                moved = True
            elif diff < 0 and a > 0 and 2 * a - 1 <= -2 * diff:
                x[i] -= 1 if x[i] > 0 else -1
                diff += 2 * a - 1
                moved = True
        if not moved:
            break
    return x


@dataclass
class SynthesisReport:
    frames: list = field(default_factory=list)
    clipped_samples: int = 0
    peak: float = 0.0


def synthesize_pseudospeech(
    params,
    bank: WindowBank = BANK,
    table: PinvTable | None = None,
    report: SynthesisReport | None = None,
    method: str = DEFAULT_METHOD,
) -> np.ndarray:
    """Overlap-add a frame sequence into int16 PCM with exact payload energies.

    Samples beyond 89% of full scale are clipped and counted in ``report``.
    """
    L = len(params)
    acc = np.zeros(signal_length(L))
    frames = []
    for t, pp in enumerate(params):
        f = synth_frame(pp, bank, table, method)
        frames.append(f)
        acc[frame_slice(t)] += _TRAPEZOID * f.samples
    lim = HEADROOM * FULL_SCALE
    if report is not None:
        report.frames = frames
        report.clipped_samples = int(np.sum(np.abs(acc) > lim))
        report.peak = float(np.max(np.abs(acc))) if acc.size else 0.0
    out = np.clip(np.rint(acc), -lim, lim).astype(np.int64)
    for t, pp in enumerate(params):
        sl = payload_slice(t)
        out[sl] = match_energy_int(out[sl], pp.energy)
    return out.astype(np.int16)


# --------------------------------------------------------------------------
# analysis


def _design(omega0: float, K: int) -> np.ndarray:
    ang = np.outer(np.arange(PAYLOAD), np.arange(1, K + 1)) * omega0 / FS
    return np.hstack([np.cos(ang), np.sin(ang)])


def harmonic_fit_energy(y, omega0: float, K: int) -> float:
    """``||P y||^2`` for the projection onto ``K`` harmonics of ``omega0``."""
    A = _design(omega0, K)
    b = A.T @ y
    try:
        c = cho_factor(A.T @ A)
        return float(b @ cho_solve(c, b))
    except np.linalg.LinAlgError:
        q, _ = np.linalg.qr(A)
        v = q.T @ y
        return float(v @ v)


def _fit_harmonics(f0: float) -> int:
    return int(min(BAND_HIGH + f0, 0.99 * FS / 2) // f0)


_NFFT_COARSE = 1 << 15


def _harmonic_sum(spec: np.ndarray, f0: np.ndarray) -> np.ndarray:
    """Sum of the interpolated power spectrum at the harmonics of each ``f0`` below 6700 Hz."""
    K = int(BAND_HIGH // f0.min())
    freqs = np.outer(f0, np.arange(1, K + 1))
    valid = freqs < BAND_HIGH
    pos = np.where(valid, freqs * _NFFT_COARSE / FS, 0.0)
    lo = pos.astype(int)
    frac = pos - lo
    vals = (1 - frac) * spec[lo] + frac * spec[lo + 1]
    return np.sum(np.where(valid, vals, 0.0), axis=1)


def _local_peaks(score: np.ndarray) -> np.ndarray:
    up = np.r_[True, score[1:] >= score[:-1]]
    down = np.r_[score[:-1] >= score[1:], True]
    return np.nonzero(up & down)[0]


def _coarse_candidates(y: np.ndarray, f_lo: float, f_hi: float, n_cand: int, n_peaks: int) -> np.ndarray:
    """Best harmonic-sum peaks on an ``n_cand`` grid, searched coarse to fine."""
    spec = np.abs(np.fft.rfft(y, _NFFT_COARSE)) ** 2
    zoom = 16 if n_cand >= 256 else 1
    grid = np.linspace(f_lo, f_hi, n_cand)
    coarse = grid[::zoom]
    sc = _harmonic_sum(spec, coarse)
    pk = _local_peaks(sc)
    top = pk[np.argsort(sc[pk])[::-1][:n_peaks]] * zoom
    out = []
    for i in top:
        sub = grid[max(0, i - zoom) : i + zoom + 1]
        ss = _harmonic_sum(spec, sub)
        out.append(sub[np.argmax(ss)])
    return np.array(out)


def _refine(y: np.ndarray, f_guess: float, half_width: float, f_lo: float, f_hi: float) -> tuple[float, float]:
    K = _fit_harmonics(f_guess)
    lo, hi = max(f_lo, f_guess - half_width), min(f_hi, f_guess + half_width)
    res = minimize_scalar(
        lambda f: -harmonic_fit_energy(y, 2 * np.pi * f, K),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-8 * f_guess, "maxiter": 100},
    )
    return float(res.x), float(-res.fun)


def estimate_pitch_pseudo(
    payload,
    cfg: CipherConfig = CipherConfig(),
    n_candidates: int = PITCH_CANDIDATES,
    n_peaks: int = 4,
) -> float:
    """Fundamental (rad/s) maximizing the least-squares harmonic fit energy.

    Harmonic-sum peaks over ``n_candidates`` fundamentals are scored with
    the exact fit energy. Among candidates explaining at least 85% of the
    best fit the highest fundamental wins, which rejects subharmonics. The
    winner is refined on the exact fit energy.
    """
    y = np.asarray(payload, dtype=float)
    f_lo, f_hi = FS / cfg.pseudo_p_max, FS / cfg.pseudo_p_min
    cands = _coarse_candidates(y, f_lo, f_hi, n_candidates, n_peaks)
    if 2 * cands[0] <= f_hi * (1 + 1e-3):
        cands = np.r_[cands, min(2 * cands[0], f_hi)]
    J = np.array([harmonic_fit_energy(y, 2 * np.pi * f, _fit_harmonics(f)) for f in cands])
    ok = J >= OCTAVE_RATIO * J.max()
    f_best = cands[ok].max()
    step = (f_hi - f_lo) / (n_candidates - 1)
    f, _ = _refine(y, f_best, 2 * step + 0.1, f_lo, f_hi)
    return 2 * np.pi * f


def received_shape(payload, bank: WindowBank = BANK) -> np.ndarray:
    """``Re(2 H Y ⊙ conj(W16))`` before normalization."""
    Y = np.fft.fft(np.asarray(payload, dtype=float))
    return np.real(2 * (bank.H @ Y) * np.conj(bank.W16))


@dataclass(frozen=True)
class FrameAnalysis:
    pseudo: PseudoParams
    raw_energy: float
    omega0: float
    dhat: np.ndarray


def analyze_frame(frame, bank: WindowBank = BANK, cfg: CipherConfig = CipherConfig(), n_candidates: int = PITCH_CANDIDATES) -> FrameAnalysis:
    y = np.asarray(frame, dtype=float)
    if y.size != FRAME:
        raise ValueError(f"expected {FRAME} samples")
    payload = y[GUARD : GUARD + PAYLOAD]
    energy = float(np.dot(payload, payload))
    if energy < 1e-3 * cfg.pseudo_eps_min:
        raise DegenerateFrame(f"payload energy {energy:.3g} too low")
    omega0 = estimate_pitch_pseudo(payload, cfg, n_candidates)
    pitch = float(np.clip(2 * np.pi * FS / omega0, cfg.pseudo_p_min, cfg.pseudo_p_max))
    raw = received_shape(payload, bank)
    nrm = np.linalg.norm(raw)
    dhat = raw / nrm if nrm > 0 else raw
    dtilde = torus_project(dhat, XI, on_zero="zero_angle")
    e = float(np.clip(energy, cfg.pseudo_eps_min, cfg.pseudo_eps_max))
    return FrameAnalysis(PseudoParams(e, pitch, dtilde), energy, omega0, dhat)


def analyze_pseudospeech(samples, n_frames: int | None = None, bank: WindowBank = BANK, cfg: CipherConfig = CipherConfig(), n_candidates: int = PITCH_CANDIDATES):
    """Analyze every frame of a signal; degenerate frames repeat the previous one.

    Returns ``(params, analyses, erased)`` where ``erased`` flags held frames.
    """
    x = np.asarray(samples, dtype=float)
    if n_frames is None:
        n_frames = max(0, (x.size - GUARD) // HOP)
    need = signal_length(n_frames)
    if x.size < need:
        x = np.concatenate([x, np.zeros(need - x.size)])
    params, analyses, erased = [], [], []
    prev = None
    for t in range(n_frames):
        try:
            a = analyze_frame(x[frame_slice(t)], bank, cfg, n_candidates)
            prev = a.pseudo
            analyses.append(a)
            erased.append(False)
        except DegenerateFrame:
            if prev is None:
                prev = PseudoParams(cfg.pseudo_eps_min, cfg.pseudo_p_min, torus_project(np.tile([1.0, 0.0], 8), XI))
            analyses.append(None)
            erased.append(True)
        params.append(prev)
    return params, analyses, erased


def encoding_error(dtilde, frame_payload, eta: float, bank: WindowBank = BANK) -> np.ndarray:
    """``D ⊙ W16 - (2/eta) H Y`` for one synthesized payload."""
    Y = np.fft.fft(np.asarray(frame_payload, dtype=float))
    return np.asarray(dtilde) * bank.W16 - (2.0 / eta) * (bank.H @ Y)
