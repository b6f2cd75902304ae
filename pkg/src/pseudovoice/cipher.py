"""Enciphering of speech parameters into pseudo-speech parameters and back.

Pitch and energy are quantized to 16-bit integers inside guard intervals,
shifted by a keystream value modulo 2^16 and rescaled into the pseudo-speech
ranges. Timbre is quantized on the Gosset lattice, translated by a secret
lattice coset and mapped onto the flat torus of S^15.

Timbre cosets are handled as exact integers: a point ``x`` of the fine
lattice is stored as ``t = 2^17 x / (2 pi xi) mod 2^17``, i.e. twice its
Gosset coordinates. Deciphering is deliberately left unquantized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .keystream import FrameRandoms
from .lattice_codes import _decode_e8, _e8_basis
from .speech_codec import N_BANDS, VocalParams
from .sphere_maps import (
    FoliationProfile,
    _pair_angles,
    inverse_spherical_angles,
    spherical_angles,
    torus_project,
)

RING = 1 << 16
TIMBRE_MOD = 1 << 17
TIMBRE_DIM = N_BANDS - 1
XI = FoliationProfile.uniform(TIMBRE_DIM)
# doubled Gosset basis: integer columns 4e1, 2(e2-e1), ..., 2(e7-e6), 1
_ALPHA2 = np.rint(2 * _e8_basis()).astype(np.int64)


@dataclass(frozen=True)
class CipherConfig:
    eps_min: float = 10.0
    eps_max: float = 1e8
    p_min: float = 16.0
    p_max: float = 128.0
    pseudo_eps_min: float = 1e9
    pseudo_eps_max: float = 1e10
    pseudo_p_min: float = 80.0
    pseudo_p_max: float = 160.0
    kappa_low: int = 1 << 13
    kappa_high: int = RING - (1 << 13) - 1
    rho_low: int = 1 << 13
    rho_high: int = RING - (1 << 13) - 1

    def __post_init__(self):
        for lo, hi in ((self.kappa_low, self.kappa_high), (self.rho_low, self.rho_high)):
            if not 0 < lo < hi < RING:
                raise ValueError("guard bounds must satisfy 0 < low < high < 2^16")
        pairs = (
            (self.eps_min, self.eps_max),
            (self.p_min, self.p_max),
            (self.pseudo_eps_min, self.pseudo_eps_max),
            (self.pseudo_p_min, self.pseudo_p_max),
        )
        if any(not 0 < lo < hi for lo, hi in pairs):
            raise ValueError("every parameter interval must be nonempty and positive")

    @property
    def kappa_step_pitch(self) -> float:
        """Pitch change (speech samples) of one kappa step."""
        return (self.p_max - self.p_min) / (self.kappa_high - self.kappa_low)

    @property
    def rho_step_log_energy(self) -> float:
        return np.log10(self.eps_max / self.eps_min) / (self.rho_high - self.rho_low)

    @property
    def log_energy_expansion(self) -> float:
        """Deciphered log10-energy error per unit of received log10 pseudo-energy error."""
        return self.rho_step_log_energy * (RING - 1) / np.log10(self.pseudo_eps_max / self.pseudo_eps_min)

    @property
    def pitch_expansion(self) -> float:
        """Deciphered pitch error per received pseudo-pitch error."""
        return self.kappa_step_pitch * (RING - 1) / (self.pseudo_p_max - self.pseudo_p_min)


@dataclass(frozen=True)
class PseudoParams:
    energy: float
    pitch: float
    timbre: np.ndarray


@dataclass(frozen=True)
class EncipheredFrame:
    pseudo: PseudoParams
    kappa_init: int
    kappa_enc: int
    rho_init: int
    rho_enc: int
    chi_init: np.ndarray
    chi_enc: np.ndarray


@dataclass(frozen=True)
class DecipheredFrame:
    params: VocalParams
    kappa_rec: float
    kappa_dec: float
    rho_rec: float
    rho_dec: float


# --------------------------------------------------------------------------
# scalar maps


def _affine(x, a, b, c, d):
    return c + (np.asarray(x, dtype=float) - a) * (d - c) / (b - a)


def pitch_to_kappa(p, cfg: CipherConfig) -> int:
    return int(np.rint(_affine(p, cfg.p_min, cfg.p_max, cfg.kappa_low, cfg.kappa_high)))


def kappa_to_pitch(kappa, cfg: CipherConfig) -> float:
    return float(_affine(kappa, cfg.kappa_low, cfg.kappa_high, cfg.p_min, cfg.p_max))


def energy_to_rho(eps, cfg: CipherConfig) -> int:
    le = np.log10(eps)
    return int(np.rint(_affine(le, np.log10(cfg.eps_min), np.log10(cfg.eps_max), cfg.rho_low, cfg.rho_high)))


def rho_to_energy(rho, cfg: CipherConfig) -> float:
    return float(10.0 ** _affine(rho, cfg.rho_low, cfg.rho_high, np.log10(cfg.eps_min), np.log10(cfg.eps_max)))


def kappa_to_pseudo_pitch(kappa, cfg: CipherConfig) -> float:
    return float(_affine(kappa, 0, RING - 1, cfg.pseudo_p_min, cfg.pseudo_p_max))


def pseudo_pitch_to_kappa(pp, cfg: CipherConfig) -> float:
    return float(_affine(pp, cfg.pseudo_p_min, cfg.pseudo_p_max, 0, RING - 1))


def rho_to_pseudo_energy(rho, cfg: CipherConfig) -> float:
    lo, hi = np.log10(cfg.pseudo_eps_min), np.log10(cfg.pseudo_eps_max)
    return float(10.0 ** _affine(rho, 0, RING - 1, lo, hi))


def pseudo_energy_to_rho(pe, cfg: CipherConfig) -> float:
    lo, hi = np.log10(cfg.pseudo_eps_min), np.log10(cfg.pseudo_eps_max)
    return float(_affine(np.log10(pe), lo, hi, 0, RING - 1))


# --------------------------------------------------------------------------
# timbre


def timbre_to_residue(D) -> np.ndarray:
    """Closest Gosset point to ``2 gamma(D)`` as integer residues mod 2^17."""
    u2 = 2.0 * spherical_angles(np.asarray(D, dtype=float), XI)
    # lattice units: fine scale is 2 pi xi / 2^16
    y = u2 * RING / (2 * np.pi * XI.xi)
    z2 = np.rint(2.0 * _decode_e8(y)).astype(np.int64)
    return z2 % TIMBRE_MOD


def nu_residue(nu: FrameRandoms) -> np.ndarray:
    """``nu_3 alpha_1 + ... + nu_10 alpha_8`` as integer residues mod 2^17."""
    return (_ALPHA2 @ np.array(nu.timbre, dtype=np.int64)) % TIMBRE_MOD


def residue_to_torus(t) -> np.ndarray:
    theta = 2 * np.pi * (np.asarray(t, dtype=float) / TIMBRE_MOD)
    out = np.empty(theta.shape[:-1] + (2 * TIMBRE_DIM,))
    out[..., 0::2] = XI.xi * np.cos(theta)
    out[..., 1::2] = XI.xi * np.sin(theta)
    return out


def torus_to_residue(dtilde) -> np.ndarray:
    """Real-valued residues of a received vector after projection onto the torus."""
    q = torus_project(dtilde, XI, on_zero="zero_angle")
    return _pair_angles(q) * (TIMBRE_MOD / (2 * np.pi))


def residue_to_timbre(tau) -> np.ndarray:
    """Fold every coordinate into the lower half-range, halve and invert the angle map.

    Folding all eight coordinates, the last one included, keeps every
    recovered band amplitude nonnegative.
    """
    tau = np.mod(np.asarray(tau, dtype=float), TIMBRE_MOD)
    tau = np.where(tau >= TIMBRE_MOD / 2, TIMBRE_MOD - tau, tau)
    u = 0.5 * tau * (2 * np.pi * XI.xi / TIMBRE_MOD)
    # cos(pi/2) rounds to a tiny negative
    return np.maximum(inverse_spherical_angles(u, XI, check=False), 0.0)


def timbre_quantization_bound() -> float:
    """Noiseless timbre round-trip bound: sqrt(2) times the fine covering radius."""
    return np.pi / RING


def timbre_error_bound(channel_distance: float) -> float:
    """Bound on ``||D - D_dec||`` given the distance on the torus after projection."""
    return np.pi / np.sqrt(2.0) * channel_distance + timbre_quantization_bound()


# --------------------------------------------------------------------------
# frames


def encipher_frame(v: VocalParams, nu: FrameRandoms, cfg: CipherConfig = CipherConfig()) -> EncipheredFrame:
    p = float(np.clip(v.pitch, cfg.p_min, cfg.p_max))
    e = float(np.clip(v.energy, cfg.eps_min, cfg.eps_max))
    k0 = pitch_to_kappa(p, cfg)
    r0 = energy_to_rho(e, cfg)
    k1 = (k0 + nu.pitch) % RING
    r1 = (r0 + nu.energy) % RING
    chi0 = timbre_to_residue(v.timbre)
    chi1 = (chi0 + nu_residue(nu)) % TIMBRE_MOD
    pseudo = PseudoParams(rho_to_pseudo_energy(r1, cfg), kappa_to_pseudo_pitch(k1, cfg), residue_to_torus(chi1))
    return EncipheredFrame(pseudo, k0, k1, r0, r1, chi0, chi1)


def encipher(v: VocalParams, nu: FrameRandoms, cfg: CipherConfig = CipherConfig()) -> PseudoParams:
    return encipher_frame(v, nu, cfg).pseudo


def decipher_frame(r: PseudoParams, nu: FrameRandoms, cfg: CipherConfig = CipherConfig()) -> DecipheredFrame:
    k_rec = pseudo_pitch_to_kappa(r.pitch, cfg)
    r_rec = pseudo_energy_to_rho(r.energy, cfg)
    k_dec = (k_rec - nu.pitch) % RING
    r_dec = (r_rec - nu.energy) % RING
    p = kappa_to_pitch(np.clip(k_dec, cfg.kappa_low, cfg.kappa_high), cfg)
    e = rho_to_energy(np.clip(r_dec, cfg.rho_low, cfg.rho_high), cfg)
    tau = torus_to_residue(r.timbre) - nu_residue(nu)
    D = residue_to_timbre(tau)
    return DecipheredFrame(VocalParams(e, p, D, None), k_rec, k_dec, r_rec, r_dec)


def decipher(r: PseudoParams, nu: FrameRandoms, cfg: CipherConfig = CipherConfig()) -> VocalParams:
    return decipher_frame(r, nu, cfg).params
