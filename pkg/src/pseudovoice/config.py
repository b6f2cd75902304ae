"""Flat JSON configuration with unit-suffixed keys.

Defaults are the standard speech and pseudo-speech parameter ranges.
Unknown keys are rejected so that typos cannot silently fall back to a
default.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .cipher import CipherConfig
from .errors import ConfigError
from .keystream import Seed
from .pseudospeech import METHODS

CHANNEL_KINDS = ("awgn", "gain", "offset", "codec")


@dataclass(frozen=True)
class ChannelSpec:
    """Impairments applied in the order listed in ``kinds``."""

    kinds: tuple = ()
    snr_db: float = float("inf")
    gain_ratio: float = 1.0
    offset_ms: float = 0.0
    codec_cmd: str = ""
    seed: int = 0

    def __post_init__(self):
        bad = [k for k in self.kinds if k not in CHANNEL_KINDS]
        if bad:
            raise ConfigError(f"unknown channel kind(s) {bad}; choose from {CHANNEL_KINDS}")
        if "codec" in self.kinds and not self.codec_cmd:
            raise ConfigError("codec channel needs a command template")
        if self.gain_ratio <= 0:
            raise ConfigError("gain must be positive")

    @classmethod
    def parse(cls, text: str, **kw) -> "ChannelSpec":
        kinds = tuple(k.strip() for k in text.split(",") if k.strip() and k.strip() != "none")
        return cls(kinds, **kw)


@dataclass(frozen=True)
class PipelineConfig:
    speech_energy_min_pcm2: float = 10.0
    speech_energy_max_pcm2: float = 1e8
    speech_pitch_min_samples: float = 16.0
    speech_pitch_max_samples: float = 128.0
    pseudo_energy_min_pcm2: float = 1e9
    pseudo_energy_max_pcm2: float = 1e10
    pseudo_pitch_min_samples: float = 80.0
    pseudo_pitch_max_samples: float = 160.0
    pitch_guard_low_steps: int = 1 << 13
    pitch_guard_high_steps: int = (1 << 16) - (1 << 13) - 1
    energy_guard_low_steps: int = 1 << 13
    energy_guard_high_steps: int = (1 << 16) - (1 << 13) - 1
    seed_hex: str = ""
    channel_kinds: str = "none"
    channel_snr_db: float = float("inf")
    channel_gain_ratio: float = 1.0
    channel_offset_ms: float = 0.0
    channel_codec_cmd: str = ""
    channel_seed_int: int = 0
    pitch_candidates_count: int = 1 << 14
    pinv_table_size_count: int = 0
    amplitude_method: str = "confined"
    synth_seed_int: int = 0
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.seed_hex:
            try:
                Seed.from_hex(self.seed_hex)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        if self.amplitude_method not in METHODS:
            raise ConfigError(f"amplitude_method must be one of {METHODS}")
        if self.pitch_candidates_count < 16:
            raise ConfigError("pitch_candidates_count too small")
        try:
            self.cipher
            self.channel
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def cipher(self) -> CipherConfig:
        return CipherConfig(
            eps_min=self.speech_energy_min_pcm2,
            eps_max=self.speech_energy_max_pcm2,
            p_min=self.speech_pitch_min_samples,
            p_max=self.speech_pitch_max_samples,
            pseudo_eps_min=self.pseudo_energy_min_pcm2,
            pseudo_eps_max=self.pseudo_energy_max_pcm2,
            pseudo_p_min=self.pseudo_pitch_min_samples,
            pseudo_p_max=self.pseudo_pitch_max_samples,
            kappa_low=self.pitch_guard_low_steps,
            kappa_high=self.pitch_guard_high_steps,
            rho_low=self.energy_guard_low_steps,
            rho_high=self.energy_guard_high_steps,
        )

    @property
    def channel(self) -> ChannelSpec:
        return ChannelSpec.parse(
            self.channel_kinds,
            snr_db=self.channel_snr_db,
            gain_ratio=self.channel_gain_ratio,
            offset_ms=self.channel_offset_ms,
            codec_cmd=self.channel_codec_cmd,
            seed=self.channel_seed_int,
        )

    def with_updates(self, **kw) -> "PipelineConfig":
        try:
            return replace(self, **kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        names = {f.name for f in fields(cls)} - {"extra"}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
        kw = {}
        for f in fields(cls):
            if f.name in data:
                v = data[f.name]
                if f.type in ("float",) and isinstance(v, str) and v.lower() in ("inf", "infinity"):
                    v = float("inf")
                kw[f.name] = v
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text())
        except ValueError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        for k, v in d.items():
            if isinstance(v, float) and v == float("inf"):
                d[k] = "inf"
        return d

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")
