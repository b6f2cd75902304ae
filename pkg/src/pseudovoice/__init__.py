"""Distortion-tolerant speech encryption into pseudo-speech."""

from .cipher import CipherConfig, PseudoParams, decipher, encipher
from .config import ChannelSpec, PipelineConfig
from .keystream import FrameRandoms, Seed, new_generator, next_frame_randoms
from .lattice_codes import Lattice, build_group_code, build_quotient, cvp, smith_normal_form
from .pipeline import RmseReport, decrypt, encrypt, keygen, simulate, sweep
from .speech_codec import VocalParams, encode_speech, synthesize_speech

__version__ = "0.1.0"

__all__ = [
    "ChannelSpec",
    "CipherConfig",
    "FrameRandoms",
    "Lattice",
    "PipelineConfig",
    "PseudoParams",
    "RmseReport",
    "Seed",
    "VocalParams",
    "build_group_code",
    "build_quotient",
    "cvp",
    "decipher",
    "decrypt",
    "encipher",
    "encode_speech",
    "encrypt",
    "keygen",
    "new_generator",
    "next_frame_randoms",
    "simulate",
    "smith_normal_form",
    "sweep",
    "synthesize_speech",
]
