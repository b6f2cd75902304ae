"""Command line interface: ``pseudovoice <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import pipeline
from .config import PipelineConfig
from .errors import BadInputFormat, PseudoVoiceError
from .pipeline import PSEUDO_FS, SPEECH_FS
from .wavio import read_wav, write_wav

log = logging.getLogger("pseudovoice")


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    kw = {}
    if getattr(args, "seed", None):
        kw["seed_hex"] = args.seed
    if getattr(args, "channel", None) is not None:
        kw["channel_kinds"] = args.channel
    if getattr(args, "snr_db", None) is not None and not isinstance(args.snr_db, list):
        kw["channel_snr_db"] = args.snr_db
    if getattr(args, "gain", None) is not None:
        kw["channel_gain_ratio"] = args.gain
    if getattr(args, "offset_ms", None) is not None:
        kw["channel_offset_ms"] = args.offset_ms
    if getattr(args, "codec_cmd", None) is not None:
        kw["channel_codec_cmd"] = args.codec_cmd
    if getattr(args, "channel_seed", None) is not None:
        kw["channel_seed_int"] = args.channel_seed
    return cfg.with_updates(**kw) if kw else cfg


def _read(path, rate: int):
    x, r, meta = read_wav(path, with_meta=True)
    if r != rate:
        raise BadInputFormat(f"{path}: expected {rate} Hz, got {r} Hz")
    return x, meta


def _warn_trace(path):
    log.warning("writing insecure trace %s: it contains plaintext speech parameters", path)


def cmd_keygen(args, out) -> int:
    print(pipeline.keygen().hex(), file=out)
    return 0


def cmd_encrypt(args, out) -> int:
    cfg = _load_config(args)
    x, _ = _read(args.input, SPEECH_FS)
    if x.size == 0:
        write_wav(args.output, x, PSEUDO_FS, {"padding": 0, "frames": 0})
        return 0
    res = pipeline.encrypt(x, None, cfg)
    write_wav(args.output, res.samples, PSEUDO_FS, {"padding": res.padding, "frames": res.n_frames})
    if res.report is not None and res.report.clipped_samples:
        log.warning("%d samples clipped at the output headroom", res.report.clipped_samples)
    if args.trace:
        _warn_trace(args.trace)
        pipeline.write_trace(args.trace, res.trace)
    return 0


def _apply_offset(x, args):
    if getattr(args, "align_ms", None):
        from .channel import sample_offset

        return sample_offset(x, -args.align_ms, PSEUDO_FS)
    return x


def cmd_decrypt(args, out) -> int:
    cfg = _load_config(args)
    y, meta = _read(args.input, PSEUDO_FS)
    frames = meta.get("frames")
    if y.size == 0 or frames == 0:
        write_wav(args.output, np.zeros(0, dtype=np.int16), SPEECH_FS)
        return 0
    y = _apply_offset(y, args)
    res = pipeline.decrypt(y, None, cfg, frames, int(meta.get("padding", 0)))
    write_wav(args.output, res.samples, SPEECH_FS)
    if args.trace:
        _warn_trace(args.trace)
        pipeline.write_trace(args.trace, res.trace)
    return 0


def _print_report(rep, out):
    print(json.dumps(rep.as_dict(), indent=2), file=out)


def cmd_simulate(args, out) -> int:
    cfg = _load_config(args)
    x, _ = _read(args.input, SPEECH_FS)
    res = pipeline.simulate(x, None, cfg)
    if args.output:
        write_wav(args.output, res.decrypted.samples, SPEECH_FS)
    if args.trace:
        _warn_trace(args.trace)
        pipeline.write_trace(args.trace, res.encrypted.trace)
    _print_report(res.report, out)
    if args.csv_out:
        pipeline.write_csv(args.csv_out, [(cfg.channel.snr_db, res.report)])
    return 0


def cmd_sweep(args, out) -> int:
    cfg = _load_config(args)
    x, _ = _read(args.input, SPEECH_FS)
    levels = args.snr_db or [25.0, 20.0, 15.0, 10.0, 5.0]
    rows = pipeline.sweep(x, None, cfg, levels)
    for snr, rep in rows:
        print(f"snr_db={snr:g} " + " ".join(f"{k}={v:.6g}" for k, v in rep.as_dict().items()), file=out)
    if args.csv_out:
        pipeline.write_csv(args.csv_out, rows)
    return 0


def cmd_eval(args, out) -> int:
    cfg = _load_config(args)
    trace = pipeline.read_trace(args.trace_in)
    y, meta = _read(args.input, PSEUDO_FS)
    y = _apply_offset(y, args)
    rep = pipeline.evaluate(trace, y, None, cfg, int(meta.get("padding", 0)))
    _print_report(rep, out)
    if args.csv_out:
        pipeline.write_csv(args.csv_out, [(cfg.channel.snr_db, rep)])
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pseudovoice", description="Distortion-tolerant speech encryption into pseudo-speech.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, channel=False):
        sp.add_argument("--seed", help="64 hex digit keystream seed")
        sp.add_argument("--config", help="JSON configuration file")
        if channel:
            sp.add_argument("--channel", help="comma-separated impairments: awgn, gain, offset, codec (or none)")
            sp.add_argument("--gain", type=float)
            sp.add_argument("--offset-ms", type=float)
            sp.add_argument("--codec-cmd", help="command template with {in} and {out}")
            sp.add_argument("--channel-seed", type=int)
            sp.add_argument("--csv-out")

    sp = sub.add_parser("keygen", help="print a fresh random seed")
    sp.set_defaults(func=cmd_keygen)

    sp = sub.add_parser("encrypt", help="8 kHz speech WAV to 16 kHz pseudo-speech WAV")
    sp.add_argument("input")
    sp.add_argument("output")
    common(sp)
    sp.add_argument("--trace", help="write per-frame parameters (INSECURE: leaks plaintext)")
    sp.set_defaults(func=cmd_encrypt)

    sp = sub.add_parser("decrypt", help="16 kHz pseudo-speech WAV to 8 kHz speech WAV")
    sp.add_argument("input")
    sp.add_argument("output")
    common(sp)
    sp.add_argument("--align-ms", type=float, help="known receive delay to undo before analysis")
    sp.add_argument("--trace", help="write per-frame received parameters (INSECURE)")
    sp.set_defaults(func=cmd_decrypt)

    sp = sub.add_parser("simulate", help="encrypt, pass through a channel, decrypt and report RMSE")
    sp.add_argument("input")
    sp.add_argument("output", nargs="?")
    common(sp, channel=True)
    sp.add_argument("--snr-db", type=float)
    sp.add_argument("--trace", help="write the encrypt-side trace (INSECURE)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="AWGN sweep over several SNR levels")
    sp.add_argument("input")
    common(sp, channel=True)
    sp.add_argument("--snr-db", type=float, nargs="+")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("eval", help="score a received pseudo-speech WAV against an encrypt trace")
    sp.add_argument("trace_in")
    sp.add_argument("input")
    common(sp, channel=True)
    sp.add_argument("--align-ms", type=float)
    sp.add_argument("--snr-db", type=float)
    sp.set_defaults(func=cmd_eval)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args, out)
    except (PseudoVoiceError, ValueError, OSError) as exc:
        print(f"pseudovoice: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
