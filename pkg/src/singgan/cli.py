"""``singgan`` command line.

Exit codes: 0 success, 1 runtime error, 2 usage error. Every verb that draws
random numbers takes ``--seed``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio import (
    AudioBuffer,
    F0Track,
    MelSpectrogram,
    estimate_f0,
    mel_spectrogram,
    read_features,
    read_wav,
    write_features,
    write_wav,
    write_wav_float,
)
from .config import DESK_OVERRIDES, ConfigError, EngineConfig, parse_lines, with_overrides, with_seed
from .data import load_dataset, make_synthetic_dataset, save_dataset
from .evaluation import mcd, plot_spectrogram
from .generator import generate
from .losses import generator_loss
from .pqmf import analyze, bank_from_config, synthesize


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _overrides(pairs: Sequence[str] | None) -> dict[str, str]:
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_config(args) -> EngineConfig:
    """Defaults, then ``--desk``, then ``--config`` file, then ``--set``, then ``--seed``."""
    settings: dict[str, str] = dict(DESK_OVERRIDES) if getattr(args, "desk", False) else {}
    if getattr(args, "config", None):
        settings.update(parse_lines(Path(args.config).read_text().splitlines()))
    settings.update(_overrides(getattr(args, "set", None)))
    cfg = with_overrides(EngineConfig(), settings)
    if getattr(args, "seed", None) is not None:
        cfg = with_seed(cfg, args.seed)
    return cfg


def _stem_paths(stem: str | Path) -> tuple[Path, Path]:
    stem = str(stem)
    return Path(f"{stem}.mel.sgf"), Path(f"{stem}.f0.sgf")


def _load_features(stem, cfg: EngineConfig) -> tuple[MelSpectrogram, F0Track]:
    mel_p, f0_p = _stem_paths(stem)
    mel = MelSpectrogram(read_features(mel_p), cfg.features)
    f0 = F0Track(read_features(f0_p)[:, 0], cfg.hop, cfg.sample_rate)
    return mel, f0


# ---------------------------------------------------------------- verbs -----


def cmd_analyze(args) -> int:
    cfg = build_config(args)
    buf = read_wav(args.wav)
    mel = mel_spectrogram(buf, cfg.features)
    f0 = estimate_f0(buf, cfg.hop)
    mel_p, f0_p = _stem_paths(args.out)
    write_features(mel_p, mel.values)
    write_features(f0_p, f0.frame_f0[:, None])
    print(f"frames={mel.frames}")
    print(f"voiced={int(f0.voiced.sum())}")
    return 0


def cmd_vocode(args) -> int:
    from .trainer import load_generator

    gen, ckpt_cfg = load_generator(args.checkpoint)
    cfg = with_seed(ckpt_cfg, args.seed) if args.seed is not None else ckpt_cfg
    mel, f0 = _load_features(args.features, cfg)
    out = generate(mel, f0, gen, cfg.excitation)
    write_wav(out, args.out)
    print(f"samples={len(out.samples)}")
    return 0


def cmd_train(args) -> int:
    from .trainer import csv_header, csv_row, init_state, load_checkpoint, save_checkpoint, train

    if args.resume:
        state = load_checkpoint(args.resume)
    else:
        state = init_state(build_config(args))
    clips = load_dataset(args.data, state.config.features)
    steps = args.steps if args.steps is not None else state.config.train.total_steps - state.step
    trace = open(args.trace, "w") if args.trace else None
    try:
        sys.stdout.write(csv_header())
        if trace:
            trace.write(csv_header())

        def emit(step, b):
            row = csv_row(step, b)
            if step % state.config.train.log_every == 0:
                sys.stdout.write(row)
            if trace:
                trace.write(row)

        train(state, clips, steps, emit)
    finally:
        if trace:
            trace.close()
    save_checkpoint(state, args.out)
    return 0


def _band_paths(stem, k: int) -> list[Path]:
    return [Path(f"{stem}.band{i}.wav") for i in range(k)]


def cmd_pqmf(args) -> int:
    cfg = build_config(args)
    bank = bank_from_config(cfg.pqmf)
    k = bank.num_bands
    band_rate = cfg.sample_rate // k
    if args.action == "split":
        buf = read_wav(args.input)
        # trailing zeros let merge return the whole signal after delay compensation
        x = np.concatenate([buf.samples.astype(np.float64), np.zeros(bank.taps)])
        bands = analyze(bank, x)
        for path, band in zip(_band_paths(args.output, k), bands):
            write_wav_float(AudioBuffer(band, band_rate), path)
        print(f"bands={k} length={bands.shape[1]}")
    else:
        bands = [read_wav(p, clip=False).samples.astype(np.float64) for p in _band_paths(args.input, k)]
        y = synthesize(bank, bands, cfg.sample_rate).samples[bank.delay :]
        write_wav(AudioBuffer(y, cfg.sample_rate), args.output)
        print(f"samples={len(y)}")
    return 0


def _pair(args) -> tuple[AudioBuffer, AudioBuffer]:
    ref, hyp = read_wav(args.ref), read_wav(args.hyp)
    n = min(len(ref.samples), len(hyp.samples))
    return AudioBuffer(ref.samples[:n], ref.sample_rate), AudioBuffer(hyp.samples[:n], hyp.sample_rate)


def cmd_loss(args) -> int:
    import torch

    cfg = build_config(args)
    ref, hyp = _pair(args)
    x = torch.from_numpy(ref.samples.astype(np.float64))
    y = torch.from_numpy(hyp.samples.astype(np.float64))
    _, b = generator_loss(x, y, cfg.loss, sample_rate=cfg.sample_rate)
    sys.stdout.write(b.lines())
    return 0


def cmd_eval(args) -> int:
    cfg = build_config(args)
    ref, hyp = _pair(args)
    print(f"mcd={mcd(ref, hyp, cfg.features):.6f}")
    return 0


def cmd_synthdata(args) -> int:
    cfg = build_config(args)
    seed = 0 if args.seed is None else args.seed
    clips = make_synthetic_dataset(args.clips, args.seconds, seed, cfg.features, cfg.sample_rate)
    paths = save_dataset(clips, args.out_dir)
    print(f"clips={len(paths)}")
    return 0


def cmd_plot(args) -> int:
    cfg = build_config(args)
    plot_spectrogram(read_wav(args.wav), args.out, cfg.features)
    return 0


# --------------------------------------------------------------- parser -----


def _common(p: argparse.ArgumentParser, seed: bool = False) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override (repeatable)")
    p.add_argument("--desk", action="store_true", help="start from the reduced-width desk configuration")
    if seed:
        p.add_argument("--seed", type=int, help="seed for training and excitation randomness")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="singgan", description="Singing-voice vocoder engine.")
    sub = p.add_subparsers(dest="verb", parser_class=_Parser, required=True)

    a = sub.add_parser("analyze", help="wav -> log-mel and F0 feature files")
    a.add_argument("wav")
    a.add_argument("--out", required=True, help="output stem; writes STEM.mel.sgf and STEM.f0.sgf")
    _common(a)

    v = sub.add_parser("vocode", help="features -> wav with a trained generator")
    v.add_argument("--checkpoint", required=True)
    v.add_argument("--features", required=True, help="feature stem (STEM.mel.sgf, STEM.f0.sgf)")
    v.add_argument("--out", required=True)
    v.add_argument("--seed", type=int, help="excitation seed (default: the checkpoint's)")

    t = sub.add_parser("train", help="train on a dataset directory; prints the loss CSV")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True, help="training-state checkpoint to write")
    t.add_argument("--steps", type=int, help="steps to run (default: up to train.total_steps)")
    t.add_argument("--resume", help="continue from a training-state checkpoint")
    t.add_argument("--trace", help="also write the full CSV trace here")
    _common(t, seed=True)

    q = sub.add_parser(
        "pqmf",
        help="split a wav into sub-band wavs or merge them back",
        description="split IN.wav STEM writes STEM.band<k>.wav (float32, rate/4); merge STEM OUT.wav inverts it.",
    )
    q.add_argument("action", choices=["split", "merge"])
    q.add_argument("input", help="wav (split) or band stem (merge)")
    q.add_argument("output", help="band stem (split) or wav (merge)")
    _common(q)

    lo = sub.add_parser("loss", help="auxiliary loss breakdown between two wavs")
    lo.add_argument("--ref", required=True)
    lo.add_argument("--hyp", required=True)
    _common(lo)

    e = sub.add_parser(
        "eval",
        help="mel-cepstral distortion between two wavs",
        description="Prints mcd=<dB>. STOI and PESQ are standardised third-party measures and are not provided.",
    )
    e.add_argument("--ref", required=True)
    e.add_argument("--hyp", required=True)
    _common(e)

    s = sub.add_parser("synthdata", help="write a seeded synthetic dataset")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--clips", type=int, default=1)
    s.add_argument("--seconds", type=float, default=2.0)
    _common(s, seed=True)

    pl = sub.add_parser("plot", help="log-magnitude spectrogram as a PPM image")
    pl.add_argument("wav")
    pl.add_argument("--out", required=True)
    _common(pl)
    return p


VERBS = {
    "analyze": cmd_analyze,
    "vocode": cmd_vocode,
    "train": cmd_train,
    "pqmf": cmd_pqmf,
    "loss": cmd_loss,
    "eval": cmd_eval,
    "synthdata": cmd_synthdata,
    "plot": cmd_plot,
}


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        parser.print_help(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
        return VERBS[args.verb](args)
    except (UsageError, ConfigError) as err:
        print(f"singgan: usage error: {err}", file=sys.stderr)
        return 2
    except SystemExit as err:  # --help
        return int(err.code or 0)
    except Exception as err:  # noqa: BLE001 - reported, mapped to exit 1
        print(f"singgan: error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
