"""Seeded synthetic singing-like clips with known F0."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import (
    AudioBuffer,
    F0Track,
    MelSpectrogram,
    encode_pcm16,
    mel_spectrogram,
    read_features,
    read_wav,
    write_features,
    write_wav,
)
from .config import SpectrogramConfig


@dataclass
class Clip:
    audio: AudioBuffer
    mel: MelSpectrogram
    f0: F0Track
    f0_samples: np.ndarray | None = None  # construction F0, synthetic clips only


def _melody(rng: np.random.Generator, n: int, sr: int):
    """Sample-level base F0 (0 = breath) as piecewise-constant notes and gaps."""
    base = np.zeros(n)
    t = 0
    first = True
    while t < n:
        if not first and rng.random() < 0.3:
            t += int(rng.uniform(0.05, 0.15) * sr)
            continue
        first = False
        dur = int(rng.uniform(0.15, 0.45) * sr)
        base[t : t + dur] = np.exp(rng.uniform(np.log(150.0), np.log(600.0)))
        t += dur
    return base


def synth_clip(
    rng: np.random.Generator, seconds: float, sr: int = 24000, floor_db: float = -60.0
) -> tuple[np.ndarray, np.ndarray]:
    n = int(round(seconds * sr))
    base = _melody(rng, n, sr)
    voiced = base > 0
    t = np.arange(n) / sr
    rate = rng.uniform(5.0, 7.0)
    vib = 2.0 ** (30.0 / 1200.0 * np.sin(2 * np.pi * rate * t + rng.uniform(-np.pi, np.pi)))
    f0 = np.where(voiced, base * vib, 0.0)

    n_harm = int(rng.integers(3, 9))
    amps = rng.uniform(0.5, 1.0, n_harm) / np.arange(1, n_harm + 1)
    phase = 2 * np.pi * np.cumsum(f0 / sr)
    voice = sum(a * np.sin((i + 1) * phase) for i, a in enumerate(amps))
    voice *= 0.5 / amps.sum()

    # 10 ms fades at run boundaries so notes do not click
    fade = int(0.01 * sr)
    env = voiced.astype(np.float64)
    kernel = np.ones(fade) / fade
    env = np.convolve(env, kernel, mode="same") * voiced

    breath = rng.standard_normal(n)
    breath = np.diff(breath, prepend=0.0) * 0.015
    floor = rng.standard_normal(n) * 10.0 ** (floor_db / 20.0)
    wav = voice * env + np.where(voiced, 0.0, breath) + floor
    return np.clip(wav, -1.0, 1.0).astype(np.float32), f0


def frame_f0(f0_samples: np.ndarray, hop: int) -> np.ndarray:
    n = len(f0_samples)
    centres = np.minimum(np.arange(n // hop + 1) * hop, n - 1)
    return f0_samples[centres]


def make_synthetic_dataset(
    n_clips: int,
    seconds: float,
    seed: int = 0,
    spec: SpectrogramConfig | None = None,
    sample_rate: int = 24000,
) -> list[Clip]:
    """Clips of harmonic tones with vibrato and breath-noise gaps.

    Audio is quantised to the 16-bit grid and mel and F0 frames to float32, so
    :func:`save_dataset` followed by :func:`load_dataset` is lossless.
    """
    spec = spec or SpectrogramConfig()
    rng = np.random.default_rng(seed)
    clips = []
    for _ in range(n_clips):
        wav, f0 = synth_clip(rng, seconds, sample_rate)
        audio = AudioBuffer(encode_pcm16(wav).astype(np.float32) / 32768.0, sample_rate)
        frames = frame_f0(f0, spec.hop_size).astype(np.float32)
        track = F0Track(frames, spec.hop_size, sample_rate)
        mel = mel_spectrogram(audio, spec)
        mel.values = mel.values.astype(np.float32)
        clips.append(Clip(audio, mel, track, f0))
    return clips


def save_dataset(clips: list[Clip], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, clip in enumerate(clips):
        stem = out / f"clip_{i:03d}"
        write_wav(clip.audio, stem.with_suffix(".wav"))
        write_features(f"{stem}.mel.sgf", clip.mel.values)
        write_features(f"{stem}.f0.sgf", clip.f0.frame_f0[:, None])
        paths.append(stem.with_suffix(".wav"))
    return paths


def load_dataset(data_dir: str | Path, spec: SpectrogramConfig | None = None) -> list[Clip]:
    """Read ``clip_*.wav`` with their ``.mel.sgf`` / ``.f0.sgf`` companions."""
    spec = spec or SpectrogramConfig()
    clips = []
    for wav_path in sorted(Path(data_dir).glob("*.wav")):
        stem = str(wav_path)[: -len(".wav")]
        audio = read_wav(wav_path)
        mel = MelSpectrogram(read_features(f"{stem}.mel.sgf"), spec)
        f0 = F0Track(read_features(f"{stem}.f0.sgf")[:, 0], spec.hop_size, audio.sample_rate)
        clips.append(Clip(audio, mel, f0))
    if not clips:
        raise FileNotFoundError(f"no .wav clips in {data_dir}")
    return clips
