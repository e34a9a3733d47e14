"""Objective evaluation (mel-cepstral distortion) and spectrogram images."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.fft import dct

from .audio import AudioBuffer, mel_spectrogram, stft_magnitude
from .colormap import table
from .config import SpectrogramConfig

MCD_COEFFS = 13
MCD_SCALE = 10.0 / np.log(10.0) * np.sqrt(2.0)


def mel_cepstrum(buf: AudioBuffer, spec: SpectrogramConfig | None = None) -> np.ndarray:
    """DCT-II (orthonormal) of the conditioning log-mel, coefficients 1..13 per frame."""
    spec = spec or SpectrogramConfig()
    logmel = mel_spectrogram(buf, spec).values.astype(np.float64)
    return dct(logmel, type=2, norm="ortho", axis=1)[:, 1 : MCD_COEFFS + 1]


def mcd(x: AudioBuffer, y: AudioBuffer, spec: SpectrogramConfig | None = None) -> float:
    """Mel-cepstral distortion in dB after trimming both signals to the shorter length.

    No time warping: vocoder output is sample-aligned with its reference.
    """
    spec = spec or SpectrogramConfig()
    n = min(len(x.samples), len(y.samples))
    if n < spec.win_length:
        raise ValueError(f"need at least one frame ({spec.win_length} samples), got {n}")
    cx = mel_cepstrum(AudioBuffer(x.samples[:n], x.sample_rate), spec)
    cy = mel_cepstrum(AudioBuffer(y.samples[:n], y.sample_rate), spec)
    dist = np.sqrt(np.sum((cx - cy) ** 2, axis=1))
    return float(MCD_SCALE * dist.mean())


DB_RANGE = 80.0
DB_FLOOR = -100.0


def spectrogram_indices(buf: AudioBuffer, spec: SpectrogramConfig | None = None) -> np.ndarray:
    """Colour indices (rows = frequency bins, highest first; columns = frames).

    Levels span the 80 dB below the loudest bin, never below -100 dB, so
    silence maps entirely to index 0.
    """
    spec = spec or SpectrogramConfig()
    mag = stft_magnitude(buf, spec).values
    db = 20.0 * np.log10(np.maximum(mag, 10.0 ** (DB_FLOOR / 20.0)))
    top = float(db.max())
    lo = max(top - DB_RANGE, DB_FLOOR)
    if top <= lo:
        idx = np.zeros(db.shape, dtype=np.uint8)
    else:
        idx = np.clip(np.round(255.0 * (db - lo) / (top - lo)), 0, 255).astype(np.uint8)
    return idx.T[::-1]


def plot_spectrogram(buf: AudioBuffer, out_path: str | Path, spec: SpectrogramConfig | None = None) -> Path:
    """Write a binary PPM (P6) log-magnitude spectrogram."""
    idx = spectrogram_indices(buf, spec)
    rgb = np.asarray(table(), dtype=np.uint8)[idx]
    h, w = idx.shape
    out = Path(out_path)
    with open(out, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())
    return out


def read_ppm(path: str | Path) -> np.ndarray:
    """Minimal P6 reader for the images written above; returns ``(h, w, 3)`` uint8."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6" or len(parts) < 4:
        raise ValueError(f"{path}: not a P6 image")
    w, h = map(int, parts[1].split())
    pix = np.frombuffer(parts[3], dtype=np.uint8)
    if pix.size != w * h * 3:
        raise ValueError(f"{path}: expected {w * h * 3} pixel bytes, found {pix.size}")
    return pix.reshape(h, w, 3)
