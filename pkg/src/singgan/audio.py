"""Waveform I/O and spectral features.

The spectral functions come in two flavours: ``*_tensor`` functions operate on
torch tensors of shape ``(..., T)`` and are differentiable (the losses use
them), while the plain functions take an :class:`AudioBuffer` and return numpy
arrays.

Framing convention: the signal is reflection-padded by ``win_length // 2`` on
both sides and cut into windows of ``win_length`` samples every ``hop_size``
samples, so frame ``t`` is centred on input sample ``t * hop_size`` and an input
of ``n`` samples yields ``(n + 2 * (win // 2) - win) // hop + 1`` frames.
"""

from __future__ import annotations

import functools
import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import ConfigError, SpectrogramConfig

LOG_FLOOR = 1e-5
F0_MIN, F0_MAX = 40.0, 2000.0


class WavDecodeError(ValueError):
    pass


class UnsupportedFormatError(WavDecodeError):
    pass


@dataclass
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int = 24000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32).reshape(-1)
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass
class MagnitudeSpectrogram:
    values: np.ndarray  # frames x (fft_size // 2 + 1)
    config: SpectrogramConfig


@dataclass
class MelSpectrogram:
    values: np.ndarray  # frames x mel_bands, natural log
    config: SpectrogramConfig

    @property
    def frames(self) -> int:
        return self.values.shape[0]


@dataclass
class F0Track:
    frame_f0: np.ndarray
    hop_size: int = 128
    sample_rate: int = 24000

    def __post_init__(self):
        self.frame_f0 = np.asarray(self.frame_f0, dtype=np.float64).reshape(-1)
        f = self.frame_f0
        bad = (f != 0.0) & ((f < F0_MIN) | (f > F0_MAX) | ~np.isfinite(f))
        if bad.any():
            raise ValueError(
                f"F0 values must be 0 or within [{F0_MIN}, {F0_MAX}] Hz; "
                f"first offending frame {int(np.argmax(bad))} = {f[bad][0]}"
            )

    def __len__(self) -> int:
        return self.frame_f0.shape[0]

    @property
    def voiced(self) -> np.ndarray:
        return self.frame_f0 > 0


# ---------------------------------------------------------------- WAV -----

_FMT_PCM = 1
_FMT_FLOAT = 3
_FMT_EXTENSIBLE = 0xFFFE


def read_wav(path: str | Path, clip: bool = True) -> AudioBuffer:
    """Decode a RIFF/WAVE file holding PCM16 or IEEE float32 samples.

    Multi-channel files are reduced to their first channel. Float samples are
    clamped to [-1, 1] unless ``clip`` is false.
    """
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavDecodeError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    payload = None
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        if cid == b"fmt ":
            if size < 16:
                raise WavDecodeError(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
            if fmt[0] == _FMT_EXTENSIBLE and size >= 26:
                fmt = (struct.unpack_from("<H", body, 24)[0],) + fmt[1:]
        elif cid == b"data":
            # tolerate truncated files and headers that report a bogus size
            payload = body
            break
        pos += 8 + size + (size & 1)
    if fmt is None:
        raise WavDecodeError(f"{path}: missing fmt chunk")
    if payload is None:
        raise WavDecodeError(f"{path}: missing data chunk")
    code, channels, rate, _, _, bits = fmt
    if channels < 1 or rate < 1:
        raise WavDecodeError(f"{path}: invalid channel count or sample rate")
    if code == _FMT_PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 1.0 / 32768.0
    elif code == _FMT_FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise UnsupportedFormatError(f"{path}: unsupported encoding (format {code}, {bits} bits)")
    frame_bytes = dtype.itemsize * channels
    n = len(payload) // frame_bytes
    raw = np.frombuffer(payload[: n * frame_bytes], dtype=dtype).reshape(n, channels)[:, 0]
    samples = raw.astype(np.float64) * scale
    if clip:
        samples = np.clip(samples, -1.0, 1.0)
    return AudioBuffer(samples.astype(np.float32), int(rate))


def encode_pcm16(samples: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    return np.clip(np.rint(x * 32768.0), -32768, 32767).astype("<i2")


def write_wav(buf: AudioBuffer, path: str | Path) -> None:
    """Write ``buf`` as 16-bit little-endian mono PCM (clamped, rounded)."""
    pcm = encode_pcm16(buf.samples)
    with open(path, "wb") as fh, wave.open(fh, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(buf.sample_rate)
        w.writeframes(pcm.tobytes())


def write_wav_float(buf: AudioBuffer, path: str | Path) -> None:
    """Write ``buf`` unclamped as mono IEEE float32 (used for sub-band signals)."""
    payload = np.asarray(buf.samples, dtype="<f4").tobytes()
    fmt = struct.pack("<HHIIHH", _FMT_FLOAT, 1, buf.sample_rate, 4 * buf.sample_rate, 4, 32) + b"\x00\x00"
    fact = struct.pack("<I", len(payload) // 4)
    chunks = (
        b"fmt " + struct.pack("<I", len(fmt)) + fmt
        + b"fact" + struct.pack("<I", 4) + fact
        + b"data" + struct.pack("<I", len(payload)) + payload
    )  # fmt: skip
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks)


# ------------------------------------------------------- feature dumps -----

SGF_MAGIC = b"SGF1"


def write_features(path: str | Path, values: np.ndarray) -> None:
    """Write a 2-D float32 matrix in the SGF1 dump format."""
    arr = np.asarray(values, dtype="<f4")
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError("feature dumps hold 2-D matrices")
    rows, cols = arr.shape
    with open(path, "wb") as fh:
        fh.write(SGF_MAGIC + struct.pack("<III", rows, cols, 0))
        fh.write(np.ascontiguousarray(arr).tobytes())


def read_features(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != SGF_MAGIC:
        raise ValueError(f"{path}: not an SGF1 feature file")
    rows, cols, dtype = struct.unpack_from("<III", data, 4)
    if dtype != 0:
        raise ValueError(f"{path}: unsupported dtype code {dtype}")
    if len(data) - 16 != rows * cols * 4:
        raise ValueError(f"{path}: payload size does not match {rows}x{cols} header")
    return np.frombuffer(data, dtype="<f4", offset=16).reshape(rows, cols).copy()


# -------------------------------------------------------------- STFT -----


def frame_count(n_samples: int, hop_size: int, win_length: int) -> int:
    pad = win_length // 2
    return (n_samples + 2 * pad - win_length) // hop_size + 1


def reflect_indices(n: int, pad_left: int, pad_right: int) -> np.ndarray:
    """Source indices for reflection padding that also works when pad >= n."""
    if n < 1:
        raise ValueError("cannot pad an empty signal")
    pos = np.arange(-pad_left, n + pad_right)
    if n == 1:
        return np.zeros_like(pos)
    period = 2 * (n - 1)
    m = np.abs(pos) % period
    return np.where(m >= n, period - m, m)


def _frames_tensor(x: torch.Tensor, hop: int, win: int) -> torch.Tensor:
    n = x.shape[-1]
    if n < 1:
        raise ValueError("empty signal")
    idx = torch.from_numpy(reflect_indices(n, win // 2, win // 2))
    padded = x.index_select(-1, idx) if x.dim() == 1 else x[..., idx]
    return padded.unfold(-1, win, hop)


def stft_magnitude_tensor(x: torch.Tensor, fft_size: int, hop_size: int, win_length: int) -> torch.Tensor:
    """|STFT| of ``x`` (shape ``(..., T)``) as ``(..., frames, fft_size//2 + 1)``."""
    if not (0 < hop_size <= win_length <= fft_size):
        raise ConfigError("need 0 < hop_size <= win_length <= fft_size")
    frames = _frames_tensor(x, hop_size, win_length)
    window = torch.hann_window(win_length, periodic=True, dtype=x.dtype)
    return torch.fft.rfft(frames * window, n=fft_size).abs()


@functools.lru_cache(maxsize=32)
def _mel_matrix(sample_rate: int, fft_size: int, mel_bands: int, fmin: float, fmax: float) -> np.ndarray:
    return mel_filterbank(sample_rate, fft_size, mel_bands, fmin, fmax)


def hz_to_mel(f):
    """Slaney mel scale: linear below 1 kHz, logarithmic above."""
    f = np.asarray(f, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    return np.where(f >= min_log_hz, min_log_mel + np.log(np.maximum(f, 1e-10) / min_log_hz) / logstep, f / f_sp)


def mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    return np.where(m >= min_log_mel, min_log_hz * np.exp(logstep * (m - min_log_mel)), f_sp * m)


def mel_filterbank(sample_rate: int, fft_size: int, mel_bands: int, fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Slaney-normalised triangular filterbank, shape ``(mel_bands, fft_size//2 + 1)``."""
    if fmax is None:
        fmax = sample_rate / 2
    if mel_bands < 1:
        raise ConfigError("mel_bands must be >= 1")
    freqs = np.linspace(0.0, sample_rate / 2, fft_size // 2 + 1)
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), mel_bands + 2))
    widths = np.diff(edges)
    ramps = edges[:, None] - freqs[None, :]
    lower = -ramps[:-2] / widths[:-1, None]
    upper = ramps[2:] / widths[1:, None]
    weights = np.maximum(0.0, np.minimum(lower, upper))
    weights *= (2.0 / (edges[2:] - edges[:-2]))[:, None]
    return weights


def mel_matrix_tensor(sample_rate: int, cfg: SpectrogramConfig, dtype=torch.float32) -> torch.Tensor:
    return torch.from_numpy(_mel_matrix(sample_rate, cfg.fft_size, cfg.mel_bands, cfg.fmin, cfg.fmax)).to(dtype)


def log_mel_tensor(x: torch.Tensor, cfg: SpectrogramConfig, sample_rate: int = 24000) -> torch.Tensor:
    """Natural-log mel energies ``(..., frames, mel_bands)`` of the power spectrum."""
    mag = stft_magnitude_tensor(x, cfg.fft_size, cfg.hop_size, cfg.win_length)
    mel = (mag * mag) @ mel_matrix_tensor(sample_rate, cfg, x.dtype).T
    return torch.log(torch.clamp(mel, min=LOG_FLOOR))


def stft_magnitude(buf: AudioBuffer, cfg: SpectrogramConfig) -> MagnitudeSpectrogram:
    x = torch.from_numpy(buf.samples.astype(np.float64))
    mag = stft_magnitude_tensor(x, cfg.fft_size, cfg.hop_size, cfg.win_length)
    return MagnitudeSpectrogram(mag.numpy(), cfg)


def mel_spectrogram(buf: AudioBuffer, cfg: SpectrogramConfig | None = None) -> MelSpectrogram:
    cfg = cfg or SpectrogramConfig()
    if cfg.mel_bands < 1:
        raise ConfigError("mel_spectrogram needs mel_bands >= 1")
    x = torch.from_numpy(buf.samples.astype(np.float64))
    return MelSpectrogram(log_mel_tensor(x, cfg, buf.sample_rate).numpy(), cfg)


# ---------------------------------------------------------------- F0 -----


def interpolate_f0(track: F0Track, target_len: int | None = None) -> np.ndarray:
    """Upsample frame F0 to one value per sample.

    Frame ``k`` covers samples ``[k*hop, (k+1)*hop)`` and sits at their centre.
    Between two voiced frames the value is linear; a sample whose own frame is
    unvoiced is exactly 0, and a voiced frame next to an unvoiced one holds its
    value up to the boundary.
    """
    f = track.frame_f0
    n_frames = len(f)
    if n_frames == 0:
        raise ValueError("empty F0 track")
    hop = track.hop_size
    if target_len is None:
        target_len = n_frames * hop
    t = np.arange(target_len)
    own = np.minimum(t // hop, n_frames - 1)
    u = (t + 0.5) / hop - 0.5
    lo = np.clip(np.floor(u).astype(np.int64), 0, n_frames - 1)
    hi = np.minimum(lo + 1, n_frames - 1)
    frac = np.clip(u - lo, 0.0, 1.0)
    both = (f[lo] > 0) & (f[hi] > 0)
    out = np.where(both, (1.0 - frac) * f[lo] + frac * f[hi], f[own])
    out[f[own] <= 0] = 0.0
    return out


F0_WINDOW = 2048


def estimate_f0(
    buf: AudioBuffer,
    hop: int = 128,
    fmin: float = 40.0,
    fmax: float = 1000.0,
    voicing_threshold: float = 0.3,
    octave_cost: float = 0.01,
) -> F0Track:
    """Per-frame autocorrelation pitch estimate.

    Each frame is a Hann-windowed 2048-sample excerpt centred on ``k * hop``;
    its autocorrelation is divided by the window's own autocorrelation so
    periodic signals score close to 1 at their period. The strongest peak in
    the allowed lag range wins, with a small per-octave penalty on long lags
    to avoid picking sub-harmonics. Peaks below ``voicing_threshold`` are
    reported as unvoiced (0 Hz).
    """
    x = buf.samples.astype(np.float64)
    n = len(x)
    if n < F0_WINDOW:
        raise ValueError(f"estimate_f0 needs at least {F0_WINDOW} samples, got {n}")
    sr = buf.sample_rate
    n_frames = n // hop + 1
    half = F0_WINDOW // 2
    padded = np.concatenate([np.zeros(half), x, np.zeros(half + hop)])
    starts = np.arange(n_frames) * hop
    frames = padded[starts[:, None] + np.arange(F0_WINDOW)[None, :]]
    frames = frames - frames.mean(axis=1, keepdims=True)
    window = np.hanning(F0_WINDOW + 2)[1:-1]
    nfft = 2 * F0_WINDOW
    r_x = np.fft.irfft(np.abs(np.fft.rfft(frames * window, nfft)) ** 2, nfft)[:, :F0_WINDOW]
    r_w = np.fft.irfft(np.abs(np.fft.rfft(window, nfft)) ** 2, nfft)[:F0_WINDOW]
    lag_lo = int(np.floor(sr / fmax))
    lag_hi = min(int(np.ceil(sr / fmin)), F0_WINDOW // 2)
    energy = r_x[:, :1]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(energy > 1e-12, (r_x / energy) / (r_w / r_w[0]), 0.0)

    f0 = np.zeros(n_frames)
    lags = np.arange(lag_lo, lag_hi + 1)
    seg = r[:, lag_lo - 1 : lag_hi + 2]
    mid = seg[:, 1:-1]
    is_peak = (mid >= seg[:, :-2]) & (mid > seg[:, 2:])
    score = np.where(is_peak, mid - octave_cost * np.log2(lags * fmin / sr), -np.inf)
    best = np.argmax(score, axis=1)
    for k in range(n_frames):
        j = best[k]
        if not np.isfinite(score[k, j]) or mid[k, j] < voicing_threshold:
            continue
        a, b, c = seg[k, j], seg[k, j + 1], seg[k, j + 2]
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom < 0 else 0.0
        freq = sr / (lags[j] + np.clip(shift, -0.5, 0.5))
        if fmin <= freq <= fmax:
            f0[k] = freq
    return F0Track(f0, hop, sr)
