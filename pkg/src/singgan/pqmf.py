"""Cosine-modulated pseudo-QMF filter bank.

Both directions filter causally, so a full analysis/synthesis round trip
delays the signal by ``taps`` samples (``taps / 2`` per filter).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from scipy.signal.windows import kaiser

from .audio import AudioBuffer
from .config import ConfigError, PqmfConfig


def design_prototype(taps: int = 62, cutoff_ratio: float = 0.142, beta: float = 9.0) -> np.ndarray:
    """Kaiser-windowed sinc lowpass with ``taps + 1`` symmetric coefficients."""
    if taps <= 0 or taps % 2:
        raise ConfigError("taps must be a positive even number")
    if not 0.0 < cutoff_ratio < 1.0:
        raise ConfigError("cutoff_ratio must lie in (0, 1)")
    n = np.arange(taps + 1) - 0.5 * taps
    omega_c = np.pi * cutoff_ratio
    with np.errstate(invalid="ignore", divide="ignore"):
        ideal = np.sin(omega_c * n) / (np.pi * n)
    ideal[taps // 2] = cutoff_ratio
    proto = ideal * kaiser(taps + 1, beta)
    # exact symmetry; the sinc evaluation above can differ in the last ulp
    return 0.5 * (proto + proto[::-1])


@dataclass(frozen=True)
class PqmfBank:
    num_bands: int
    taps: int
    kaiser_beta: float
    cutoff_ratio: float
    prototype: np.ndarray
    analysis_filters: np.ndarray  # K x (taps + 1)
    synthesis_filters: np.ndarray

    @property
    def delay(self) -> int:
        return self.taps

    def band_length(self, n_samples: int) -> int:
        return -(-n_samples // self.num_bands)

    def analyze_tensor(self, x: torch.Tensor) -> torch.Tensor:
        """``(B, 1, T)`` -> ``(B, K, ceil(T / K))``; differentiable."""
        k = self.num_bands
        t = x.shape[-1]
        pad_end = (-t) % k
        w = torch.from_numpy(self.analysis_filters[:, ::-1].copy()).to(x.dtype).unsqueeze(1)
        x = F.pad(x, (self.taps, pad_end))
        return F.conv1d(x, w, stride=k)

    def synthesize_tensor(self, bands: torch.Tensor) -> torch.Tensor:
        """``(B, K, L)`` -> ``(B, 1, K * L)``; differentiable."""
        k = self.num_bands
        if bands.shape[1] != k:
            raise ValueError(f"expected {k} bands, got {bands.shape[1]}")
        stuff = torch.zeros(k, 1, k, dtype=bands.dtype)
        stuff[:, 0, 0] = float(k)
        up = F.conv_transpose1d(bands, stuff, stride=k, groups=k)
        g = torch.from_numpy(self.synthesis_filters[:, ::-1].copy()).to(bands.dtype).unsqueeze(0)
        return F.conv1d(F.pad(up, (self.taps, 0)), g)


def design_bank(
    num_bands: int = 4, taps: int = 62, kaiser_beta: float = 9.0, cutoff_ratio: float = 0.142
) -> PqmfBank:
    if num_bands < 2:
        raise ConfigError("num_bands must be >= 2")
    if not 0.0 < cutoff_ratio < 1.0 / num_bands:
        raise ConfigError(f"cutoff_ratio must lie in (0, 1/num_bands), got {cutoff_ratio}")
    proto = design_prototype(taps, cutoff_ratio, kaiser_beta)
    n = np.arange(taps + 1) - 0.5 * taps
    analysis = np.empty((num_bands, taps + 1))
    synthesis = np.empty((num_bands, taps + 1))
    for k in range(num_bands):
        arg = (2 * k + 1) * np.pi / (2 * num_bands) * n
        offset = (-1) ** k * np.pi / 4
        analysis[k] = 2 * proto * np.cos(arg + offset)
        synthesis[k] = 2 * proto * np.cos(arg - offset)
    return PqmfBank(num_bands, taps, kaiser_beta, cutoff_ratio, proto, analysis, synthesis)


def bank_from_config(cfg: PqmfConfig) -> PqmfBank:
    return design_bank(cfg.num_bands, cfg.taps, cfg.kaiser_beta, cfg.cutoff_ratio)


def _as_array(x) -> np.ndarray:
    if isinstance(x, AudioBuffer):
        return x.samples.astype(np.float64)
    return np.asarray(x, dtype=np.float64)


def analyze(bank: PqmfBank, buf) -> np.ndarray:
    """Split a waveform into ``K`` decimated sub-bands, shape ``(K, ceil(T/K))``.

    Inputs whose length is not a multiple of ``K`` are zero-padded at the end.
    """
    x = torch.from_numpy(_as_array(buf)).reshape(1, 1, -1)
    return bank.analyze_tensor(x)[0].numpy()


def synthesize(bank: PqmfBank, bands, sample_rate: int = 24000) -> AudioBuffer:
    arr = [np.asarray(b, dtype=np.float64) for b in bands]
    if len(arr) != bank.num_bands:
        raise ValueError(f"expected {bank.num_bands} bands, got {len(arr)}")
    if len({a.shape for a in arr}) != 1 or arr[0].ndim != 1:
        raise ValueError("sub-bands must be 1-D and of equal length")
    y = bank.synthesize_tensor(torch.from_numpy(np.stack(arr))[None])
    return AudioBuffer(y[0, 0].numpy(), sample_rate)


def reconstruction_snr(bank: PqmfBank, x) -> float:
    """SNR in dB of ``synthesize(analyze(x))`` against ``x`` delayed by ``taps``."""
    x = _as_array(x)
    y = bank.synthesize_tensor(bank.analyze_tensor(torch.from_numpy(x).reshape(1, 1, -1)))[0, 0].numpy()
    d = bank.delay
    ref = x[: len(x) - d]
    err = y[d : len(x)] - ref
    return float(10 * np.log10(np.sum(ref**2) / max(np.sum(err**2), 1e-300)))
