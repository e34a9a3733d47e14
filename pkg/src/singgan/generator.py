"""Source-filter generator: harmonic excitation shaped by gated dilated convolutions."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from .audio import AudioBuffer, F0Track, MelSpectrogram, interpolate_f0
from .config import ExcitationConfig, GeneratorConfig
from .excitation import generate_excitation
from .layers import Conv1d, ConvTranspose1d, ShapeError, gau, init_parameters, leaky_relu


class ConditionUpsampler(nn.Module):
    """Log-mel frames to waveform rate through transposed convolutions."""

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        chans = [cfg.mel_bands] + [cfg.residual_channels] * len(cfg.mel_upsample)
        self.stages = nn.ModuleList(
            ConvTranspose1d(cin, cout, u) for cin, cout, u in zip(chans[:-1], chans[1:], cfg.mel_upsample)
        )
        self.slope = cfg.leaky_slope
        self.offset, self.scale = cfg.mel_offset, cfg.mel_scale

    def forward(self, mel):
        x = (mel + self.offset) / self.scale
        for i, stage in enumerate(self.stages):
            if i:
                x = leaky_relu(x, self.slope)
            x = stage(x)
        return x


class ResidualLayer(nn.Module):
    def __init__(self, channels: int, kernel: int, dilation: int):
        super().__init__()
        self.dilated = Conv1d(channels, 2 * channels, kernel, dilation)
        self.cond = Conv1d(channels, 2 * channels, 1)
        self.out = Conv1d(channels, channels, 1)

    def forward(self, h, cond):
        z = gau(self.dilated(h), self.cond(cond))
        return self.out(z)


class AFLBlock(nn.Module):
    """Stack of gated dilated layers; returns the updated hidden state and the skip sum."""

    def __init__(self, channels: int, kernel: int, dilations):
        super().__init__()
        self.layers = nn.ModuleList(ResidualLayer(channels, kernel, d) for d in dilations)

    def forward(self, h, cond):
        if h.shape != cond.shape:
            raise ShapeError(f"hidden {tuple(h.shape)} and condition {tuple(cond.shape)} differ")
        skip = torch.zeros_like(h)
        for layer in self.layers:
            r = layer(h, cond)
            h = h + r
            skip = skip + r
        return h, skip


class Generator(nn.Module):
    def __init__(self, cfg: GeneratorConfig | None = None, seed: int = 0):
        super().__init__()
        self.cfg = cfg = cfg or GeneratorConfig()
        c = cfg.residual_channels
        self.upsampler = ConditionUpsampler(cfg)
        self.source = Conv1d(cfg.num_harmonics, c, 1)
        self.blocks = nn.ModuleList(AFLBlock(c, cfg.kernel, cfg.dilations) for _ in range(cfg.blocks))
        self.skip_scale = (cfg.blocks * cfg.layers_per_block) ** -0.5
        self.post1 = Conv1d(c, c, 1)
        self.post2 = Conv1d(c, 1, 1)
        init_parameters(self, seed)

    def forward(self, mel, excitation):
        """``mel`` (B, bands, F) log-mel, ``excitation`` (B, W, F * hop) -> (B, 1, F * hop)."""
        if mel.dim() != 3 or mel.shape[1] != self.cfg.mel_bands:
            raise ShapeError(f"mel must be (B, {self.cfg.mel_bands}, F), got {tuple(mel.shape)}")
        frames = mel.shape[-1]
        if frames < 1:
            raise ShapeError("need at least one mel frame")
        expected = (mel.shape[0], self.cfg.num_harmonics, frames * self.cfg.f0_upsample)
        if tuple(excitation.shape) != expected:
            raise ShapeError(f"excitation must be {expected}, got {tuple(excitation.shape)}")
        cond = self.upsampler(mel)
        src = self.source(excitation)
        h = torch.zeros_like(src)
        skips = torch.zeros_like(src)
        for block in self.blocks:
            h, s = block(h + src, cond)
            skips = skips + s
        y = self.post1(leaky_relu(skips * self.skip_scale, self.cfg.leaky_slope))
        y = self.post2(leaky_relu(y, self.cfg.leaky_slope))
        return torch.tanh(y)


def receptive_field(cfg: GeneratorConfig | None = None) -> int:
    cfg = cfg or GeneratorConfig()
    return 1 + cfg.blocks * sum((cfg.kernel - 1) * d for d in cfg.dilations)


def upsample_condition(gen: Generator, mel: MelSpectrogram, f0: F0Track):
    """Waveform-rate condition features and sample-level F0."""
    if mel.frames == 0:
        raise ValueError("empty mel spectrogram")
    if mel.frames != len(f0):
        raise ValueError(f"mel has {mel.frames} frames but F0 has {len(f0)}")
    m = torch.from_numpy(np.ascontiguousarray(mel.values.T, dtype=np.float32))[None]
    with torch.no_grad():
        cond = gen.upsampler(m)[0]
    return cond, interpolate_f0(f0, mel.frames * gen.cfg.f0_upsample)


def excitation_tensor(f0_samples, cfg: ExcitationConfig) -> torch.Tensor:
    e = generate_excitation(f0_samples, cfg)
    return torch.from_numpy(np.ascontiguousarray(e.values.T))[None]


def generate(
    mel: MelSpectrogram,
    f0: F0Track,
    gen: Generator,
    excitation_cfg: ExcitationConfig | None = None,
) -> AudioBuffer:
    """Vocode a log-mel / F0 pair into a waveform of ``frames * hop`` samples."""
    excitation_cfg = excitation_cfg or ExcitationConfig(num_harmonics=gen.cfg.num_harmonics)
    if mel.frames == 0:
        raise ValueError("empty mel spectrogram")
    if mel.frames != len(f0):
        raise ValueError(f"mel has {mel.frames} frames but F0 has {len(f0)}")
    f0_samples = interpolate_f0(f0, mel.frames * gen.cfg.f0_upsample)
    exc = excitation_tensor(f0_samples, excitation_cfg)
    m = torch.from_numpy(np.ascontiguousarray(mel.values.T, dtype=np.float32))[None]
    with torch.no_grad():
        y = gen(m, exc)
    return AudioBuffer(y[0, 0].numpy(), excitation_cfg.sample_rate)
