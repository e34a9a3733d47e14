"""Full-band and sub-band convolutional discriminators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .audio import AudioBuffer
from .config import DiscriminatorConfig, PqmfConfig
from .layers import Conv1d, count_parameters, init_parameters, leaky_relu
from .pqmf import PqmfBank, bank_from_config


@dataclass
class DiscriminatorOutput:
    scores: torch.Tensor  # (B, T') per-step predictions
    features: list[torch.Tensor]  # one map per layer; the last is the score map


class ConvStack(nn.Module):
    """``layers - 1`` dilated convolutions (dilation 1, 2, ...) then a 1x1 scorer."""

    def __init__(self, layers: int, kernel: int, channels: int, slope: float):
        super().__init__()
        self.slope = slope
        chans = [1] + [channels] * (layers - 1)
        self.convs = nn.ModuleList(
            Conv1d(cin, cout, kernel, dilation=i + 1) for i, (cin, cout) in enumerate(zip(chans[:-1], chans[1:]))
        )
        self.score = Conv1d(channels, 1, 1)
        self.kernel = kernel

    @property
    def receptive_field(self) -> int:
        return 1 + sum((self.kernel - 1) * c.dilation for c in self.convs)

    def forward(self, x) -> DiscriminatorOutput:
        feats = []
        for conv in self.convs:
            x = leaky_relu(conv(x), self.slope)
            feats.append(x)
        s = self.score(x)
        feats.append(s)
        return DiscriminatorOutput(s[:, 0], feats)


class MultiBandDiscriminator(nn.Module):
    """Global discriminator on the waveform plus one local discriminator per PQMF band."""

    def __init__(
        self,
        cfg: DiscriminatorConfig | None = None,
        bank: PqmfBank | None = None,
        seed: int = 1,
    ):
        super().__init__()
        self.cfg = cfg = cfg or DiscriminatorConfig()
        self.bank = bank or bank_from_config(PqmfConfig(num_bands=cfg.num_bands))
        if self.bank.num_bands != cfg.num_bands:
            raise ValueError("PQMF band count differs from discriminator.num_bands")
        self.global_disc = ConvStack(cfg.global_layers, cfg.global_kernel, cfg.channels, cfg.leaky_slope)
        self.local_discs = nn.ModuleList(
            ConvStack(n, k, cfg.channels, cfg.leaky_slope) for k, n in zip(cfg.local_kernels, cfg.local_layers)
        )
        init_parameters(self, seed)

    @property
    def min_length(self) -> int:
        k = self.cfg.num_bands
        return max(self.global_disc.receptive_field, *(k * d.receptive_field for d in self.local_discs))

    def forward(self, wav) -> list[DiscriminatorOutput]:
        """``wav`` (B, 1, T) -> ``1 + num_bands`` outputs, global first."""
        if wav.dim() == 2:
            wav = wav[:, None]
        if wav.shape[-1] < self.min_length:
            raise ValueError(f"waveform of {wav.shape[-1]} samples is shorter than the discriminator span {self.min_length}")
        outs = [self.global_disc(wav)]
        bands = self.bank.analyze_tensor(wav)
        for k, disc in enumerate(self.local_discs):
            outs.append(disc(bands[:, k : k + 1]))
        return outs


def discriminate(wav, disc: MultiBandDiscriminator) -> list[DiscriminatorOutput]:
    """Score an :class:`AudioBuffer`, array or ``(B, [1,] T)`` tensor."""
    if isinstance(wav, AudioBuffer):
        wav = wav.samples
    if not isinstance(wav, torch.Tensor):
        wav = torch.from_numpy(np.asarray(wav, dtype=np.float32))
    if wav.dim() == 1:
        wav = wav[None]
    return disc(wav)


def discriminator_param_count(disc: MultiBandDiscriminator) -> int:
    return count_parameters(disc)
