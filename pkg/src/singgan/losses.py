"""Training objectives.

Conventions: ``x`` is the reference waveform and ``y`` the generated one, both
tensors of shape ``(B, T)`` or ``(T,)``. Discriminator outputs are lists of
:class:`~singgan.discriminators.DiscriminatorOutput` (global first) or plain
lists of score tensors; a discriminator's prediction for a clip is the time
mean of its per-step scores.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import torch

from .audio import LOG_FLOOR, mel_matrix_tensor, stft_magnitude_tensor
from .config import LossConfig, Resolution, SpectrogramConfig

log = logging.getLogger(__name__)

SC_FLOOR = 1e-8


@dataclass
class LossBreakdown:
    stft_sc: float = 0.0
    stft_mag: float = 0.0
    mel_sc: float = 0.0
    mel_mag: float = 0.0
    aux: float = 0.0
    adv_g: float = 0.0
    adv_d: float = 0.0
    fm: float = 0.0
    total_g: float = 0.0
    total_d: float = 0.0

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    def lines(self) -> str:
        return "".join(f"{k}={v:.6f}\n" for k, v in self.as_dict().items())

    def nonfinite_terms(self) -> list[str]:
        return [k for k, v in self.as_dict().items() if not math.isfinite(v)]


def _batched(x: torch.Tensor) -> torch.Tensor:
    if x.dim() == 3:
        x = x[:, 0]
    return x[None] if x.dim() == 1 else x


def spectral_pair(mag_x: torch.Tensor, mag_y: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Spectral convergence and mean absolute log-magnitude difference, batch-averaged."""
    dims = tuple(range(1, mag_x.dim()))
    ref = torch.linalg.vector_norm(mag_x, dim=dims)
    if bool((ref < SC_FLOOR).any()):
        log.warning("spectral convergence reference is silent; denominator floored at %g", SC_FLOOR)
    sc = torch.linalg.vector_norm(mag_x - mag_y, dim=dims) / ref.clamp(min=SC_FLOOR)
    log_diff = torch.log(mag_x.clamp(min=LOG_FLOOR)) - torch.log(mag_y.clamp(min=LOG_FLOOR))
    mag = log_diff.abs().mean(dim=dims)
    return sc.mean(), mag.mean()


def stft_loss_single(x, y, res: Resolution):
    x, y = _batched(x), _batched(y)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch {tuple(x.shape)} vs {tuple(y.shape)}")
    mx = stft_magnitude_tensor(x, res.fft_size, res.hop_size, res.win_length)
    my = stft_magnitude_tensor(y, res.fft_size, res.hop_size, res.win_length)
    return spectral_pair(mx, my)


def mel_magnitude(x, res: Resolution, mel_bands: int = 80, sample_rate: int = 24000):
    """Mel-filtered STFT magnitude (not power, not log)."""
    spec = SpectrogramConfig(res.fft_size, res.hop_size, res.win_length, mel_bands=mel_bands, fmax=sample_rate / 2)
    mag = stft_magnitude_tensor(x, res.fft_size, res.hop_size, res.win_length)
    return mag @ mel_matrix_tensor(sample_rate, spec, x.dtype).T


def mel_loss_single(x, y, res: Resolution, mel_bands: int = 80, sample_rate: int = 24000):
    x, y = _batched(x), _batched(y)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch {tuple(x.shape)} vs {tuple(y.shape)}")
    return spectral_pair(mel_magnitude(x, res, mel_bands, sample_rate), mel_magnitude(y, res, mel_bands, sample_rate))


def _mean_terms(pairs):
    sc = torch.stack([p[0] for p in pairs]).mean()
    mag = torch.stack([p[1] for p in pairs]).mean()
    return sc, mag


def stft_terms(x, y, cfg: LossConfig):
    return _mean_terms([stft_loss_single(x, y, r) for r in cfg.stft_resolutions])


def mel_terms(x, y, cfg: LossConfig, sample_rate: int = 24000):
    return _mean_terms([mel_loss_single(x, y, r, cfg.mel_bands, sample_rate) for r in cfg.mel_resolutions])


def multi_res_stft(x, y, cfg: LossConfig | None = None):
    sc, mag = stft_terms(x, y, cfg or LossConfig())
    return sc + mag


def multi_res_mel(x, y, cfg: LossConfig | None = None, sample_rate: int = 24000):
    sc, mag = mel_terms(x, y, cfg or LossConfig(), sample_rate)
    return sc + mag


def aux_loss(x, y, cfg: LossConfig | None = None, sample_rate: int = 24000):
    cfg = cfg or LossConfig()
    return multi_res_mel(x, y, cfg, sample_rate) + cfg.aux_lambda * multi_res_stft(x, y, cfg)


def _scores(outs) -> list[torch.Tensor]:
    return [o.scores if hasattr(o, "scores") else torch.as_tensor(o) for o in outs]


def _clip_mean(s: torch.Tensor) -> torch.Tensor:
    return s.mean(dim=-1) if s.dim() else s


def adv_loss_d(real_outs, fake_outs) -> torch.Tensor:
    """Sum over discriminators of ``(1 - D(x))^2 + D(y)^2``."""
    real, fake = _scores(real_outs), _scores(fake_outs)
    if len(real) != len(fake):
        raise ValueError("real and fake outputs cover different discriminators")
    terms = [((1 - _clip_mean(r)) ** 2 + _clip_mean(f) ** 2).mean() for r, f in zip(real, fake)]
    return torch.stack(terms).sum()


def adv_loss_g(fake_outs) -> torch.Tensor:
    """Mean over discriminators of ``(1 - D(y))^2``."""
    terms = [((1 - _clip_mean(f)) ** 2).mean() for f in _scores(fake_outs)]
    return torch.stack(terms).mean()


def _features(outs) -> list[list[torch.Tensor]]:
    return [list(o.features) if hasattr(o, "features") else list(o) for o in outs]


def feature_matching(real_outs, fake_outs, include_global: bool = False) -> torch.Tensor:
    """Sum of mean-absolute feature differences over sub-band discriminators.

    Every map of every local discriminator contributes its own mean L1
    distance. ``include_global`` also counts the full-band discriminator.
    """
    real, fake = _features(real_outs), _features(fake_outs)
    if len(real) != len(fake):
        raise ValueError("real and fake outputs cover different discriminators")
    total = None
    for k, (fr, ff) in enumerate(zip(real, fake)):
        if k == 0 and not include_global:
            continue
        if len(fr) != len(ff):
            raise ValueError(f"discriminator {k}: {len(fr)} real vs {len(ff)} fake feature maps")
        for a, b in zip(fr, ff):
            term = (a.detach() - b).abs().mean()
            total = term if total is None else total + term
    if total is None:
        return torch.zeros(())
    return total


def generator_loss(
    x,
    y,
    cfg: LossConfig | None = None,
    real_outs: Sequence | None = None,
    fake_outs: Sequence | None = None,
    sample_rate: int = 24000,
) -> tuple[torch.Tensor, LossBreakdown]:
    """``L_aux + adv_lambda * L_adv(G) + fm_lambda * L_fm``.

    Without discriminator outputs (warm-up) the objective is ``L_aux`` alone
    and the adversarial fields of the breakdown are exactly 0.
    """
    cfg = cfg or LossConfig()
    stft_sc, stft_mag = stft_terms(x, y, cfg)
    mel_sc, mel_mag = mel_terms(x, y, cfg, sample_rate)
    aux = (mel_sc + mel_mag) + cfg.aux_lambda * (stft_sc + stft_mag)
    b = LossBreakdown(
        stft_sc=stft_sc.item(), stft_mag=stft_mag.item(), mel_sc=mel_sc.item(), mel_mag=mel_mag.item()
    )
    b.aux = (b.mel_sc + b.mel_mag) + cfg.aux_lambda * (b.stft_sc + b.stft_mag)
    total = aux
    if fake_outs is not None:
        if real_outs is None:
            raise ValueError("feature matching needs the reference outputs too")
        adv = adv_loss_g(fake_outs)
        fm = feature_matching(real_outs, fake_outs, cfg.fm_include_global)
        total = aux + cfg.adv_lambda * adv + cfg.fm_lambda * fm
        b.adv_g, b.fm = adv.item(), fm.item()
    b.total_g = b.aux + cfg.adv_lambda * b.adv_g + cfg.fm_lambda * b.fm
    return total, b


def discriminator_loss(real_outs, fake_outs) -> tuple[torch.Tensor, LossBreakdown]:
    loss = adv_loss_d(real_outs, fake_outs)
    v = loss.item()
    return loss, LossBreakdown(adv_d=v, total_d=v)
