"""Overfit-one-clip smoke run shared by the acceptance suite and ``scripts/``."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .audio import AudioBuffer
from .config import EngineConfig, desk_config
from .data import Clip, make_synthetic_dataset
from .evaluation import mcd
from .generator import Generator, generate
from .losses import LossBreakdown
from .trainer import TrainState, csv_header, csv_row, init_state, save_checkpoint, state_tensors, train


@dataclass
class SmokeResult:
    config: EngineConfig
    trace: list[tuple[int, LossBreakdown]] = field(default_factory=list)
    mcd_initial: float = float("nan")
    mcd_final: float = float("nan")
    seconds: float = 0.0
    state: TrainState | None = None

    def aux_at(self, step: int) -> float:
        return self.trace[step - 1][1].aux

    def csv(self) -> str:
        return csv_header() + "".join(csv_row(s, b) for s, b in self.trace)

    def all_finite(self) -> bool:
        return all(not b.nonfinite_terms() for _, b in self.trace)

    def state_finite(self) -> bool:
        """Parameters and optimiser moments of the final state are all finite."""
        return all(np.isfinite(v).all() for v in state_tensors(self.state).values())


def vocode_clip(gen: Generator, clip: Clip, cfg: EngineConfig) -> AudioBuffer:
    """Vocode with the configured (fixed) excitation seeds."""
    return generate(clip.mel, clip.f0, gen, cfg.excitation)


def overfit_smoke(
    cfg: EngineConfig | None = None,
    seconds: float = 2.0,
    data_seed: int = 0,
    steps: int | None = None,
    on_step: Callable[[int, LossBreakdown], None] | None = None,
    snapshot: tuple[int, str | Path] | None = None,
) -> SmokeResult:
    """Train on one synthetic clip and compare MCD before and after.

    ``snapshot=(step, path)`` saves the full training state after that step.
    """
    cfg = cfg or desk_config()
    clip = make_synthetic_dataset(1, seconds, seed=data_seed, spec=cfg.features, sample_rate=cfg.sample_rate)[0]
    state = init_state(cfg)
    res = SmokeResult(cfg, state=state)
    res.mcd_initial = mcd(clip.audio, vocode_clip(state.generator, clip, cfg))

    def record(step, b):
        res.trace.append((step, b))
        if snapshot is not None and step == snapshot[0]:
            save_checkpoint(state, snapshot[1])
        if on_step is not None:
            on_step(step, b)

    t0 = time.perf_counter()
    train(state, [clip], cfg.train.total_steps if steps is None else steps, record)
    res.seconds = time.perf_counter() - t0
    res.mcd_final = mcd(clip.audio, vocode_clip(state.generator, clip, cfg))
    return res


def aux_ratio(res: SmokeResult, early: int = 100, late: int | None = None) -> float:
    late = late or len(res.trace)
    return res.aux_at(late) / res.aux_at(early)


def finite_fraction(res: SmokeResult) -> float:
    return float(np.mean([not b.nonfinite_terms() for _, b in res.trace]))


def benchmark_inference(seconds: float = 1.0, repeats: int = 3, cfg: EngineConfig | None = None) -> float:
    """Single-threaded generator throughput in output samples per second (best of ``repeats``)."""
    import torch

    cfg = cfg or EngineConfig()
    frames = int(round(seconds * cfg.sample_rate / cfg.hop))
    gen = Generator(cfg.generator, seed=cfg.train.seed).eval()
    mel = torch.full((1, cfg.mel_bands, frames), -5.0)
    exc = torch.zeros(1, cfg.excitation.num_harmonics, frames * cfg.hop)
    threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        best = float("inf")
        with torch.inference_mode():
            gen(mel[..., :2], exc[..., : 2 * cfg.hop])
            for _ in range(repeats):
                t0 = time.perf_counter()
                gen(mel, exc)
                best = min(best, time.perf_counter() - t0)
    finally:
        torch.set_num_threads(threads)
    return frames * cfg.hop / best
