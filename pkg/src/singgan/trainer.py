"""Single-process GAN training loop with warm-up, checkpointing and replayable RNG.

All randomness in a step (clip choice, segment offset, excitation noise and
phases) is drawn from ``numpy.random.default_rng([seed, step])``, so the
trainer needs no RNG state beyond ``(seed, step)`` and a resumed run replays
an unbroken one exactly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import torch

from . import checkpoint
from .audio import F0Track, interpolate_f0
from .config import EngineConfig, ExcitationConfig, loads_config, serialize
from .data import Clip
from .discriminators import MultiBandDiscriminator
from .excitation import generate_excitation
from .generator import Generator
from .losses import LossBreakdown, discriminator_loss, generator_loss
from .pqmf import bank_from_config


class NonFiniteLossError(RuntimeError):
    pass


@dataclass
class Batch:
    wav: torch.Tensor  # (B, T)
    mel: torch.Tensor  # (B, bands, F)
    excitation: torch.Tensor  # (B, W, T)


@dataclass
class TrainState:
    config: EngineConfig
    generator: Generator
    discriminator: MultiBandDiscriminator
    opt_g: torch.optim.Optimizer
    opt_d: torch.optim.Optimizer
    step: int = 0

    @property
    def seed(self) -> int:
        return self.config.train.seed


def _optimizer(params, cfg: EngineConfig) -> torch.optim.Optimizer:
    t = cfg.train
    cls = torch.optim.RAdam if t.optimizer == "radam" else torch.optim.Adam
    return cls(params, lr=t.lr, betas=(t.beta1, t.beta2), eps=t.eps, foreach=False)


def init_state(cfg: EngineConfig) -> TrainState:
    seed = cfg.train.seed
    gen = Generator(cfg.generator, seed=seed)
    disc = MultiBandDiscriminator(cfg.discriminator, bank_from_config(cfg.pqmf), seed=seed + 1)
    return TrainState(cfg, gen, disc, _optimizer(gen.parameters(), cfg), _optimizer(disc.parameters(), cfg))


def step_rng(seed: int, step: int) -> np.random.Generator:
    return np.random.default_rng([seed, step])


def segment_excitation(frame_f0: np.ndarray, cfg: EngineConfig, rng: np.random.Generator) -> np.ndarray:
    track = F0Track(frame_f0, cfg.hop, cfg.sample_rate)
    exc_cfg = ExcitationConfig(
        num_harmonics=cfg.excitation.num_harmonics,
        sample_rate=cfg.sample_rate,
        sine_amplitude=cfg.excitation.sine_amplitude,
        noise_sigma=cfg.excitation.noise_sigma,
        phase_seed=int(rng.integers(2**31)),
        noise_seed=int(rng.integers(2**31)),
    )
    return generate_excitation(interpolate_f0(track, len(frame_f0) * cfg.hop), exc_cfg).values.T


def sample_batch(clips: Sequence[Clip], cfg: EngineConfig, step: int) -> Batch:
    """Uniformly random aligned segments, reproducible from ``(seed, step)``."""
    rng = step_rng(cfg.train.seed, step)
    hop, seg = cfg.hop, cfg.train.segment_len
    frames = seg // hop
    wavs, mels, excs = [], [], []
    for _ in range(cfg.train.batch):
        clip = clips[int(rng.integers(len(clips)))]
        n = len(clip.audio)
        last = min((n - seg) // hop, clip.mel.frames - frames)
        if last < 0:
            raise ValueError(f"clip of {n} samples is shorter than a {seg}-sample segment")
        s = int(rng.integers(last + 1))
        wavs.append(clip.audio.samples[s * hop : s * hop + seg])
        mels.append(clip.mel.values[s : s + frames].T)
        excs.append(segment_excitation(clip.f0.frame_f0[s : s + frames], cfg, rng))
    return Batch(
        torch.from_numpy(np.stack(wavs).astype(np.float32)),
        torch.from_numpy(np.stack(mels).astype(np.float32)),
        torch.from_numpy(np.stack(excs).astype(np.float32)),
    )


def _require_finite(b: LossBreakdown, step: int) -> None:
    bad = b.nonfinite_terms()
    if bad:
        dump = " ".join(f"{k}={v!r}" for k, v in b.as_dict().items())
        raise NonFiniteLossError(f"step {step}: non-finite {', '.join(bad)} ({dump})")


def train_step(state: TrainState, batch: Batch) -> tuple[TrainState, LossBreakdown]:
    """One optimisation step; the discriminator joins at ``train.disc_start_step``."""
    cfg = state.config
    gen, disc = state.generator, state.discriminator
    x = batch.wav
    y = gen(batch.mel, batch.excitation)[:, 0]
    adversarial = state.step >= cfg.train.disc_start_step

    if adversarial:
        disc.requires_grad_(True)
        loss_d, bd_d = discriminator_loss(disc(x[:, None]), disc(y.detach()[:, None]))
        _require_finite(bd_d, state.step)
        state.opt_d.zero_grad()
        loss_d.backward()
        state.opt_d.step()

        disc.requires_grad_(False)
        with torch.no_grad():
            real = disc(x[:, None])
        fake = disc(y[:, None])
        loss_g, bd = generator_loss(x, y, cfg.loss, real, fake, cfg.sample_rate)
        disc.requires_grad_(True)
        bd.adv_d, bd.total_d = bd_d.adv_d, bd_d.total_d
    else:
        loss_g, bd = generator_loss(x, y, cfg.loss, sample_rate=cfg.sample_rate)
    _require_finite(bd, state.step)
    state.opt_g.zero_grad()
    loss_g.backward()
    state.opt_g.step()
    state.step += 1
    return state, bd


CSV_FIELDS = ["step"] + [f.name for f in fields(LossBreakdown)]


def csv_row(step: int, b: LossBreakdown) -> str:
    out = io.StringIO()
    csv.writer(out, lineterminator="\n").writerow([step] + [repr(v) for v in b.as_dict().values()])
    return out.getvalue()


def csv_header() -> str:
    return ",".join(CSV_FIELDS) + "\n"


def train(
    state: TrainState,
    clips: Sequence[Clip],
    steps: int,
    on_step: Callable[[int, LossBreakdown], None] | None = None,
) -> list[LossBreakdown]:
    """Run ``steps`` more steps; ``on_step(step, breakdown)`` sees 1-based step numbers."""
    history = []
    for _ in range(steps):
        batch = sample_batch(clips, state.config, state.step)
        _, b = train_step(state, batch)
        history.append(b)
        if on_step is not None:
            on_step(state.step, b)
    return history


# ---------------------------------------------------------- checkpoints -----


def _module_tensors(prefix: str, module: torch.nn.Module) -> dict[str, np.ndarray]:
    return {f"{prefix}.{k}": v.detach().numpy().copy() for k, v in module.state_dict().items()}


def _optimizer_tensors(prefix: str, opt: torch.optim.Optimizer) -> dict[str, np.ndarray]:
    out = {}
    for idx, st in sorted(opt.state_dict()["state"].items()):
        for key in sorted(st):
            val = st[key]
            out[f"{prefix}.{idx}.{key}"] = torch.as_tensor(val).detach().numpy().copy()
    return out


def state_tensors(state: TrainState) -> dict[str, np.ndarray]:
    t = {}
    t.update(_module_tensors("generator", state.generator))
    t.update(_module_tensors("discriminator", state.discriminator))
    t.update(_optimizer_tensors("opt_g", state.opt_g))
    t.update(_optimizer_tensors("opt_d", state.opt_d))
    return t


def save_checkpoint(state: TrainState, path: str | Path) -> None:
    meta = {"kind": "train_state", "step": state.step, "config": serialize(state.config)}
    checkpoint.save(path, state_tensors(state), meta)


def save_generator(gen: Generator, cfg: EngineConfig, path: str | Path) -> None:
    meta = {"kind": "generator", "config": serialize(cfg)}
    checkpoint.save(path, _module_tensors("generator", gen), meta)


def _load_module(module: torch.nn.Module, prefix: str, tensors: dict[str, np.ndarray]) -> None:
    sd = {k[len(prefix) + 1 :]: torch.from_numpy(v) for k, v in tensors.items() if k.startswith(prefix + ".")}
    module.load_state_dict(sd, strict=True)


def _load_optimizer(opt: torch.optim.Optimizer, prefix: str, tensors: dict[str, np.ndarray]) -> None:
    state: dict[int, dict[str, torch.Tensor]] = {}
    for k, v in tensors.items():
        if not k.startswith(prefix + "."):
            continue
        _, idx, key = k.split(".", 2)
        state.setdefault(int(idx), {})[key] = torch.from_numpy(v.copy())
    sd = opt.state_dict()
    opt.load_state_dict({"state": state, "param_groups": sd["param_groups"]})


def load_checkpoint(path: str | Path) -> TrainState:
    tensors, meta = checkpoint.load(path)
    if meta.get("kind") != "train_state":
        raise checkpoint.CheckpointError(f"{path} is not a training-state checkpoint")
    cfg = loads_config(meta["config"])
    state = init_state(cfg)
    _load_module(state.generator, "generator", tensors)
    _load_module(state.discriminator, "discriminator", tensors)
    _load_optimizer(state.opt_g, "opt_g", tensors)
    _load_optimizer(state.opt_d, "opt_d", tensors)
    state.step = int(meta["step"])
    return state


def load_generator(path: str | Path) -> tuple[Generator, EngineConfig]:
    """Generator weights from either a generator or a training-state checkpoint."""
    tensors, meta = checkpoint.load(path)
    if meta.get("kind") not in ("generator", "train_state"):
        raise checkpoint.CheckpointError(f"{path}: unknown checkpoint kind {meta.get('kind')!r}")
    cfg = loads_config(meta["config"])
    gen = Generator(cfg.generator, seed=cfg.train.seed)
    _load_module(gen, "generator", tensors)
    return gen, cfg


def write_trace(rows: Iterable[tuple[int, LossBreakdown]], path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(csv_header())
        for step, b in rows:
            fh.write(csv_row(step, b))
