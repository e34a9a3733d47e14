"""Hyperparameters for the whole engine.

Everything lives in frozen dataclasses grouped by section. The on-disk form is a
flat ``section.key = value`` text file; a missing file or an empty file gives
the full-size defaults.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Mapping


class ConfigError(ValueError):
    """Invalid configuration value or inconsistent combination of values."""


@dataclass(frozen=True)
class SpectrogramConfig:
    fft_size: int = 512
    hop_size: int = 128
    win_length: int = 512
    window: str = "hann"
    mel_bands: int = 80
    fmin: float = 0.0
    fmax: float = 12000.0

    def __post_init__(self):
        if self.window != "hann":
            raise ConfigError(f"unsupported window {self.window!r}")
        if not (0 < self.hop_size <= self.win_length <= self.fft_size):
            raise ConfigError(
                "need 0 < hop_size <= win_length <= fft_size, got "
                f"hop={self.hop_size} win={self.win_length} fft={self.fft_size}"
            )
        if not (0 <= self.mel_bands <= self.fft_size // 2 + 1):
            raise ConfigError(f"mel_bands={self.mel_bands} exceeds fft_size/2+1")
        if not (0.0 <= self.fmin < self.fmax):
            raise ConfigError(f"need 0 <= fmin < fmax, got {self.fmin}, {self.fmax}")


@dataclass(frozen=True)
class ExcitationConfig:
    num_harmonics: int = 8
    sample_rate: int = 24000
    sine_amplitude: float = 0.1
    noise_sigma: float = 0.003
    phase_seed: int = 0
    noise_seed: int = 1

    def __post_init__(self):
        if self.num_harmonics < 1:
            raise ConfigError("num_harmonics must be >= 1")
        if self.sine_amplitude <= 0 or self.noise_sigma <= 0:
            raise ConfigError("sine_amplitude and noise_sigma must be positive")
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")


@dataclass(frozen=True)
class PqmfConfig:
    num_bands: int = 4
    taps: int = 62
    kaiser_beta: float = 9.0
    # chosen by scripts/tune_pqmf_cutoff.py
    cutoff_ratio: float = 0.142


@dataclass(frozen=True)
class GeneratorConfig:
    residual_channels: int = 64
    kernel: int = 5
    blocks: int = 3
    layers_per_block: int = 10
    mel_upsample: tuple[int, ...] = (8, 4, 4)
    f0_upsample: int = 128
    num_harmonics: int = 8
    mel_bands: int = 80
    leaky_slope: float = 0.2
    # fixed affine map of the log-mel input, (mel + offset) / scale
    mel_offset: float = 5.0
    mel_scale: float = 5.0

    @property
    def dilations(self) -> tuple[int, ...]:
        return tuple(2**i for i in range(self.layers_per_block))

    def __post_init__(self):
        prod = 1
        for u in self.mel_upsample:
            prod *= u
        if prod != self.f0_upsample:
            raise ConfigError(
                f"generator.mel_upsample product {prod} != generator.f0_upsample {self.f0_upsample}"
            )
        if self.kernel % 2 != 1:
            raise ConfigError("generator.kernel must be odd for same padding")
        if self.mel_scale <= 0:
            raise ConfigError("generator.mel_scale must be positive")
        if min(self.residual_channels, self.blocks, self.layers_per_block) < 1:
            raise ConfigError("generator sizes must be positive")


@dataclass(frozen=True)
class DiscriminatorConfig:
    global_layers: int = 10
    global_kernel: int = 3
    channels: int = 64
    local_kernels: tuple[int, ...] = (5, 5, 7, 7)
    local_layers: tuple[int, ...] = (8, 8, 6, 6)
    leaky_slope: float = 0.2
    num_bands: int = 4

    def __post_init__(self):
        if len(self.local_kernels) != self.num_bands or len(self.local_layers) != self.num_bands:
            raise ConfigError(
                "discriminator.local_kernels and discriminator.local_layers must have "
                f"discriminator.num_bands={self.num_bands} entries"
            )
        if any(k % 2 != 1 for k in (self.global_kernel, *self.local_kernels)):
            raise ConfigError("discriminator kernels must be odd")
        if min(self.global_layers, *self.local_layers) < 2:
            raise ConfigError("each discriminator needs at least 2 layers")


@dataclass(frozen=True)
class Resolution:
    fft_size: int
    hop_size: int
    win_length: int

    def spec(self, mel_bands: int = 0, fmax: float = 12000.0) -> SpectrogramConfig:
        return SpectrogramConfig(
            fft_size=self.fft_size,
            hop_size=self.hop_size,
            win_length=self.win_length,
            mel_bands=mel_bands,
            fmax=fmax,
        )


@dataclass(frozen=True)
class LossConfig:
    stft_resolutions: tuple[Resolution, ...] = (
        Resolution(512, 50, 240),
        Resolution(1024, 120, 600),
        Resolution(2048, 240, 1200),
    )
    mel_resolutions: tuple[Resolution, ...] = (
        Resolution(2048, 270, 1080),
        Resolution(4096, 540, 2160),
    )
    mel_bands: int = 80
    aux_lambda: float = 0.5
    adv_lambda: float = 4.0
    fm_lambda: float = 10.0
    num_discriminators: int = 5
    fm_include_global: bool = False

    def __post_init__(self):
        if min(self.aux_lambda, self.adv_lambda, self.fm_lambda) < 0:
            raise ConfigError("loss weights must be non-negative")
        for r in (*self.stft_resolutions, *self.mel_resolutions):
            r.spec()


@dataclass(frozen=True)
class TrainConfig:
    segment_len: int = 8192
    batch: int = 4
    total_steps: int = 3000
    disc_start_step: int = 500
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9
    optimizer: str = "radam"
    seed: int = 0
    log_every: int = 1

    def __post_init__(self):
        if self.segment_len % 128 != 0:
            raise ConfigError("train.segment_len must be a multiple of 128")
        if self.disc_start_step > self.total_steps:
            raise ConfigError("train.disc_start_step must not exceed train.total_steps")
        if self.optimizer not in ("radam", "adam"):
            raise ConfigError("train.optimizer must be 'radam' or 'adam'")


@dataclass(frozen=True)
class EngineConfig:
    sample_rate: int = 24000
    hop: int = 128
    mel_bands: int = 80
    features: SpectrogramConfig = field(default_factory=SpectrogramConfig)
    excitation: ExcitationConfig = field(default_factory=ExcitationConfig)
    pqmf: PqmfConfig = field(default_factory=PqmfConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        checks = [
            (self.generator.f0_upsample == self.hop, "generator.f0_upsample", "hop"),
            (self.features.hop_size == self.hop, "features.hop_size", "hop"),
            (self.excitation.sample_rate == self.sample_rate, "excitation.sample_rate", "sample_rate"),
            (self.features.mel_bands == self.mel_bands, "features.mel_bands", "mel_bands"),
            (self.generator.mel_bands == self.mel_bands, "generator.mel_bands", "mel_bands"),
            (
                self.generator.num_harmonics == self.excitation.num_harmonics,
                "generator.num_harmonics",
                "excitation.num_harmonics",
            ),
            (
                self.loss.num_discriminators == 1 + self.pqmf.num_bands,
                "loss.num_discriminators",
                "pqmf.num_bands",
            ),
            (
                self.discriminator.num_bands == self.pqmf.num_bands,
                "discriminator.num_bands",
                "pqmf.num_bands",
            ),
            (self.train.segment_len % self.hop == 0, "train.segment_len", "hop"),
        ]
        for ok, a, b in checks:
            if not ok:
                raise ConfigError(f"inconsistent config: {a}={_lookup(self, a)!r} vs {b}={_lookup(self, b)!r}")


_SECTIONS = ("features", "excitation", "pqmf", "generator", "discriminator", "loss", "train")


def _lookup(cfg: EngineConfig, dotted: str) -> Any:
    obj: Any = cfg
    for part in dotted.split("."):
        obj = getattr(obj, part)
    return obj


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if value and isinstance(value[0], Resolution):
            return ";".join(f"{r.fft_size}/{r.hop_size}/{r.win_length}" for r in value)
        return ",".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(text: str, like: Any, key: str) -> Any:
    text = text.strip()
    try:
        if isinstance(like, bool):
            if text.lower() not in ("true", "false", "1", "0"):
                raise ValueError(text)
            return text.lower() in ("true", "1")
        if isinstance(like, int):
            return int(text)
        if isinstance(like, float):
            return float(text)
        if isinstance(like, tuple):
            if like and isinstance(like[0], Resolution):
                out = []
                for item in text.split(";"):
                    a, b, c = (int(v) for v in item.split("/"))
                    out.append(Resolution(a, b, c))
                return tuple(out)
            return tuple(int(v) for v in text.split(",") if v.strip())
        return text
    except ValueError as err:
        raise ConfigError(f"cannot parse {key}={text!r}") from err


def to_flat(cfg: EngineConfig) -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            for sub in fields(value):
                flat[f"{f.name}.{sub.name}"] = getattr(value, sub.name)
        else:
            flat[f.name] = value
    return flat


def valid_keys() -> list[str]:
    return list(to_flat(EngineConfig()))


def with_overrides(cfg: EngineConfig, overrides: Mapping[str, str]) -> EngineConfig:
    """Apply ``key -> text`` overrides and re-validate the result."""
    flat = to_flat(cfg)
    unknown = [k for k in overrides if k not in flat]
    if unknown:
        raise ConfigError(f"unknown config key(s) {unknown}; valid keys: {', '.join(flat)}")
    top: dict[str, Any] = {}
    sections: dict[str, dict[str, Any]] = {s: {} for s in _SECTIONS}
    for key, text in overrides.items():
        value = _parse(text, flat[key], key)
        if "." in key:
            sec, name = key.split(".", 1)
            sections[sec][name] = value
        else:
            top[key] = value
    kwargs = dict(top)
    for sec, changes in sections.items():
        if changes:
            kwargs[sec] = replace(getattr(cfg, sec), **changes)
    return replace(cfg, **kwargs)


def parse_lines(lines: Iterable[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path: str | Path | None = None, overrides: Mapping[str, str] | None = None) -> EngineConfig:
    """Load a key=value file on top of the defaults, then apply ``overrides``."""
    settings: dict[str, str] = {}
    if path is not None:
        settings.update(parse_lines(Path(path).read_text().splitlines()))
    if overrides:
        settings.update(overrides)
    cfg = EngineConfig()
    return with_overrides(cfg, settings) if settings else cfg


def loads_config(text: str) -> EngineConfig:
    return with_overrides(EngineConfig(), parse_lines(text.splitlines()))


def serialize(cfg: EngineConfig) -> str:
    return "".join(f"{k} = {_format(v)}\n" for k, v in to_flat(cfg).items())


def config_hash(cfg: EngineConfig) -> str:
    return hashlib.sha256(serialize(cfg).encode()).hexdigest()


DESK_OVERRIDES = {
    "generator.residual_channels": "16",
    "discriminator.channels": "16",
    "train.batch": "1",
}


def desk_config(**overrides: str) -> EngineConfig:
    """Reduced-width model for single-core training runs.

    Keeps the generator and discriminator topology (blocks, layers, kernels,
    dilations) and shrinks only the channel width.
    """
    return with_overrides(EngineConfig(), {**DESK_OVERRIDES, **overrides})


def with_seed(cfg: EngineConfig, seed: int) -> EngineConfig:
    """Route one seed to training (``seed``) and excitation (``seed``, ``seed + 1``)."""
    return with_overrides(
        cfg,
        {"train.seed": str(seed), "excitation.phase_seed": str(seed), "excitation.noise_seed": str(seed + 1)},
    )
