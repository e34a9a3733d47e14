"""Singing-voice GAN vocoder: sinusoidal excitation, dilated filter blocks,
sub-band discriminators and multi-resolution spectral objectives."""

from .audio import AudioBuffer, F0Track, MelSpectrogram, estimate_f0, mel_spectrogram, read_wav, write_wav
from .config import EngineConfig, desk_config, load_config
from .discriminators import MultiBandDiscriminator, discriminate
from .evaluation import mcd, plot_spectrogram
from .excitation import generate_excitation
from .generator import Generator, generate, receptive_field
from .pqmf import analyze, design_bank, synthesize

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer",
    "EngineConfig",
    "F0Track",
    "Generator",
    "MelSpectrogram",
    "MultiBandDiscriminator",
    "analyze",
    "desk_config",
    "design_bank",
    "discriminate",
    "estimate_f0",
    "generate",
    "generate_excitation",
    "load_config",
    "mcd",
    "mel_spectrogram",
    "plot_spectrogram",
    "read_wav",
    "receptive_field",
    "synthesize",
    "write_wav",
]
