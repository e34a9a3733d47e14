import numpy as np
import pytest
import torch
from torch.func import functional_call

from singgan.audio import F0Track, MelSpectrogram
from singgan.config import ConfigError, ExcitationConfig, GeneratorConfig, SpectrogramConfig
from singgan.generator import Generator, generate, receptive_field, upsample_condition
from singgan.layers import ShapeError, count_parameters, grad_check

TINY = GeneratorConfig(residual_channels=4, blocks=2, layers_per_block=3, kernel=3)


def inputs(cfg, frames, batch=1, seed=0):
    g = torch.Generator().manual_seed(seed)
    mel = torch.randn(batch, cfg.mel_bands, frames, generator=g) - 5
    exc = 0.1 * torch.randn(batch, cfg.num_harmonics, frames * cfg.f0_upsample, generator=g)
    return mel, exc


@pytest.mark.parametrize("frames", [1, 2, 5])
def test_output_length_and_range(frames):
    gen = Generator(TINY)
    y = gen(*inputs(TINY, frames, batch=2))
    assert y.shape == (2, 1, frames * 128)
    assert torch.all(y.abs() < 1)


def test_full_parameter_count():
    c, h, bands = 64, 8, 80
    upsampler = bands * c * 16 + c + 2 * (c * c * 8 + c)
    layer = (c * 2 * c * 5 + 2 * c) + (c * 2 * c + 2 * c) + (c * c + c)
    expected = upsampler + (h * c + c) + 30 * layer + (c * c + c) + (c + 1)
    n = count_parameters(Generator())
    assert n == expected
    assert abs(n / 1.59e6 - 1) <= 0.2


def test_receptive_field_formula():
    assert receptive_field() == 12277
    assert receptive_field(TINY) == 1 + 2 * 2 * (1 + 2 + 4)


def test_receptive_field_empirical():
    # gradient of one output sample w.r.t. the excitation spans exactly the receptive field
    gen = Generator(TINY, seed=3).double()
    mel, exc = inputs(TINY, 2)
    exc = exc.double().requires_grad_(True)
    y = gen(mel.double(), exc)
    centre = 128
    y[0, 0, centre].backward()
    nz = np.nonzero(exc.grad[0].abs().sum(0).numpy())[0]
    assert nz.max() - nz.min() + 1 == receptive_field(TINY)
    assert nz.min() == centre - receptive_field(TINY) // 2


def test_seeded_init():
    mel, exc = inputs(TINY, 2)
    a = Generator(TINY, seed=5)(mel, exc)
    b = Generator(TINY, seed=5)(mel, exc)
    c = Generator(TINY, seed=6)(mel, exc)
    assert torch.equal(a, b)
    assert not torch.equal(a, c)


def test_shape_errors():
    gen = Generator(TINY)
    mel, exc = inputs(TINY, 3)
    with pytest.raises(ShapeError):
        gen(mel, exc[..., :-1])
    with pytest.raises(ShapeError):
        gen(mel[:, :40], exc)
    with pytest.raises(ShapeError):
        gen(mel[..., :0], exc[..., :0])


def test_config_upsample_mismatch():
    with pytest.raises(ConfigError, match="f0_upsample"):
        GeneratorConfig(mel_upsample=(8, 4, 2))


def test_generate_lengths_and_errors():
    gen = Generator(TINY)
    mel = MelSpectrogram(np.full((6, 80), -5.0, np.float32), SpectrogramConfig())
    f0 = F0Track(np.array([0, 0, 220, 220, 230, 0], float), 128)
    out = generate(mel, f0, gen, ExcitationConfig())
    assert len(out.samples) == 6 * 128 and out.sample_rate == 24000
    cond, f0s = upsample_condition(gen, mel, f0)
    assert cond.shape == (TINY.residual_channels, 6 * 128) and len(f0s) == 6 * 128
    with pytest.raises(ValueError):
        generate(mel, F0Track(np.zeros(5), 128), gen)
    with pytest.raises(ValueError):
        generate(MelSpectrogram(np.zeros((0, 80), np.float32), SpectrogramConfig()), F0Track(np.zeros(0), 128), gen)


def test_full_generator_grad_check():
    gen = Generator().double()
    mel, exc = inputs(gen.cfg, 4)
    params = {k: v.detach() for k, v in gen.named_parameters()}
    tensors = {"mel": mel, "exc": exc, **{"p." + k: v for k, v in params.items()}}

    def fn(t):
        ps = {k[2:]: v for k, v in t.items() if k.startswith("p.")}
        return functional_call(gen, ps, (t["mel"], t["exc"]))

    assert grad_check(fn, tensors, num_coords=48) < 1e-4
