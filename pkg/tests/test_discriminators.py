import numpy as np
import pytest
import torch

from singgan.audio import AudioBuffer
from singgan.config import ConfigError, DiscriminatorConfig
from singgan.discriminators import MultiBandDiscriminator, discriminate, discriminator_param_count
from singgan.layers import grad_check

DISC = MultiBandDiscriminator()
SMALL = MultiBandDiscriminator(DiscriminatorConfig(channels=4, global_layers=3, local_layers=(3, 3, 2, 2)))


def test_five_outputs_with_layer_count_features():
    outs = DISC(torch.zeros(2, 1, 1024))
    assert len(outs) == 5
    expected = [10, 8, 8, 6, 6]
    assert [len(o.features) for o in outs] == expected
    assert outs[0].scores.shape == (2, 1024)
    assert all(o.scores.shape == (2, 256) for o in outs[1:])


def test_minimum_length():
    # local k=5 stack: 1 + 4 * (1 + ... + 7) = 113 band samples per 4 waveform samples
    assert DISC.min_length == 4 * 113
    DISC(torch.zeros(1, 452))
    with pytest.raises(ValueError, match="shorter"):
        DISC(torch.zeros(1, 451))


def test_param_count():
    c = 64

    def stack(layers, k):
        return (c * k + c) + (layers - 2) * (c * c * k + c) + (c + 1)

    expected = stack(10, 3) + 2 * stack(8, 5) + 2 * stack(6, 7)
    n = discriminator_param_count(DISC)
    assert n == expected
    assert abs(n / 0.5e6 - 1) <= 0.3


def test_scores_finite_on_bounded_input():
    x = torch.from_numpy(np.random.default_rng(0).uniform(-1, 1, (1, 2048)).astype(np.float32))
    for o in DISC(x):
        assert torch.isfinite(o.scores).all()
        assert all(torch.isfinite(f).all() for f in o.features)


def test_discriminate_accepts_audio_buffer():
    buf = AudioBuffer(np.zeros(600, np.float32))
    outs = discriminate(buf, DISC)
    assert outs[0].scores.shape == (1, 600)


def test_config_validation():
    with pytest.raises(ConfigError, match="num_bands"):
        DiscriminatorConfig(local_kernels=(5, 5, 7))
    with pytest.raises(ConfigError):
        DiscriminatorConfig(global_kernel=4)


def test_grad_check_small():
    d = SMALL.double()
    x = torch.randn(1, 1, 160, generator=torch.Generator().manual_seed(0)) * 0.5

    def fn(t):
        return torch.cat([o.scores.reshape(-1) for o in d(t["x"])])

    assert grad_check(fn, {"x": x}) < 1e-4
