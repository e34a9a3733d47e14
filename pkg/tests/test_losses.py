import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import reference_pair, reference_stft

from singgan.audio import mel_filterbank
from singgan.config import LossConfig, Resolution
from singgan.discriminators import DiscriminatorOutput
from singgan.layers import grad_check
from singgan.losses import (
    adv_loss_d,
    adv_loss_g,
    aux_loss,
    discriminator_loss,
    feature_matching,
    generator_loss,
    mel_loss_single,
    multi_res_mel,
    multi_res_stft,
    stft_loss_single,
)

CFG = LossConfig()
SR = 24000


def buf(seed, n=4800):
    return torch.from_numpy(np.random.default_rng(seed).uniform(-0.5, 0.5, n))


def test_identity_is_zero():
    for seed in range(5):
        x = buf(seed)
        assert float(multi_res_stft(x, x)) == 0.0
        assert float(multi_res_mel(x, x)) == 0.0


@pytest.mark.parametrize("res", CFG.stft_resolutions)
def test_half_scale(res):
    x = buf(1)
    sc, mag = stft_loss_single(x, 0.5 * x, res)
    assert float(sc) == pytest.approx(0.5, abs=1e-5)
    # log difference is ln 2 wherever both magnitudes clear the floor
    mx = reference_stft(x.numpy(), res.fft_size, res.hop_size, res.win_length)
    clear = (0.5 * mx) > 1e-5
    assert clear.mean() > 0.999
    assert float(mag) == pytest.approx(math.log(2), abs=1e-3)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 2.0), st.integers(0, 1000))
def test_sc_scaling_property(a, seed):
    x = buf(seed, 2400)
    sc, _ = stft_loss_single(x, a * x, Resolution(512, 50, 240))
    assert float(sc) == pytest.approx(abs(1 - a), abs=1e-5)


@pytest.mark.parametrize("res", CFG.stft_resolutions)
def test_stft_terms_match_oracle(res):
    x, y = buf(2), buf(3)
    sc, mag = stft_loss_single(x, y, res)
    rx = reference_stft(x.numpy(), res.fft_size, res.hop_size, res.win_length)
    ry = reference_stft(y.numpy(), res.fft_size, res.hop_size, res.win_length)
    esc, emag = reference_pair(rx, ry)
    assert float(sc) == pytest.approx(esc, abs=1e-6)
    assert float(mag) == pytest.approx(emag, abs=1e-6)


@pytest.mark.parametrize("res", CFG.mel_resolutions)
def test_mel_terms_match_oracle(res):
    x, y = buf(4, 9600), buf(5, 9600)
    sc, mag = mel_loss_single(x, y, res)
    fb = mel_filterbank(SR, res.fft_size, 80, 0.0, SR / 2)
    rx = reference_stft(x.numpy(), res.fft_size, res.hop_size, res.win_length) @ fb.T
    ry = reference_stft(y.numpy(), res.fft_size, res.hop_size, res.win_length) @ fb.T
    esc, emag = reference_pair(rx, ry)
    assert float(sc) == pytest.approx(esc, abs=1e-6)
    assert float(mag) == pytest.approx(emag, abs=1e-6)


def test_multi_resolution_is_mean_and_order_free():
    x, y = buf(6), buf(7)
    singles = [sum(stft_loss_single(x, y, r)) for r in CFG.stft_resolutions]
    assert float(multi_res_stft(x, y)) == pytest.approx(float(sum(singles)) / 3, rel=1e-12)
    flipped = LossConfig(stft_resolutions=CFG.stft_resolutions[::-1])
    assert float(multi_res_stft(x, y, flipped)) == pytest.approx(float(multi_res_stft(x, y)), rel=1e-12)
    mels = [sum(mel_loss_single(x, y, r)) for r in CFG.mel_resolutions]
    assert float(multi_res_mel(x, y)) == pytest.approx(float(sum(mels)) / 2, rel=1e-12)
    assert float(multi_res_mel(x, y)) > 0


def test_aux_combination():
    x, y = buf(8), buf(9)
    expected = float(multi_res_mel(x, y)) + 0.5 * float(multi_res_stft(x, y))
    assert float(aux_loss(x, y)) == pytest.approx(expected, rel=1e-12)
    assert float(aux_loss(x, y, LossConfig(aux_lambda=0.0))) == pytest.approx(float(multi_res_mel(x, y)), rel=1e-12)


def test_silent_reference_is_defined(caplog):
    x = torch.zeros(2400, dtype=torch.float64)
    sc, mag = stft_loss_single(x, buf(0, 2400), Resolution(512, 50, 240))
    assert math.isfinite(float(sc)) and math.isfinite(float(mag))
    assert "floored" in caplog.text


def test_length_mismatch():
    with pytest.raises(ValueError):
        stft_loss_single(buf(0, 1000), buf(0, 999), Resolution(512, 50, 240))


def scores(*values, n=7):
    return [torch.full((1, n), float(v)) for v in values]


def test_adversarial_arithmetic():
    assert float(adv_loss_d(scores(1, 1, 1, 1, 1), scores(0, 0, 0, 0, 0))) == 0.0
    half = scores(0.5, 0.5, 0.5, 0.5, 0.5)
    assert float(adv_loss_d(half, half)) == pytest.approx(2.5)
    assert float(adv_loss_g(scores(1, 1, 1, 1, 1))) == 0.0
    assert float(adv_loss_g(scores(0, 0, 0, 0, 0))) == 1.0


def test_adversarial_formula_oracle():
    rng = np.random.default_rng(10)
    real = [rng.standard_normal((2, 13)) for _ in range(5)]
    fake = [rng.standard_normal((2, 13)) for _ in range(5)]
    ed = sum(np.mean((1 - r.mean(-1)) ** 2 + f.mean(-1) ** 2) for r, f in zip(real, fake))
    eg = np.mean([np.mean((1 - f.mean(-1)) ** 2) for f in fake])
    t = lambda a: [torch.from_numpy(v) for v in a]  # noqa: E731
    assert float(adv_loss_d(t(real), t(fake))) == pytest.approx(ed, abs=1e-7)
    assert float(adv_loss_g(t(fake))) == pytest.approx(eg, abs=1e-7)


def outs(maps_per_disc, seed=0, shift=None):
    rng = np.random.default_rng(seed)
    res = []
    for k, n in enumerate(maps_per_disc):
        feats = [torch.from_numpy(rng.standard_normal((1, 3, 20))) for _ in range(n)]
        if shift and k == shift[0]:
            feats[shift[1]] = feats[shift[1]] + shift[2]
        res.append(DiscriminatorOutput(feats[-1][:, 0], feats))
    return res


def test_feature_matching_properties():
    a = outs([3, 2, 2, 2, 2])
    assert float(feature_matching(a, a)) == 0.0
    b = outs([3, 2, 2, 2, 2], shift=(2, 1, 0.7))
    assert float(feature_matching(a, b)) == pytest.approx(0.7)
    # the global discriminator is excluded unless requested
    g = outs([3, 2, 2, 2, 2], shift=(0, 0, 0.3))
    assert float(feature_matching(a, g)) == 0.0
    assert float(feature_matching(a, g, include_global=True)) == pytest.approx(0.3)
    assert float(feature_matching(a, outs([3, 2, 2, 2, 2], seed=1))) > 0


def test_feature_matching_length_mismatch():
    with pytest.raises(ValueError):
        feature_matching(outs([3, 2, 2, 2, 2]), outs([3, 2, 2, 2, 1]))
    with pytest.raises(ValueError):
        feature_matching(outs([3, 2, 2, 2, 2]), outs([3, 2, 2, 2]))


def test_generator_loss_warmup_and_full():
    x, y = buf(11), buf(12)
    loss, b = generator_loss(x, y)
    assert b.adv_g == 0.0 and b.fm == 0.0
    assert b.total_g == b.aux
    assert float(loss) == pytest.approx(float(aux_loss(x, y)), rel=1e-12)

    real, fake = outs([3, 2, 2, 2, 2]), outs([3, 2, 2, 2, 2], seed=5)
    loss, b = generator_loss(x, y, CFG, real, fake)
    adv, fm = float(adv_loss_g(fake)), float(feature_matching(real, fake))
    assert b.total_g == b.aux + 4 * b.adv_g + 10 * b.fm
    assert float(loss) == pytest.approx(b.aux + 4 * adv + 10 * fm, rel=1e-10)
    _, d = discriminator_loss(real, fake)
    assert d.total_d == d.adv_d == pytest.approx(float(adv_loss_d(real, fake)))


def test_degenerate_zero_is_finite():
    z = torch.zeros(2400, dtype=torch.float64)
    _, b = generator_loss(z, z, CFG, outs([3, 2, 2, 2, 2]), outs([3, 2, 2, 2, 2]))
    assert not b.nonfinite_terms()
    assert all(v >= 0 for v in b.as_dict().values())


def test_breakdown_lines():
    _, b = generator_loss(buf(0), buf(1))
    lines = b.lines().splitlines()
    assert lines[0].startswith("stft_sc=") and len(lines) == 10


def test_aux_gradient():
    x = buf(13, 2400)
    y = buf(14, 2400)
    assert grad_check(lambda t: aux_loss(x, t["y"]), {"y": y}) < 1e-4
