import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singgan.config import ExcitationConfig
from singgan.excitation import ExcitationMatrix, generate_excitation, harmonic_phases, phase_continuity_metric

SR = 24000
CFG = ExcitationConfig()


def peak_hz(column, sr=SR):
    spec = np.abs(np.fft.rfft(column))
    return np.argmax(spec) * sr / len(column)


def test_unvoiced_statistics():
    m = generate_excitation(np.zeros(1000), CFG)
    v = m.values.astype(np.float64)
    assert v.shape == (1000, 8)
    assert not m.voiced_mask.any()
    sigma = CFG.noise_sigma
    assert abs(v.mean()) <= 3 * sigma / np.sqrt(v.size)
    assert abs(v.std() / sigma - 1) <= 0.1


@pytest.mark.parametrize("harmonic", [1, 3])
def test_harmonic_peak(harmonic):
    m = generate_excitation(np.full(SR, 220.0), CFG)
    bin_hz = SR / SR
    assert abs(peak_hz(m.values[:, harmonic - 1]) - harmonic * 220.0) <= bin_hz


def test_constant_f0_matches_closed_form():
    n = 48000
    m = generate_excitation(np.full(n, 220.0), CFG)
    t = np.arange(1, n + 1)
    phases = harmonic_phases(CFG)
    for i in range(1, 9):
        expected = CFG.sine_amplitude * np.sin(2 * np.pi * i * 220.0 * t / SR + phases[i - 1])
        np.testing.assert_allclose(m.values[:, i - 1], expected, atol=1e-4)


def test_single_voiced_sample_between_unvoiced_runs():
    f0 = np.zeros(101)
    f0[50] = 300.0
    m = generate_excitation(f0, CFG)
    assert m.voiced_mask.sum() == 1
    assert np.all(np.abs(m.values[50]) <= CFG.sine_amplitude)
    neighbours = np.concatenate([m.values[:50], m.values[51:]])
    assert abs(neighbours.std() / CFG.noise_sigma - 1) < 0.1


def test_fundamental_phase_is_zero():
    assert harmonic_phases(ExcitationConfig(phase_seed=123))[0] == 0.0
    p = harmonic_phases(ExcitationConfig(phase_seed=123))
    assert np.all(np.abs(p) <= np.pi)


def test_above_nyquist_harmonics_are_zero():
    f0 = np.linspace(1000, 3000, 2000)
    m = generate_excitation(f0, CFG)
    h = np.arange(1, 9)
    above = f0[:, None] * h[None, :] >= SR / 2
    assert above.any()
    assert np.all(m.values[above] == 0.0)
    assert np.any(m.values[~above] != 0.0)


def test_deterministic_and_seed_sensitive():
    f0 = np.concatenate([np.zeros(300), np.full(500, 180.0), np.zeros(200)])
    a = generate_excitation(f0, CFG).values
    b = generate_excitation(f0, CFG).values
    assert a.tobytes() == b.tobytes()
    c = generate_excitation(f0, ExcitationConfig(noise_seed=99)).values
    assert not np.array_equal(a, c)


def test_negative_f0_rejected():
    with pytest.raises(ValueError):
        generate_excitation([100.0, -1.0], CFG)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.one_of(st.just(0.0), st.floats(40.0, 2000.0)), min_size=1, max_size=300))
def test_voiced_rows_bounded(f0):
    m = generate_excitation(f0, CFG)
    assert np.all(np.abs(m.values[m.voiced_mask]) <= CFG.sine_amplitude + 1e-7)
    assert np.array_equal(m.voiced_mask, np.asarray(f0) > 0)


@pytest.mark.parametrize("f0", [220.0, 440.0])
def test_phase_metric_constant(f0):
    m = generate_excitation(np.full(SR, f0), CFG)
    assert phase_continuity_metric(m) <= 2 * np.pi * f0 / SR + 1e-3


def test_phase_metric_ramp_and_naive_regression():
    f0 = np.linspace(100.0, 400.0, SR)
    bound = 2 * np.pi * 400.0 / SR + 1e-3
    good = phase_continuity_metric(generate_excitation(f0, CFG), f0)
    t = np.arange(SR)
    naive = ExcitationMatrix(
        (CFG.sine_amplitude * np.sin(2 * np.pi * f0 * t / SR))[:, None].astype(np.float32), np.ones(SR, bool)
    )
    bad = phase_continuity_metric(naive, f0)
    assert good <= bound
    assert bad > good
    assert bad > bound


def test_phase_metric_needs_voicing():
    with pytest.raises(ValueError):
        phase_continuity_metric(generate_excitation(np.zeros(100), CFG))
