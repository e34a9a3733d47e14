import numpy as np
import pytest

from singgan.audio import AudioBuffer
from singgan.colormap import table
from singgan.evaluation import mcd, plot_spectrogram, read_ppm, spectrogram_indices

SR = 24000


def tone(seconds=1.0, f=440.0):
    t = np.arange(int(SR * seconds)) / SR
    return AudioBuffer((0.3 * np.sin(2 * np.pi * f * t) + 0.1 * np.sin(2 * np.pi * 3 * f * t)).astype(np.float32))


def test_mcd_identity_and_symmetry():
    x = tone()
    rng = np.random.default_rng(0)
    y = AudioBuffer(x.samples + 0.01 * rng.standard_normal(len(x.samples)).astype(np.float32))
    assert mcd(x, x) == 0.0
    assert abs(mcd(x, y) - mcd(y, x)) < 1e-9


def test_mcd_monotone_in_noise():
    x = tone()
    noise = np.random.default_rng(1).standard_normal(len(x.samples)).astype(np.float32)
    vals = [mcd(x, AudioBuffer(x.samples + e * noise)) for e in (0.001, 0.01, 0.1)]
    assert vals[0] < vals[1] < vals[2]


def test_mcd_trims_to_shorter():
    x = tone()
    short = AudioBuffer(x.samples[:12000])
    assert mcd(x, short) == pytest.approx(mcd(short, AudioBuffer(x.samples[:12000])), abs=1e-12)
    with pytest.raises(ValueError):
        mcd(x, AudioBuffer(x.samples[:100]))


def test_zero_audio_is_lowest_colour(tmp_path):
    out = plot_spectrogram(AudioBuffer(np.zeros(4000, np.float32)), tmp_path / "z.ppm")
    img = read_ppm(out)
    assert np.all(img == np.array(table()[0], np.uint8))


def test_plot_is_deterministic(tmp_path):
    a = plot_spectrogram(tone(0.3), tmp_path / "a.ppm").read_bytes()
    b = plot_spectrogram(tone(0.3), tmp_path / "b.ppm").read_bytes()
    assert a == b
    assert a.startswith(b"P6\n")


def test_sine_draws_one_bright_row():
    t = np.arange(SR) / SR
    idx = spectrogram_indices(AudioBuffer(0.5 * np.sin(2 * np.pi * 3000 * t)))
    bins = idx.shape[0]
    row = bins - 1 - round(3000 * 512 / SR)
    brightest = np.argmax(idx[:, 2:-2], axis=0)
    assert np.all(brightest == row)
    assert np.all(idx[row, 2:-2] == 255)
    # rows well away from the tone stay dark
    assert idx[: row - 10, 2:-2].max() < 128
    assert idx[row + 10 :, 2:-2].max() < 128


def test_colour_table():
    t = table()
    assert len(t) == 256
    # published viridis endpoints
    assert t[0] == (68, 1, 84) and t[255] == (253, 231, 37)
