import pytest

from singgan.config import (
    ConfigError,
    EngineConfig,
    config_hash,
    desk_config,
    load_config,
    loads_config,
    serialize,
    valid_keys,
)

GOLDEN = "661cc5eb97e45dbbe9487b57e08709d213d2447dc3f7494e735708b4ede094bd"


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.cfg"
    p.write_text("# nothing here\n\n")
    cfg = load_config(p)
    assert cfg == EngineConfig()
    assert cfg.excitation.num_harmonics == 8
    assert cfg.generator.residual_channels == 64
    assert cfg.generator.dilations[-1] == 512 and len(cfg.generator.dilations) == 10
    assert cfg.loss.adv_lambda == 4.0 and cfg.loss.fm_lambda == 10.0 and cfg.loss.aux_lambda == 0.5
    assert cfg.discriminator.local_kernels == (5, 5, 7, 7)


def test_golden_hash():
    # changing any default is an intentional diff: update this value with it
    assert config_hash(EngineConfig()) == GOLDEN


def test_round_trip():
    text = serialize(EngineConfig())
    assert serialize(loads_config(text)) == text
    odd = desk_config(**{"loss.fm_include_global": "true", "train.lr": "0.001"})
    assert loads_config(serialize(odd)) == odd


def test_hop_cross_check_names_both_fields():
    with pytest.raises(ConfigError) as err:
        load_config(overrides={"hop": "100"})
    assert "hop" in str(err.value) and "f0_upsample" in str(err.value)


def test_unknown_key_lists_valid_keys():
    with pytest.raises(ConfigError) as err:
        load_config(overrides={"generator.widht": "3"})
    assert "generator.residual_channels" in str(err.value)


def test_bad_value_and_bad_line(tmp_path):
    with pytest.raises(ConfigError):
        load_config(overrides={"train.lr": "fast"})
    p = tmp_path / "bad.cfg"
    p.write_text("train.lr 0.1\n")
    with pytest.raises(ConfigError, match="line 1"):
        load_config(p)


def test_file_then_overrides(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text("train.seed = 5  # comment\ntrain.batch = 2\n")
    cfg = load_config(p, {"train.batch": "3"})
    assert cfg.train.seed == 5 and cfg.train.batch == 3


def test_resolution_list_parse():
    cfg = load_config(overrides={"loss.stft_resolutions": "256/64/256;512/128/512"})
    assert [r.fft_size for r in cfg.loss.stft_resolutions] == [256, 512]


def test_desk_keeps_topology():
    d, full = desk_config(), EngineConfig()
    assert d.generator.residual_channels == 16
    assert d.generator.dilations == full.generator.dilations
    assert d.discriminator.local_layers == full.discriminator.local_layers


def test_valid_keys_cover_sections():
    keys = valid_keys()
    for prefix in ("features.", "excitation.", "pqmf.", "generator.", "discriminator.", "loss.", "train."):
        assert any(k.startswith(prefix) for k in keys)
