import json

import pytest

from config.model_config import VARIANTS, AblationSpec, ModelConfig
from config.run_config import RunConfig, SynthSpec, TrainConfig
from src.errors import ConfigError


def test_toy_and_full_profiles():
    toy = ModelConfig.toy()
    assert toy.input_size == 64
    assert toy.widths == (8, 16, 32, 64, 128)
    assert toy.ca_reduction == 4 and toy.decoder_width == 16
    assert toy.pyramid_shapes() == [(8, 32, 32), (16, 16, 16), (32, 8, 8), (64, 4, 4), (128, 2, 2)]

    full = ModelConfig.full()
    assert full.input_size == 352
    assert full.widths == (64, 256, 512, 1024, 2048)
    assert full.level_shape(3) == (512, 44, 44)


@pytest.mark.parametrize(
    "overrides",
    [
        {"input_size": 48},
        {"strides": (2, 4, 8, 16, 64)},
        {"ca_reduction": 3},
        {"widths": (8, 16, 0, 64, 128)},
        {"unknown_key": 1},
    ],
)
def test_invalid_model_config_raises(overrides):
    with pytest.raises(ConfigError):
        ModelConfig.toy(**overrides)


def test_json_round_trip_keeps_hash(tmp_path):
    config = ModelConfig.toy(seed=5).with_ablation("3")
    path = tmp_path / "model.json"
    config.to_json(path)
    loaded = ModelConfig.from_json(path)
    assert loaded == config
    assert loaded.config_hash() == config.config_hash()
    assert ModelConfig.from_json(config.to_json()).config_hash() == config.config_hash()


def test_hash_changes_with_content():
    assert ModelConfig.toy().config_hash() != ModelConfig.toy(seed=1).config_hash()


def test_from_json_rejects_unknown_keys():
    text = json.dumps({**json.loads(ModelConfig.toy().to_json()), "extra": True})
    with pytest.raises(ConfigError):
        ModelConfig.from_json(text)


def test_variants_checkmarks():
    assert AblationSpec.from_variant("OUR").checkmarks() == {
        "DB": True, "CA": True, "SA": True, "T-PD": True, "S-PD": True, "Teaching": True,
    }
    one = AblationSpec.from_variant("#1")
    assert not one.ca and not one.sa and not one.uses_modulator
    assert AblationSpec.from_variant("2").checkmarks()["SA"] is False
    assert AblationSpec.from_variant("m").checkmarks() == {
        "DB": False, "CA": False, "SA": False, "T-PD": True, "S-PD": False, "Teaching": False,
    }
    assert AblationSpec.from_variant("A").uses_teaching is False
    assert set(VARIANTS) >= {"1", "2", "3", "4", "5", "6", "OUR", "MA", "M", "A"}


def test_unknown_variant_raises():
    with pytest.raises(ConfigError):
        AblationSpec.from_variant("7")


def test_contradictory_flags_raise():
    with pytest.raises(ValueError):
        AblationSpec(mode="MA", dual_branch=False)
    with pytest.raises(ValueError):
        AblationSpec(mode="A", dual_branch=True)


def test_synth_spec_validation():
    assert SynthSpec().flow_max_mag == 8.0
    with pytest.raises(ValueError):
        SynthSpec(object_area_range=(0.01, 0.2))
    with pytest.raises(ValueError):
        SynthSpec(speed_range=(0.01, 0.2))
    with pytest.raises(ValueError):
        SynthSpec(clutter_speed=0.05)
    with pytest.raises(ValueError):
        SynthSpec(frames_per_sequence=1)


def test_run_config_from_json(tmp_path):
    config = RunConfig(train=TrainConfig(epochs=3)).with_seed(9)
    assert config.model.seed == config.train.seed == config.synth.seed == 9
    path = tmp_path / "run.json"
    config.to_json(path)
    assert RunConfig.from_json(path).config_hash() == config.config_hash()

    with pytest.raises(ConfigError):
        RunConfig.from_json(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError):
        RunConfig.from_json(tmp_path / "bad.json")
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"train": {"base_lr": -1}})
