import json

import pytest

from beacnet.config import ConfigError, RunConfig, config_from_dict, load_config


def test_empty_and_default_valued_configs_match_defaults():
    assert config_from_dict({}) == RunConfig()
    assert config_from_dict({"beta": 0.6}) == RunConfig()


def test_sections_and_top_level_training_keys():
    cfg = config_from_dict({"epochs": 3, "L": 10, "synth": {"classes": 4, "sigma": 2},
                            "summarization": {"t_max": 3}, "thresholds": [0.5]})
    assert cfg.train.epochs == 3 and cfg.train.L == 10
    assert cfg.synth.classes == 4 and cfg.synth.sigma == 2.0 and isinstance(cfg.synth.sigma, float)
    assert cfg.summarization.t_max == 3 and cfg.thresholds == (0.5,)
    assert cfg.model == "full"


@pytest.mark.parametrize("raw, match", [
    ({"beta": "high"}, "beta: expected float"),
    ({"epochs": 2.5}, "epochs"),
    ({"epochs": True}, "epochs"),
    ({"bogus": 1}, "bogus"),
    ({"synth": {"bogus": 1}}, "synth.bogus"),
    ({"train": {}}, "train"),
    ({"alpha_init": [0.5]}, "alpha_init"),
    ({"ablation": "nope"}, "ablation"),
    ({"beta": 2.0}, "beta"),
    ({"synth": {"seg_min": 1}}, "seg"),
])
def test_invalid_configs(raw, match):
    with pytest.raises(ConfigError, match=match):
        config_from_dict(raw)


def test_load_config_round_trip(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"seed": 7, "ablation": "c_stream"}))
    cfg = load_config(tmp_path / "c.json")
    assert cfg.train.seed == 7 and cfg.model == "c_stream"
    assert json.loads(json.dumps(cfg.to_json()))["train"]["seed"] == 7


def test_committed_configs_load():
    from pathlib import Path

    for path in sorted(Path(__file__).resolve().parents[1].joinpath("configs").glob("*.json")):
        load_config(path)
