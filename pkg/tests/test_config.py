import json

import pytest

from dfagnn.config import DATASET_PRESETS, DATASET_STATS, ExperimentConfig, preset_for
from dfagnn.errors import ConfigError


def test_presets_cover_every_benchmark():
    assert set(DATASET_PRESETS) == set(DATASET_STATS)
    assert DATASET_PRESETS["citeseer"]["spread_iterations"] == 200
    assert DATASET_PRESETS["texas"]["alpha"] == 0.9
    assert DATASET_STATS["cora"][:4] == (2708, 5278, 1433, 7)


def test_preset_lookup_uses_directory_name():
    assert preset_for("/data/exports/Photo")["lr"] == 0.001
    assert preset_for("somewhere/unknown") == DATASET_PRESETS["cora"]


def test_resolved_fills_from_preset_and_keeps_overrides():
    cfg = ExperimentConfig(dataset="data/chameleon", lr=0.05).resolved()
    assert cfg.lr == 0.05
    assert cfg.alpha == 0.5 and cfg.spread_iterations == 200 and cfg.weight_decay == 0.0
    assert cfg.bp_lr == 0.05 and cfg.bp_weight_decay == 0.0
    assert cfg.hidden == 64 and cfg.epochs == 1000


def test_trainer_configs_follow_the_experiment():
    cfg = ExperimentConfig(dataset="cora", bp_lr=0.005, epochs=7, use_node_filter=False)
    dfa = cfg.dfa_config()
    bp = cfg.bp_config(num_layers=5)
    assert dfa.spread.alpha == 0.1 and dfa.spread.iterations == 50 and dfa.epochs == 7
    assert not dfa.use_node_filter and dfa.use_error_generator
    assert bp.lr == 0.005 and bp.num_layers == 5 and bp.weight_decay == 5e-4
    assert cfg.dfa_config(track_alignment=True).track_alignment


@pytest.mark.parametrize("bad", [
    {"use_error_generator": False},
    {"alpha": 1.0},
    {"epsilon": 0.0},
    {"seeds": []},
    {"seeds": [1, 1]},
    {"depths": [1, 3]},
    {"attack_rates": [-0.2]},
    {"split_mode": "ninety"},
    {"split_fractions": [0.8, 0.2, 0.2]},
    {"freeze_schedule": [{"epochs": 3, "frozen": [3]}]},
    {"stage_epochs": [5, 5]},
    {"attack_rate": 0.2},
    {"learning_rate": 0.1},
])
def test_invalid_values_raise_config_error(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_sources(overrides={"dataset": "cora", **bad})


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps({"dataset": "data/cora", "epochs": 5, "seeds": [0, 1]}))
    cfg = ExperimentConfig.from_sources(str(path), {"epochs": 9, "lr": None})
    assert cfg.epochs == 9 and cfg.seeds == (0, 1) and cfg.lr is None

    path.write_text(json.dumps({"dataset": "data/cora", "colour": "red"}))
    with pytest.raises(ConfigError, match="colour"):
        ExperimentConfig.from_sources(str(path))
    with pytest.raises(ConfigError, match="cannot read"):
        ExperimentConfig.from_sources(str(tmp_path / "missing.json"))


def test_provenance_is_sorted_json_with_extras():
    cfg = ExperimentConfig(dataset="data/cora", seeds=[3])
    payload = json.loads(cfg.provenance(command="train"))
    assert payload["command"] == "train"
    assert payload["alpha"] == 0.1
    assert payload["normalize_features"] is True
    assert list(payload) == sorted(payload)


def test_stage_lengths_expand_for_the_final_depth(tmp_path):
    cfg = ExperimentConfig(dataset="cora", stage_epochs=[4, 3, 2])
    assert [st.frozen for st in cfg.freeze_schedule] == [(2,), (0, 1), (2,)]

    path = tmp_path / "deep.json"
    path.write_text(json.dumps({"dataset": "cora", "num_layers": 4}))
    deep = ExperimentConfig.from_sources(str(path), {"stage_epochs": [4, 3, 2]})
    assert [st.frozen for st in deep.freeze_schedule] == [(3,), (0, 1, 2), (3,)]
    assert [st.epochs for st in deep.freeze_schedule] == [4, 3, 2]
    assert deep.dfa_config().freeze_schedule == deep.freeze_schedule


def test_provenance_with_stages_loads_back():
    cfg = ExperimentConfig(dataset="cora", num_layers=5, stage_epochs=[2, 2, 2])
    payload = json.loads(cfg.provenance())
    assert ExperimentConfig(**payload) == cfg.resolved()
    with pytest.raises(ConfigError, match="disagree"):
        ExperimentConfig.from_sources(overrides={**payload, "stage_epochs": [1, 1, 1]})


def test_attack_rate_needs_a_kind():
    assert ExperimentConfig(dataset="cora", attack_kind="flip", attack_rate=0.2).attack_rate == 0.2
    assert ExperimentConfig(dataset="cora", attack_rate=0.0).attack_kind is None
