import pytest

from gaitevo.config import ConfigError, config_as_dict, load_train_config, parse_train_config


MINIMAL = {"desired_speed": 0.5}


def test_minimal_config_parses():
    cfg = parse_train_config(dict(MINIMAL))
    assert cfg.desired_speed == 0.5
    assert cfg.max_steps == 1_000_000
    assert cfg.rag_first_at == 10_000
    assert cfg.rag_interval == 50_000
    assert cfg.batch_size == 256
    assert cfg.buffer_capacity == 1_000_000
    assert cfg.hidden == (256, 256)


def test_missing_required_field_names_it():
    with pytest.raises(ConfigError) as exc:
        parse_train_config({})
    assert "desired_speed" in str(exc.value)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_train_config({**MINIMAL, "desired_sped": 1.0})
    assert "desired_sped" in str(exc.value)


def test_unknown_nested_key_rejected_with_path():
    with pytest.raises(ConfigError) as exc:
        parse_train_config({**MINIMAL, "optimize": {"ga": {"sigma": 0.1}}})
    assert "optimize.ga.sigma" in str(exc.value)


def test_type_errors_name_field():
    with pytest.raises(ConfigError) as exc:
        parse_train_config({**MINIMAL, "max_steps": "many"})
    assert "max_steps" in str(exc.value)
    with pytest.raises(ConfigError) as exc:
        parse_train_config({**MINIMAL, "cpg": {"phase_offsets": [0.0, 0.5]}})
    assert "cpg.phase_offsets" in str(exc.value)


def test_contradiction_rejected():
    with pytest.raises(ConfigError):
        parse_train_config({**MINIMAL, "rag_first_at": 10, "initial_steps": 20})


def test_nested_values_land():
    cfg = parse_train_config({
        **MINIMAL,
        "terrain": {"kind": "slope", "slope_deg": 20.0},
        "optimize": {"source": "normal", "candidates": 7},
        "sac": {"hidden": [32, 32], "batch_size": 64},
        "model": {"friction": 0.6},
    })
    assert cfg.terrain.kind == "slope" and cfg.terrain.slope_deg == 20.0
    assert cfg.optimize.source == "normal" and cfg.optimize.candidates == 7
    assert cfg.hidden == (32, 32) and cfg.batch_size == 64
    assert cfg.model.friction == 0.6


def test_config_echo_round_trips():
    cfg = parse_train_config({
        **MINIMAL,
        "seed": 17,
        "terrain": {"kind": "stairs", "rise": 0.12},
        "optimize": {"ga": {"mutation_sigma": 0.02}},
    })
    echo = config_as_dict(cfg)
    again = parse_train_config(echo)
    assert again == cfg


def test_load_from_file_and_manifest(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text("desired_speed: 0.7\nseed: 3\n")
    cfg = load_train_config(p)
    assert cfg.desired_speed == 0.7 and cfg.seed == 3

    import json
    m = tmp_path / "manifest.json"
    m.write_text(json.dumps({
        "artifact_version": "0.1.0",
        "config": config_as_dict(cfg),
    }))
    cfg2 = load_train_config(m)
    assert cfg2 == cfg


def test_invalid_yaml_reports(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("desired_speed: [unclosed\n")
    with pytest.raises(ConfigError):
        load_train_config(p)
