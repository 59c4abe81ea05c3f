# Copyright (c) 2026 The mv_transaction_costs authors
# The mv_transaction_costs package is released under the terms of the AGPLv3 or higher.

import json

import pytest

from mv_transaction_costs.tools import ConfigError, MarketParams, Position, RunSettings, SettingsManager


def write_config(tmp_path, data) -> str:
    file_path = tmp_path / "config.json"
    file_path.write_text(data if isinstance(data, str) else json.dumps(data))
    return str(file_path)


def test_load(tmp_path, short_config):
    settings: RunSettings = SettingsManager.load(write_config(tmp_path, short_config))
    assert settings.market_params() == MarketParams(r=0.05, alpha=0.15, sigma=0.2, lam=0.02, mu=0.02, T=0.2)
    assert settings.position() == Position(0.0, 1.0)
    assert settings.targets == [1.0]
    assert settings.grid.n_z == 150 and settings.grid.n_t == 100
    assert settings.penalty.K is None
    assert settings.mc is None
    assert SettingsManager.get_settings() is settings
    assert settings.solver_json["version"] == SettingsManager.read_solver_json()["version"]


def test_defaults(tmp_path, short_config, monkeypatch):
    monkeypatch.delenv(SettingsManager.OUTPUT_DIR_ENV, raising=False)
    for key in ("grid", "penalty", "mc", "frontier"):
        del short_config[key]
    settings: RunSettings = SettingsManager.load(write_config(tmp_path, short_config))
    assert (settings.grid.n_z, settings.grid.n_t, settings.grid.z_max_factor) == (800, 2000, 50.0)
    assert settings.penalty.newton_tol == 1e-10
    assert settings.frontier_points == 0
    assert settings.output_dir == "results"


def test_save_roundtrip(tmp_path, short_config):
    short_config["mc"] = {"n_paths": 500, "n_steps": 10, "trace_paths": 2}
    short_config["frontier"] = {"n_points": 4, "z_max_dollars": 1.005}
    first: RunSettings = SettingsManager.load(write_config(tmp_path, short_config))
    saved = tmp_path / "saved.json"
    SettingsManager.save(str(saved))
    second: RunSettings = SettingsManager.load(str(saved))
    assert second.to_json() == first.to_json()
    assert second.mc.trace_paths == 2
    assert second.frontier_z_max == 1.005


def test_output_dir_precedence(tmp_path, short_config, monkeypatch):
    monkeypatch.setenv(SettingsManager.OUTPUT_DIR_ENV, "from_env")
    assert SettingsManager.load(write_config(tmp_path, short_config)).output_dir == "from_env"
    short_config["outputs"] = "from_config"
    assert SettingsManager.load(write_config(tmp_path, short_config)).output_dir == "from_config"


@pytest.mark.parametrize("mutate", [
    lambda c: c.pop("position"),
    lambda c: c["market"].pop("horizon_years"),
    lambda c: c["market"].update(alpha_per_year=0.01),
    lambda c: c["market"].update(sigma_per_sqrt_year="0.2"),
    lambda c: c.update(targets_dollars=1.0),
    lambda c: c.update(grid={"n_z": 2}),
    lambda c: c.update(mc={"normal_method": "box"}),
    lambda c: c.update(frontier={"n_points": -1})
])
def test_invalid_configs(tmp_path, short_config, mutate):
    mutate(short_config)
    with pytest.raises(ConfigError):
        SettingsManager.load(write_config(tmp_path, short_config))


def test_unreadable_configs(tmp_path):
    with pytest.raises(ConfigError):
        SettingsManager.load(str(tmp_path / "missing.json"))
    with pytest.raises(ConfigError):
        SettingsManager.load(write_config(tmp_path, "{not json"))
    with pytest.raises(ConfigError):
        SettingsManager.load(write_config(tmp_path, "[1, 2]"))


def test_get_settings_before_load(monkeypatch):
    monkeypatch.setattr(SettingsManager, "_settings", None)
    with pytest.raises(ConfigError):
        SettingsManager.get_settings()
