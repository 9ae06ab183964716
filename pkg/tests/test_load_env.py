import pytest

from errors import ConfigError
from load_env import load_settings


def test_standard_profile_shipped(config_path):
    settings = load_settings(config_path=config_path)
    assert settings["PROFILE"] == "standard"
    assert float(settings["CONDITION_CAP"]) == 1e4
    assert settings["GATED"] == "true"


def test_stress_profile_shipped(config_path):
    settings = load_settings("stress", config_path)
    assert settings["PROFILE"] == "stress"
    assert float(settings["CONDITION_CAP"]) == 1e8
    assert settings["GATED"] == "false"


def test_profile_named_in_config_file(tmp_path):
    (tmp_path / "config.env").write_text("PROFILE=Custom\n")
    (tmp_path / ".env.custom").write_text("TOL=1e-3\nWORKERS=2\n")
    settings = load_settings(config_path=str(tmp_path / "config.env"))
    assert settings == {"PROFILE": "custom", "TOL": "1e-3", "WORKERS": "2"}


def test_profile_file_overrides_config_file(tmp_path):
    (tmp_path / "config.env").write_text("PROFILE=standard\nTOL=1\n")
    (tmp_path / ".env.standard").write_text("TOL=2\n")
    assert load_settings(config_path=str(tmp_path / "config.env"))["TOL"] == "2"


def test_missing_config_falls_back_to_defaults(tmp_path):
    settings = load_settings(config_path=str(tmp_path / "config.env"))
    assert settings == {"PROFILE": "standard"}


def test_explicit_missing_profile_raises(tmp_path):
    (tmp_path / "config.env").write_text("PROFILE=standard\n")
    with pytest.raises(ConfigError, match="nightly"):
        load_settings("nightly", str(tmp_path / "config.env"))


def test_process_environment_is_ignored(tmp_path, monkeypatch):
    monkeypatch.setenv("TOL", "123")
    monkeypatch.setenv("PROFILE", "stress")
    settings = load_settings(config_path=str(tmp_path / "config.env"))
    assert "TOL" not in settings
    assert settings["PROFILE"] == "standard"
