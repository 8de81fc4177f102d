# tests/test_config.py
import logging
from pathlib import Path

from scdkit.config import DEFAULT_CONFIG_PATH, get_settings, load_settings, setup_logging


def test_default_config_values():
    s = load_settings(DEFAULT_CONFIG_PATH)
    assert s.element_budget == 10**7
    assert s.permanent_max_size == 30
    assert s.oracle_max_elements == 40
    assert s.snmf_scale == 10**12
    assert s.log_level == "INFO"


def test_env_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("SCDKIT_CACHE", str(tmp_path / "c"))
    monkeypatch.setenv("SCDKIT_THREADS", "3")
    monkeypatch.setenv("SCDKIT_LOG_LEVEL", "debug")
    s = load_settings()
    assert s.cache_dir == tmp_path / "c"
    assert s.threads == 3
    assert s.workers() == 3
    assert s.log_level == "DEBUG"


def test_custom_config_file(tmp_path, monkeypatch):
    path = tmp_path / "custom.yaml"
    path.write_text("ELEMENT_BUDGET: 100\nTHREADS: 2\n", encoding="utf-8")
    monkeypatch.setenv("SCDKIT_CONFIG", str(path))
    get_settings.cache_clear()
    s = get_settings()
    assert s.element_budget == 100
    assert s.threads == 2
    # 書かれていないキーは既定値
    assert s.permanent_max_size == 30


def test_with_overrides_ignores_none():
    s = load_settings()
    t = s.with_overrides(threads=5, log_level=None)
    assert t.threads == 5
    assert t.log_level == s.log_level


def test_workers_zero_means_all_cores():
    s = load_settings().with_overrides(threads=0)
    assert s.workers() >= 1


def test_setup_logging_sets_level():
    setup_logging("WARNING")
    assert logging.getLogger().level == logging.WARNING
    setup_logging("INFO")
    assert logging.getLogger().level == logging.INFO


def test_cache_dir_is_path():
    assert isinstance(get_settings().cache_dir, Path)
