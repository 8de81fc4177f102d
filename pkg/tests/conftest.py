# tests/conftest.py
import pytest

from scdkit.config import get_settings
from scdkit.poset_core import build_poset


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """キャッシュをテストごとの一時ディレクトリへ向け、設定を読み直させる"""
    for key in ("SCDKIT_CONFIG", "SCDKIT_THREADS", "SCDKIT_LOG_LEVEL"):
        monkeypatch.delenv(key, raising=False)
    monkeypatch.setenv("SCDKIT_CACHE", str(tmp_path / "cache"))
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def boolean():
    return lambda n: build_poset("boolean", 2, n)


@pytest.fixture
def grid():
    return lambda t, n: build_poset("hypergrid", t, n)
