# scdkit/config.py
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import yaml

# ----------------------------------
# 設定読み込み
# ----------------------------------
DEFAULT_CONFIG_PATH = Path(__file__).parent / "config/config.yaml"

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"


@dataclass(frozen=True)
class Settings:
    element_budget: int = 10**7
    edge_materialize_threshold: int = 10**6
    permanent_max_size: int = 30
    oracle_max_elements: int = 40
    layered_state_cap: int = 10**7
    snmf_scale: int = 10**12
    snmf_tolerance: float = 1e-9
    float_tolerance: float = 1e-9
    cache_dir: Path = Path("~/.cache/scdkit").expanduser()
    threads: int = 0
    log_level: str = "INFO"

    def workers(self) -> int:
        """THREADS=0 は利用可能コア数"""
        if self.threads and self.threads > 0:
            return self.threads
        return os.cpu_count() or 1

    def with_overrides(self, **kwargs) -> "Settings":
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


def load_settings(config_path: Path | str | None = None) -> Settings:
    """YAML を読み込み、環境変数（SCDKIT_*）で上書きした Settings を返す"""
    path = Path(config_path or os.getenv("SCDKIT_CONFIG", DEFAULT_CONFIG_PATH))
    with open(path, "r", encoding="utf-8") as yml:
        config = yaml.safe_load(yml) or {}

    cache_dir = os.getenv("SCDKIT_CACHE", config.get("CACHE_DIR", "~/.cache/scdkit"))
    threads = os.getenv("SCDKIT_THREADS", config.get("THREADS", 0))
    log_level = os.getenv("SCDKIT_LOG_LEVEL", config.get("LOG_LEVEL", "INFO"))

    return Settings(
        element_budget=int(config.get("ELEMENT_BUDGET", 10**7)),
        edge_materialize_threshold=int(config.get("EDGE_MATERIALIZE_THRESHOLD", 10**6)),
        permanent_max_size=int(config.get("PERMANENT_MAX_SIZE", 30)),
        oracle_max_elements=int(config.get("ORACLE_MAX_ELEMENTS", 40)),
        layered_state_cap=int(config.get("LAYERED_STATE_CAP", 10**7)),
        snmf_scale=int(config.get("SNMF_SCALE", 10**12)),
        snmf_tolerance=float(config.get("SNMF_TOLERANCE", 1e-9)),
        float_tolerance=float(config.get("FLOAT_TOLERANCE", 1e-9)),
        cache_dir=Path(str(cache_dir)).expanduser(),
        threads=int(threads),
        log_level=str(log_level).upper(),
    )


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return load_settings()


# ----------------------------------
# ログ設定
# ----------------------------------
def setup_logging(level: str | int | None = None) -> None:
    """CLI / scripts から呼ぶ。ライブラリ import 時には設定しない"""
    logging.basicConfig(
        level=level or get_settings().log_level,
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler()],
        force=True,
    )
