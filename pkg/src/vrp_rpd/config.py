"""Global configuration file handling.

A config file is a JSON document with optional "alns", "brkga", "pool_size"
and bench-level keys; anything omitted falls back to the defaults below,
which carry the published hyperparameter values.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

from .alns import AlnsParams
from .brkga import BrkgaParams


def default_config() -> dict:
    return {
        "alns": asdict(AlnsParams()),
        "brkga": asdict(BrkgaParams()),
        "pool_size": 1,
    }


def load_config(path=None) -> dict:
    cfg = default_config()
    if path is not None:
        user = json.loads(Path(path).read_text(encoding="utf-8"))
        for section in ("alns", "brkga"):
            cfg[section].update(user.get(section, {}))
        for key, value in user.items():
            if key not in ("alns", "brkga"):
                cfg[key] = value
    return cfg


def params_from_config(cfg: dict):
    return AlnsParams(**cfg["alns"]), BrkgaParams(**cfg["brkga"]), int(cfg.get("pool_size", 1))
