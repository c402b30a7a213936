#!/usr/bin/env python3
"""
Configuration defaults for the fable agent.

Values come from three layers, later ones winning:
  1. DEFAULTS below
  2. FABLE_CONFIG_JSON (environment / .env)
  3. an explicit partial dict (e.g. the CLI's --config-json)

Environment variables:
    FABLE_SEED          default scenario seed override
    FABLE_OUT_DIR       default report directory
    FABLE_LOG_LEVEL     logging level for CLI runs (default WARNING)
    FABLE_CONFIG_JSON   JSON object merged over DEFAULTS
"""

from __future__ import annotations

import copy
import json
import logging
import os
from typing import Any, Dict, Optional

try:
    from dotenv import load_dotenv
except ImportError:  # pragma: no cover - optional fallback for minimal envs
    def load_dotenv(*_args, **_kwargs):
        return False

load_dotenv()

logger = logging.getLogger(__name__)


DEFAULTS: Dict[str, Dict[str, Any]] = {
    "som": {
        "grid_size": 10,
        "epochs": 40,
        "learning_rate": 0.5,
        "radius": 5.0,
        "temperature": 0.01,
        "scalar_samples": 101,
        "color_levels": 5,
    },
    "hub": {
        "width": 50,
        "active_bits": 5,
    },
    "memory": {
        "rows": 20,
        "capacity": 120,
        "max_iterations": 100,
        "recall_hamming": 5,
    },
    "rules": {
        "property_grid_threshold": 1,
        "contradiction_tolerance": 0.2,
        "contradiction_floor_cm3": 10.0,
        "uncertainty_gain_factor": 0.8,
        "certainty_step": 0.25,
        "certainty_cap": 0.99,
        "kernel_regularizer": 1.0,
    },
    "world": {
        "noise_sigma_cm3": 0.0,
    },
    "report": {
        "decimals": 2,
    },
}


def env_seed() -> Optional[int]:
    raw = os.getenv("FABLE_SEED", "").strip()
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        logger.warning("Ignoring non-integer FABLE_SEED=%r", raw)
        return None


def env_out_dir(default: str = "fable_out") -> str:
    return os.getenv("FABLE_OUT_DIR", "").strip() or default


def env_log_level() -> str:
    return (os.getenv("FABLE_LOG_LEVEL", "") or "WARNING").strip().upper()


def _env_overrides() -> Dict[str, Any]:
    raw = os.getenv("FABLE_CONFIG_JSON", "").strip()
    if not raw:
        return {}
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        logger.warning("Ignoring malformed FABLE_CONFIG_JSON: %s", exc)
        return {}
    return data if isinstance(data, dict) else {}


def merge_defaults(config: Optional[Dict[str, Any]] = None) -> Dict[str, Dict[str, Any]]:
    """Return a full config: defaults, then env JSON, then ``config``."""
    cfg = copy.deepcopy(DEFAULTS)
    for layer in (_env_overrides(), dict(config or {})):
        for section, values in layer.items():
            if section not in cfg or not isinstance(values, dict):
                continue
            cfg[section].update({k: v for k, v in values.items() if k in cfg[section] and v is not None})
    return cfg
