"""
Configuration layer.

Settings come from, in increasing precedence: built-in defaults, the YAML
file (config/default.yaml or --config), the environment (QBSC_SEED,
QBSC_WORKERS, optionally from a .env file) and finally CLI flags, which the
CLI applies itself.
"""

import copy
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import find_dotenv, load_dotenv

from .exceptions import ConfigError
from .utils import get_env_int

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config" / "default.yaml"

SEED_ENV_VAR = "QBSC_SEED"
WORKERS_ENV_VAR = "QBSC_WORKERS"

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "protocol": {"rs1": 0.5, "mu": 0.75, "m_min": 2, "m_max": 12},
    "simulation": {"trials": 1_000_000, "seed": 0, "workers": 1, "chunk_trials": 16384},
    "detectors": {"dark_count_prob": 0.0, "spd_efficiency": 1.0},
}


@dataclass(frozen=True)
class Settings:
    """Resolved configuration values"""

    rs1: float = 0.5
    mu: float = 0.75
    m_min: int = 2
    m_max: int = 12
    trials: int = 1_000_000
    seed: int = 0
    workers: int = 1
    chunk_trials: int = 16384
    dark_count_prob: float = 0.0
    spd_efficiency: float = 1.0


def _merge(base: Dict[str, Dict[str, Any]], override: Dict[str, Any], source: str) -> None:
    for section, values in override.items():
        if section not in base:
            raise ConfigError(f"{source}: unknown section '{section}'")
        if not isinstance(values, dict):
            raise ConfigError(f"{source}: section '{section}' must be a mapping")
        for key, value in values.items():
            if key not in base[section]:
                raise ConfigError(f"{source}: unknown key '{section}.{key}'")
            base[section][key] = value


def _read_yaml(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}")
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in {path}: {e}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def load_settings(config_path: Optional[Path] = None, use_env: bool = True) -> Settings:
    """
    Load settings from YAML and the environment.

    Args:
        config_path: YAML file to read; the bundled default file when None
        use_env: Apply QBSC_SEED / QBSC_WORKERS (after loading .env)

    Returns:
        Resolved Settings

    Raises:
        ConfigError: If the file is unreadable or holds unknown keys or bad values
    """
    merged = copy.deepcopy(DEFAULTS)

    path = Path(config_path) if config_path else DEFAULT_CONFIG_PATH
    if config_path or path.exists():
        _merge(merged, _read_yaml(path), str(path))
        logger.debug(f"Loaded configuration from {path}")

    if use_env:
        load_dotenv(find_dotenv(usecwd=True), override=False)
        try:
            env_seed = get_env_int(SEED_ENV_VAR)
            env_workers = get_env_int(WORKERS_ENV_VAR)
        except ValueError as e:
            raise ConfigError(str(e))
        if env_seed is not None:
            merged["simulation"]["seed"] = env_seed
        if env_workers is not None:
            merged["simulation"]["workers"] = env_workers

    try:
        settings = Settings(
            rs1=float(merged["protocol"]["rs1"]),
            mu=float(merged["protocol"]["mu"]),
            m_min=int(merged["protocol"]["m_min"]),
            m_max=int(merged["protocol"]["m_max"]),
            trials=int(merged["simulation"]["trials"]),
            seed=int(merged["simulation"]["seed"]),
            workers=int(merged["simulation"]["workers"]),
            chunk_trials=int(merged["simulation"]["chunk_trials"]),
            dark_count_prob=float(merged["detectors"]["dark_count_prob"]),
            spd_efficiency=float(merged["detectors"]["spd_efficiency"]),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid configuration value: {e}")

    if not 0 <= settings.seed < 2**64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {settings.seed}")
    if settings.workers < 1 or settings.chunk_trials < 1:
        raise ConfigError("workers and chunk_trials must be at least 1")
    return settings
