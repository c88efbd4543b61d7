"""Run configuration (YAML) and logging setup."""
import copy
import logging
from logging.handlers import RotatingFileHandler
from typing import Dict, Optional

import yaml

from .errors import ConfigError

DEFAULT_CONFIG: Dict = {
    "logging": {
        "level": "INFO",
        "file": None,
        "max_size_mb": 5,
        "backup_count": 3,
    },
    "sampling": {
        "points": 50,
        "seed": 0,
        "tolerance": 1e-9,
        "workers": 4,
    },
    "geodesics": {
        "curves": 10,
        "steps": 1000,
        "step": 1e-3,
        "defect_tolerance": 1e-8,
    },
}


def _merge(base: Dict, override: Dict) -> Dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(config_path: Optional[str] = None) -> Dict:
    if config_path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            loaded = yaml.safe_load(f) or {}
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {config_path}")
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"failed to load config {config_path}: {e}")
    if not isinstance(loaded, dict):
        raise ConfigError(f"config {config_path} must be a mapping, got {type(loaded).__name__}")
    return _merge(DEFAULT_CONFIG, loaded)


def setup_logging(config: Dict, verbose: bool = False) -> logging.Logger:
    log_config = config["logging"]
    logger = logging.getLogger()
    level = logging.DEBUG if verbose else getattr(logging, str(log_config["level"]).upper(), logging.INFO)
    logger.setLevel(level)
    for handler in list(logger.handlers):
        if getattr(handler, "_gkverify", False):
            logger.removeHandler(handler)
            handler.close()

    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)
    console_handler.setFormatter(
        logging.Formatter("%(asctime)s - %(levelname)s - %(message)s", datefmt="%Y-%m-%d %H:%M:%S")
    )
    console_handler._gkverify = True
    logger.addHandler(console_handler)

    if log_config.get("file"):
        file_handler = RotatingFileHandler(
            log_config["file"],
            maxBytes=int(log_config["max_size_mb"] * 1024 * 1024),
            backupCount=log_config["backup_count"],
        )
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s"))
        file_handler._gkverify = True
        logger.addHandler(file_handler)

    return logger
