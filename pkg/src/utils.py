"""
Utility Functions Module
Helpers for logging, configuration loading and validation, rational snapping and file I/O
"""

import copy
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

from src.exceptions import ConfigError

DEFAULT_CONFIG: Dict[str, Any] = {
    'optimizer': {
        'max_iterations': 1000,
        'f_tolerance': 1e-10,
        'constraint_tolerance': 1e-9,
        'restarts': 100,
        'seed': 0,
        'parameterization': 'constrained',
    },
    'objective': {
        'eps_zero': 1e-9,
        'snap_denominator': 64,
        'snap_tolerance': 1e-7,
    },
    'compiler': {
        'node_ceiling': 10_000_000,
        'cache_directory': None,
        'cse': True,
    },
    'bounds': {
        'max_rotation_pairs': 12,
    },
    'logging': {
        'level': 'INFO',
        'log_file': None,
    },
    'data': {
        'output_directory': 'data',
    },
    'ui': {
        'use_colors': True,
    },
}

CAMPAIGN_KEYS = {'ancilla', 'n', 'runs', 'seed', 'parallelism', 'optimizer', 'output'}
OPTIMIZER_KEYS = set(DEFAULT_CONFIG['optimizer']) | {'eps_zero'}


def setup_logging(log_level: str = "INFO", log_file: Optional[str] = None):
    """
    Setup logging configuration

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR)
        log_file: Optional log file path
    """
    level = getattr(logging, log_level.upper(), logging.INFO)

    handlers = [logging.StreamHandler(sys.stdout)]
    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )

    logger = logging.getLogger(__name__)
    logger.debug(f"Logging configured at {log_level} level")


def merge_config(base: Dict[str, Any], override: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """
    Recursively merge ``override`` into a copy of ``base``

    Args:
        base: Default values
        override: Values taking precedence (may be None)

    Returns:
        Merged configuration dictionary
    """
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = value
    return merged


def read_structured_file(path: str) -> Dict[str, Any]:
    """
    Parse a JSON or YAML file into a dictionary

    Args:
        path: File path; the suffix selects the parser

    Returns:
        Parsed content

    Raises:
        ConfigError: if the file cannot be parsed or has an unsupported suffix
    """
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            if path.suffix == '.json':
                data = json.load(f)
            elif path.suffix in ['.yaml', '.yml']:
                data = yaml.safe_load(f)
            else:
                raise ConfigError(f"Unsupported config file format: {path.suffix}")
    except (json.JSONDecodeError, yaml.YAMLError, UnicodeDecodeError) as e:
        raise ConfigError(f"Cannot parse {path}: {e}") from e

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping at top level")
    return data


def load_config(config_path: Optional[str]) -> Dict[str, Any]:
    """
    Load configuration from JSON or YAML file, merged over the defaults

    Args:
        config_path: Path to config file

    Returns:
        Configuration dictionary
    """
    if config_path is None:
        return copy.deepcopy(DEFAULT_CONFIG)

    config_path = Path(config_path)
    if not config_path.exists():
        logging.getLogger(__name__).warning(f"Config file not found: {config_path}; using defaults")
        return copy.deepcopy(DEFAULT_CONFIG)

    return merge_config(DEFAULT_CONFIG, read_structured_file(str(config_path)))


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def validate_optimizer_section(section: Dict[str, Any]) -> Tuple[bool, Optional[str]]:
    """
    Validate an ``optimizer`` mapping

    Args:
        section: Mapping with a subset of OptimizerConfig fields

    Returns:
        Tuple of (is_valid, error_message)
    """
    unknown = set(section) - OPTIMIZER_KEYS
    if unknown:
        return False, f"Unknown optimizer keys: {sorted(unknown)}"

    for key in ('max_iterations', 'restarts'):
        if key in section and (not _is_int(section[key]) or section[key] < 1):
            return False, f"optimizer.{key} must be a positive integer"
    for key in ('f_tolerance', 'constraint_tolerance', 'eps_zero'):
        if key in section:
            value = section[key]
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
                return False, f"optimizer.{key} must be a positive number"
    if 'seed' in section and (not _is_int(section['seed']) or section['seed'] < 0):
        return False, "optimizer.seed must be a non-negative integer"
    if 'parameterization' in section and section['parameterization'] not in ('constrained', 'exponential'):
        return False, "optimizer.parameterization must be 'constrained' or 'exponential'"

    return True, None


def validate_campaign_config(config: Dict[str, Any]) -> Tuple[bool, Optional[str]]:
    """
    Validate a campaign configuration before execution

    Args:
        config: Parsed campaign configuration

    Returns:
        Tuple of (is_valid, error_message)
    """
    if not isinstance(config, dict):
        return False, "Campaign configuration must be a mapping"

    unknown = set(config) - CAMPAIGN_KEYS
    if unknown:
        return False, f"Unknown campaign keys: {sorted(unknown)}"

    for key in ('ancilla', 'n'):
        if key not in config:
            return False, f"Missing required key: {key}"

    if not isinstance(config['ancilla'], dict) or 'family' not in config['ancilla']:
        return False, "ancilla must be a mapping with a 'family' key"

    if not _is_int(config['n']) or config['n'] < 4:
        return False, "n must be an integer >= 4"

    for key in ('runs', 'parallelism'):
        if key in config and (not _is_int(config[key]) or config[key] < 1):
            return False, f"{key} must be a positive integer"

    if 'seed' in config and (not _is_int(config['seed']) or config['seed'] < 0):
        return False, "seed must be a non-negative integer"

    if 'output' in config and not isinstance(config['output'], str):
        return False, "output must be a path string"

    if 'optimizer' in config:
        if not isinstance(config['optimizer'], dict):
            return False, "optimizer must be a mapping"
        return validate_optimizer_section(config['optimizer'])

    return True, None


def snap_rational(value: float, max_denominator: int = 64,
                  tolerance: float = 1e-7) -> Optional[Fraction]:
    """
    Snap a value to a nearby rational p/q for display

    Args:
        value: Raw floating value
        max_denominator: Largest admissible q
        tolerance: Maximum |value - p/q|

    Returns:
        The fraction, or None when no p/q is close enough
    """
    candidate = Fraction(value).limit_denominator(max_denominator)
    if abs(float(candidate) - value) <= tolerance:
        return candidate
    return None


def format_duration(seconds: float) -> str:
    """
    Format duration in seconds to human-readable string

    Args:
        seconds: Duration in seconds

    Returns:
        Formatted duration string
    """
    if seconds < 60:
        return f"{seconds:.1f} seconds"
    elif seconds < 3600:
        return f"{seconds / 60:.1f} minutes"
    else:
        return f"{seconds / 3600:.1f} hours"


def write_json(data: Any, filepath: str) -> str:
    """
    Write a JSON document with stable key order

    Args:
        data: JSON-serialisable object
        filepath: Output file path

    Returns:
        Path written
    """
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
    logging.getLogger(__name__).info(f"JSON written to {filepath}")
    return str(filepath)
