import sys
import json
import logging
import argparse

from importlib import resources
from pathlib import Path
from typing import Dict, Any, Optional

import toml

import oscaudit

# Filled by init
args: Optional[argparse.Namespace] = None
config: Dict[str, Any] = {}


def load_defaults() -> Dict[str, Any]:
    """
    Read packaged default settings
    :return: Dictionary of defaults
    """
    return toml.loads(resources.files('oscaudit').joinpath('defaults.toml').read_text(encoding='utf-8'))


def merge(base: Dict[str, Any], extra: Dict[str, Any]) -> Dict[str, Any]:
    """
    Deep merge two dictionaries, values of extra win
    :param base: default values
    :param extra: user values
    :return: New merged dictionary
    """
    merged = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_file(path: str | Path) -> Dict[str, Any]:
    """
    Read a user configuration file in toml or json format
    :param path: file path
    :return: Dictionary of settings
    """
    path = Path(path).expanduser()
    try:
        if path.suffix == '.toml':
            return toml.load(path)
        if path.suffix == '.json':
            with open(path, encoding='utf-8') as file:
                return json.load(file)
    except FileNotFoundError:
        raise oscaudit.UsageError(f'Problem opening {path}! File not found', path=str(path))
    except (toml.TomlDecodeError, json.JSONDecodeError) as exc:
        raise oscaudit.UsageError(f'Problem reading {path} {str(exc)}', path=str(path))
    raise oscaudit.UsageError(f'{path} must be a .toml or .json file', path=str(path))


def init(arguments: argparse.Namespace) -> argparse.Namespace:
    """
    Get application input options and parameters
    :param arguments: argument provided by argparse
    :return: same as input
    """
    # Initialize global variables using setattr
    this_module = sys.modules[__name__]
    settings = load_defaults()
    if path := getattr(arguments, 'config', None):
        settings = merge(settings, load_file(path))
    # Command line options override file values
    for key in ('seed', 'samples', 'tol', 'workers'):
        if (value := getattr(arguments, key, None)) is not None:
            settings['run'][key] = value
    setattr(this_module, 'args', arguments)
    setattr(this_module, 'config', settings)

    level = logging.DEBUG if getattr(arguments, 'debug', False) else \
        logging.INFO if getattr(arguments, 'verbose', False) else logging.WARNING
    logging.basicConfig(level=level, format='%(asctime)s %(name)s %(levelname)s %(message)s')
    return arguments


def section(name: str) -> Dict[str, Any]:
    """
    Get a configuration section, falling back to packaged defaults when init was not called
    :param name: section name
    :return: Dictionary of settings
    """
    return dict((config or load_defaults()).get(name, {}))
