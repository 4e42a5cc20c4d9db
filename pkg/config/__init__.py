"""
Configuration package for the decision-focused learning toolkit.

`settings` resolves, in order, to config/settings.py, config/settings.example.py
(with a warning) or an empty namespace. Library code reads it through
src.import_utils.get_setting, so every value has a default.
"""

import importlib.util
import warnings
from pathlib import Path
from types import ModuleType, SimpleNamespace
from typing import Union

_CONFIG_DIR = Path(__file__).parent


def _load_example() -> ModuleType:
    # the dot in the file name rules out a plain import
    path = _CONFIG_DIR / "settings.example.py"
    if not path.exists():
        raise ImportError(f"{path.name} not found")
    module_spec = importlib.util.spec_from_file_location("dfl_settings_example", path)
    if module_spec is None or module_spec.loader is None:
        raise ImportError(f"could not load {path.name}")
    module = importlib.util.module_from_spec(module_spec)
    module_spec.loader.exec_module(module)
    return module


def load_settings() -> Union[ModuleType, SimpleNamespace]:
    try:
        from . import settings as user_settings
        return user_settings
    except ImportError:
        pass
    try:
        example = _load_example()
    except Exception as e:
        warnings.warn(f"No toolkit settings found, built-in defaults apply. ({e})", UserWarning)
        return SimpleNamespace()
    warnings.warn("config/settings.py not found. Using settings.example.py defaults.", UserWarning)
    return example


settings = load_settings()

__all__ = ["settings", "load_settings"]
