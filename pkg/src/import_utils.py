"""
Import Utilities Module

Settings lookups shared by the library and the scripts.
"""

import os
import sys
from typing import Any, Optional, Type

# project root, so `config` imports from scripts and tests alike
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

try:
    from config import settings
except ImportError:
    settings = None


def get_setting(name: str, default: Any = None, cast: Optional[Type] = None) -> Any:
    """
    Read a value from config/settings.py (or the example settings).

    Args:
        name: Setting name, e.g. "DEFAULT_LR"
        default: Value used when the setting is absent
        cast: Optional type applied to the configured value

    Returns:
        The configured value or default
    """
    value = default if settings is None else getattr(settings, name, default)
    if cast is not None and value is not None:
        return cast(value)
    return value
