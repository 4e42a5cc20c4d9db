"""
Tests for the settings lookup chain.
"""

import config
from src import import_utils
from src.import_utils import get_setting


def test_missing_setting_uses_default():
    assert get_setting("NO_SUCH_SETTING", 42) == 42
    assert get_setting("NO_SUCH_SETTING") is None


def test_cast_applies_to_configured_value():
    assert get_setting("DEFAULT_BATCH_SIZE", 32, cast=float) == float(get_setting("DEFAULT_BATCH_SIZE", 32))


def test_settings_resolve_to_a_loaded_module():
    loaded = config.load_settings()
    assert hasattr(loaded, "TSP_EXACT_LIMIT")
    assert get_setting("TSP_LP_LIMIT", 12) == loaded.TSP_LP_LIMIT


def test_no_settings_module(monkeypatch):
    monkeypatch.setattr(import_utils, "settings", None)
    assert get_setting("DEFAULT_LR", 0.5) == 0.5
