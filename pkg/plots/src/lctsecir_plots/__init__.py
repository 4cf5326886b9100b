"""Figure rendering for lctsecir CSV/JSON artifacts.

This package never recomputes model quantities; it only reads the CSV and
JSON files written by the ``lctsecir`` command-line tool.
"""
from .figures import KINDS, render
from .readers import InputError, SchemaError

__all__ = ["KINDS", "render", "InputError", "SchemaError"]
__version__ = "0.1.0"
