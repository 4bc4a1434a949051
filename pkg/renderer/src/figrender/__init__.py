"""Turns the training studies' CSV artifacts into figures.

The renderer is deliberately decoupled from the package that produces the
CSVs: it communicates through the documented file layout only, validates
headers before reading a single data row, and never modifies its inputs.
"""

__version__ = "0.1.0"

from .figures import render  # noqa: F401
from .schema import SchemaError  # noqa: F401
