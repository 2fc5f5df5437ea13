"""
Logging system for the test suite.

Provides a narrative (human-readable) log, a structured JSON Lines log and
a summary.md that collects the rejection frequencies of Monte Carlo tests.
"""

from .test_logger import TestLogger
from .narrative_formatter import NarrativeFormatter
from .structured_formatter import StructuredFormatter

__all__ = [
    'TestLogger',
    'NarrativeFormatter',
    'StructuredFormatter',
]
