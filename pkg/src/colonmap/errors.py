"""Shared exception bases.

Every data-driven failure in the package (malformed file, contract
violation, unanswerable query) derives from ColonmapDataError so callers,
the command-line front end in particular, can separate "your inputs are
bad" from programming errors.  Concrete exceptions also inherit a fitting
builtin (ValueError, LookupError, ArithmeticError) so idiomatic except
clauses keep working.
"""

from __future__ import annotations


class ColonmapDataError(Exception):
    """Base for all input- and data-level errors raised by this package."""
