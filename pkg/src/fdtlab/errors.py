"""Exception hierarchy for the fdtlab package.

Every error raised on purpose by the library derives from FdtLabError so
callers (the CLI in particular) can map failures to exit codes without
pattern-matching on message strings.
"""

from __future__ import annotations


class FdtLabError(Exception):
    """Base class for all fdtlab errors."""


class ConfigError(FdtLabError):
    """Run configuration is malformed (unknown key, bad type, bad value)."""


class DataError(FdtLabError):
    """A data file is missing, truncated, or fails a format check."""


class DuplicatePieceError(DataError):
    """A piece vocabulary file lists the same piece string twice."""


class UnknownPieceError(DataError):
    """A lexicon entry references a piece string absent from the vocabulary."""


class BlankInLexiconError(DataError):
    """A lexicon entry references the reserved blank symbol."""


class EmptyLexiconEntryError(DataError):
    """A lexicon entry has no pieces."""


class UntokenizableWordError(DataError):
    """A word is not in the lexicon and greedy piece matching got stuck."""


class SpanOutOfRangeError(FdtLabError):
    """A word span does not address a valid slice of the piece sequence."""


class EmptyLabelError(FdtLabError):
    """A label sequence that must be non-empty is empty."""


class InfeasibleLabelError(FdtLabError):
    """No valid alignment path exists for the label sequence and frame count."""


class TooShortSegmentError(FdtLabError):
    """A segment has fewer frames than the pieces it must accommodate."""


class EmptyReferenceError(FdtLabError):
    """Word error rate is undefined for an empty reference."""


class DivergenceError(FdtLabError):
    """Training produced a non-finite loss or non-finite parameters."""
