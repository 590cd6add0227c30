"""Schema-guided Abugida tokenizer layered over a byte-level BPE foundation."""

from ._core import (
    Error,
    ParseError,
    RangeError,
    Tokenizer,
    ValidationError,
    __version__,
    load,
)

__all__ = [
    "Error",
    "ParseError",
    "RangeError",
    "Tokenizer",
    "ValidationError",
    "__version__",
    "load",
]
