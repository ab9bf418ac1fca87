"""Multiple-time pad cipher: basic-key libraries, keywords, the augmented
cipher and its variations, framing, and a cryptanalysis harness."""

from .bitstring import BitString
from .cipher import (
    Ambiguous,
    CipherOutput,
    Direction,
    Policy,
    SessionConfig,
    SessionKeys,
    Variant,
    decrypt,
    encrypt,
    new_session_keys,
    open_stream,
    receiver_keys,
)
from .keys import GBounds, Keyword, Rule
from .library import Library, LibraryConfig, Method

__version__ = "0.1.0"

__all__ = [
    "Ambiguous", "BitString", "CipherOutput", "Direction", "GBounds", "Keyword",
    "Library", "LibraryConfig", "Method", "Policy", "Rule", "SessionConfig",
    "SessionKeys", "Variant", "decrypt", "encrypt", "new_session_keys",
    "open_stream", "receiver_keys",
]
