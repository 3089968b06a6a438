"""Turkish-coherent lowercasing.

Plain ``str.lower`` corrupts Turkish text around the dotted/dotless i pair:
'I' must become 'ı' (not 'i') and 'İ' must become plain 'i' (not 'i' plus a
combining dot). The two overrides are hard-coded rather than taken from a
locale so results are identical on every platform.
"""

import unicodedata
from typing import List

from .errors import EmptySample

# NormalizedText: a str that is lowercase under Turkish casing rules and an
# NFC fixed point. Plain strings are used; the functions below guarantee the
# invariants.
NormalizedText = str


def turkish_lowercase(raw: str) -> NormalizedText:
    """Lowercase ``raw`` with Turkish casing for the I family.

    Input is NFC-normalized first so a decomposed 'İ' (I + combining dot
    above) composes and takes the same path as the precomposed character.
    Digits and punctuation pass through unchanged.
    """
    text = unicodedata.normalize("NFC", raw)
    out = []
    for ch in text:
        if ch == "I":
            out.append("ı")  # dotless ı
        elif ch == "İ":  # İ
            out.append("i")
        else:
            out.append(ch.lower())
    return unicodedata.normalize("NFC", "".join(out))


def normalize_sample(tokens: List[str]) -> List[NormalizedText]:
    """Apply :func:`turkish_lowercase` to every token of one address query."""
    if not tokens:
        raise EmptySample("cannot normalize an empty token list")
    return [turkish_lowercase(t) for t in tokens]
