"""Cas9 sgRNA sequence validation and one-hot feature encoding.

A valid guide is 23 bases over {A, C, G, T} whose last two bases are G
(the NGG protospacer-adjacent motif). Features are laid out position-major:
entry 4 * p + c is 1 iff the base at 0-based position p equals channel c,
with channels ordered alphabetically A, C, G, T. All 23 positions are
encoded, PAM included. See docs/encoding.md for the rationale.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .errors import EncodingError, PamError, SequenceAlphabetError, SequenceError, SequenceLengthError

GUIDE_LENGTH = 23
CHANNELS = "ACGT"
FEATURE_DIM = GUIDE_LENGTH * len(CHANNELS)

_CHANNEL_INDEX = {b: i for i, b in enumerate(CHANNELS)}


def validate(seq: str) -> str:
    """Return the normalized (upper-case) sequence or raise a SequenceError.

    Checks run in order: length, alphabet, PAM suffix.
    """
    s = str(seq).strip().upper()
    if len(s) != GUIDE_LENGTH:
        raise SequenceLengthError(len(s))
    for pos, base in enumerate(s):
        if base not in _CHANNEL_INDEX:
            raise SequenceAlphabetError(pos, base)
    if s[-2:] != "GG":
        raise PamError(s[-3:])
    return s


def one_hot(seq: str) -> np.ndarray:
    """Encode one guide as a float vector of length 92."""
    s = validate(seq)
    vec = np.zeros(FEATURE_DIM, dtype=float)
    for pos, base in enumerate(s):
        vec[4 * pos + _CHANNEL_INDEX[base]] = 1.0
    return vec


def encode_matrix(seqs: Iterable[str]) -> np.ndarray:
    """Stack one_hot rows for a batch of guides; shape (n, 92)."""
    rows = [one_hot(s) for s in seqs]
    if not rows:
        return np.zeros((0, FEATURE_DIM), dtype=float)
    return np.vstack(rows)


def encode_spacer(spacer: str) -> np.ndarray:
    """Opt-in one-hot for the 30-nt extended spacer; 120 floats.

    Same position-major layout and channel order as one_hot. Not used by
    the default pipeline, which models the 23-nt guide only.
    """
    s = str(spacer).strip().upper()
    if len(s) != 30:
        raise SequenceLengthError(len(s))
    vec = np.zeros(30 * len(CHANNELS), dtype=float)
    for pos, base in enumerate(s):
        if base not in _CHANNEL_INDEX:
            raise SequenceAlphabetError(pos, base)
        vec[4 * pos + _CHANNEL_INDEX[base]] = 1.0
    return vec


def decode(vec: np.ndarray) -> str:
    """Invert one_hot. Raises EncodingError on any malformed vector."""
    arr = np.asarray(vec, dtype=float)
    if arr.shape != (FEATURE_DIM,):
        raise EncodingError(f"expected shape ({FEATURE_DIM},), got {arr.shape}")
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise EncodingError("vector entries must be exactly 0 or 1")
    blocks = arr.reshape(GUIDE_LENGTH, len(CHANNELS))
    sums = blocks.sum(axis=1)
    bad = np.flatnonzero(sums != 1.0)
    if bad.size:
        raise EncodingError(f"position block {int(bad[0])} sums to {sums[bad[0]]:g}, expected 1")
    bases = [CHANNELS[int(np.argmax(block))] for block in blocks]
    s = "".join(bases)
    try:
        return validate(s)
    except SequenceError as exc:
        raise EncodingError(f"decoded sequence is not a valid guide: {exc}") from exc
