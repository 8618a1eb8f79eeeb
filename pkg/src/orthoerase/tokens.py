"""Toy tokenizer, causal synthetic text encoder and target pre-processing.

Embedding coordinates are split into three blocks:

* ``special`` (2 dims): fixed axis vectors for SOT and EOT,
* ``shared``: pseudo-random directions for ordinary words,
* ``reserved`` (``D_c // 4`` dims): words spelled ``ortho<digits>``.

Words from the reserved block never overlap ordinary words, which is what
the pipeline uses to build prompts that are orthogonal to every target by
construction.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .errors import (
    DimensionMismatchError,
    NoContentTokenError,
    PromptTooLongError,
    PromptTooShortError,
    WrongProvenanceError,
)

SOT_ID = 0
EOT_ID = 1
RESERVED_BIT = 1 << 62
DEFAULT_LENGTH = 77
DEFAULT_DC = 64
DECAY = 0.5

_WORD = re.compile(r"[a-z0-9']+")
_RESERVED_WORD = re.compile(r"ortho\d+")

Provenance = Literal["prompt", "target-raw", "target-preprocessed"]


def word_id(word: str) -> int:
    digest = hashlib.blake2b(word.encode("utf-8"), digest_size=8).digest()
    wid = (int.from_bytes(digest, "little") >> 3) + 2
    if _RESERVED_WORD.fullmatch(word):
        wid |= RESERVED_BIT
    return wid


def is_reserved(token_id: int) -> bool:
    return bool(token_id & RESERVED_BIT)


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple[int, ...]
    content_len: int
    words: tuple[str, ...] = ()

    sot_index = 0

    @property
    def length(self) -> int:
        return len(self.ids)

    @property
    def eot_start(self) -> int:
        return self.content_len + 1


def tokenize(text: str, length: int = DEFAULT_LENGTH) -> TokenSequence:
    """Split on whitespace/punctuation and pad to ``length`` with SOT/EOT."""
    if length < 3:
        raise DimensionMismatchError(f"token length must be at least 3, got {length}")
    words = _WORD.findall(text.lower())
    if not words:
        raise PromptTooShortError(f"no words in prompt {text!r}")
    if len(words) > length - 2:
        raise PromptTooLongError(f"{len(words)} words exceed the limit of {length - 2}")
    ids = [SOT_ID, *(word_id(w) for w in words)]
    ids += [EOT_ID] * (length - len(ids))
    return TokenSequence(ids=tuple(ids), content_len=len(words), words=tuple(words))


@dataclass(frozen=True)
class Layout:
    """Coordinate blocks of a ``d_c``-dimensional embedding."""

    d_c: int

    def __post_init__(self):
        if self.d_c < 4:
            raise DimensionMismatchError(f"embedding dimension must be >= 4, got {self.d_c}")

    @property
    def reserved(self) -> slice:
        return slice(self.d_c - max(1, self.d_c // 4), self.d_c)

    @property
    def shared(self) -> slice:
        return slice(2, self.reserved.start)


def base_vector(token_id: int, seed: int, d_c: int) -> np.ndarray:
    """Deterministic unit vector for one token id."""
    layout = Layout(d_c)
    out = np.zeros(d_c)
    if token_id in (SOT_ID, EOT_ID):
        out[token_id] = 1.0
        return out
    block = layout.reserved if is_reserved(token_id) else layout.shared
    rng = np.random.default_rng([seed & 0xFFFFFFFF, token_id & 0xFFFFFFFF, token_id >> 32])
    g = rng.standard_normal(block.stop - block.start)
    out[block] = g / np.linalg.norm(g)
    return out


@dataclass(frozen=True)
class EmbeddingMatrix:
    rows: np.ndarray
    provenance: Provenance = "prompt"
    tokens: TokenSequence | None = None

    @property
    def length(self) -> int:
        return self.rows.shape[0]


def encode_causal(
    tokens: TokenSequence,
    seed: int = 0,
    d_c: int = DEFAULT_DC,
    provenance: Provenance = "prompt",
) -> EmbeddingMatrix:
    """Row ``j`` is the unit-normalised ``sum_{i<=j} DECAY**(j-i) * base(id_i)``."""
    rows = np.empty((tokens.length, d_c))
    acc = np.zeros(d_c)
    cache: dict[int, np.ndarray] = {}
    for j, tid in enumerate(tokens.ids):
        if tid not in cache:
            cache[tid] = base_vector(tid, seed, d_c)
        acc = cache[tid] + DECAY * acc
        rows[j] = acc / np.linalg.norm(acc)
    return EmbeddingMatrix(rows=rows, provenance=provenance, tokens=tokens)


def encode_text(
    text: str,
    seed: int = 0,
    d_c: int = DEFAULT_DC,
    length: int = DEFAULT_LENGTH,
    provenance: Provenance = "prompt",
) -> EmbeddingMatrix:
    return encode_causal(tokenize(text, length), seed, d_c, provenance)


def preprocess_target(emb: EmbeddingMatrix, tokens: TokenSequence | None = None) -> EmbeddingMatrix:
    """Keep the SOT row and copy the last subject token's row everywhere else."""
    if emb.provenance == "target-preprocessed":
        return emb
    if emb.provenance != "target-raw":
        raise WrongProvenanceError(f"expected a target-raw embedding, got {emb.provenance}")
    tokens = tokens if tokens is not None else emb.tokens
    if tokens is None or tokens.content_len < 1:
        raise NoContentTokenError("target has no content token")
    rows = emb.rows.copy()
    rows[1:] = emb.rows[tokens.content_len]
    return replace(emb, rows=rows, provenance="target-preprocessed", tokens=tokens)


def encode_target(
    text: str, seed: int = 0, d_c: int = DEFAULT_DC, length: int = DEFAULT_LENGTH
) -> EmbeddingMatrix:
    tokens = tokenize(text, length)
    return preprocess_target(encode_causal(tokens, seed, d_c, "target-raw"), tokens)
