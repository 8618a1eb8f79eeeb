"""Orthogonal value decomposition with an adaptive erasing shift.

Token position 0 (SOT) is never erased. For every other position ``j`` the
prompt value ``v`` loses its component along the target value(s) at that
position, either fully (``adaptive=False``) or scaled per target by a
sigmoid of the cosine between target and prompt value (``adaptive=True``).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from . import _kernels
from .errors import (
    DimensionMismatchError,
    LinearlyDependentConceptsError,
    ShapeMismatchError,
    WrongProvenanceError,
)
from .linalg import DEP_TOL, ZERO_TOL, OrthonormalSet, as_finite
from .tokens import EmbeddingMatrix

ValueKind = Literal["original", "target-modified", "erased"]


@dataclass(frozen=True)
class ShiftConfig:
    """Sigmoid shift hyperparameters: scale ``s``, steepness ``p``, threshold ``epsilon``."""

    s: float = 2.0
    p: float = 100.0
    epsilon: float = 0.93
    zero_tol: float = ZERO_TOL

    def __post_init__(self):
        if not (math.isfinite(self.s) and self.s > 0):
            raise ValueError(f"s must be > 0, got {self.s}")
        if not (math.isfinite(self.p) and self.p > 0):
            raise ValueError(f"p must be > 0, got {self.p}")
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.zero_tol >= 0:
            raise ValueError(f"zero_tol must be >= 0, got {self.zero_tol}")


def _fingerprint(matrix: np.ndarray) -> str:
    h = hashlib.blake2b(digest_size=12)
    h.update(np.asarray(matrix.shape, dtype="<i8").tobytes())
    h.update(np.ascontiguousarray(matrix, dtype="<f8").tobytes())
    return h.hexdigest()


@dataclass(frozen=True, eq=False)
class ValueProjector:
    """The ``D_c x d`` map from token embeddings to value vectors."""

    matrix: np.ndarray

    def __post_init__(self):
        as_finite(self.matrix, "value projector", 2)

    @property
    def fingerprint(self) -> str:
        return _fingerprint(self.matrix)


@dataclass(frozen=True, eq=False)
class ValueMatrix:
    rows: np.ndarray
    kind: ValueKind = "original"
    fingerprint: str | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows.shape


def compute_values(emb: EmbeddingMatrix | np.ndarray, proj: ValueProjector) -> ValueMatrix:
    rows = emb.rows if isinstance(emb, EmbeddingMatrix) else as_finite(emb, "embedding", 2)
    if rows.shape[1] != proj.matrix.shape[0]:
        raise DimensionMismatchError(
            f"embedding width {rows.shape[1]} does not match projector rows {proj.matrix.shape[0]}"
        )
    return ValueMatrix(rows @ proj.matrix, "original", proj.fingerprint)


def make_target_values(emb_pre: EmbeddingMatrix, proj: ValueProjector) -> ValueMatrix:
    """Values of a pre-processed target with the SOT row zeroed."""
    if emb_pre.provenance != "target-preprocessed":
        raise WrongProvenanceError(
            f"target values need a pre-processed embedding, got {emb_pre.provenance}"
        )
    vals = compute_values(emb_pre, proj)
    rows = vals.rows.copy()
    rows[0] = 0.0
    return ValueMatrix(rows, "target-modified", vals.fingerprint)


def shift_factor(vt, v, cfg: ShiftConfig = ShiftConfig()) -> float:
    """``s / (1 + exp(-p (cos(vt, v) - epsilon)))``; zero vectors count as cosine 0."""
    vt = as_finite(vt, "vt", 1)
    v = as_finite(v, "v", 1)
    if vt.shape != v.shape:
        raise DimensionMismatchError(f"shift factor of {vt.shape} and {v.shape}")
    nt, nv = np.linalg.norm(vt), np.linalg.norm(v)
    if nt < cfg.zero_tol or nv < cfg.zero_tol:
        c = 0.0
    else:
        c = float(np.clip(vt @ v / (nt * nv), -1.0, 1.0))
    return shift_from_cosine(c, cfg)


def shift_from_cosine(c: float, cfg: ShiftConfig = ShiftConfig()) -> float:
    return float(_kernels.sigmoid_shift_np(c, cfg.s, cfg.p, cfg.epsilon))


def _mode(adaptive: bool, unit_shift: bool) -> int:
    if not adaptive:
        return _kernels.MODE_PROJECT
    return _kernels.MODE_UNIT if unit_shift else _kernels.MODE_ADAPTIVE


def erase_single(
    v_orig: ValueMatrix,
    v_target: ValueMatrix,
    cfg: ShiftConfig = ShiftConfig(),
    adaptive: bool = True,
    unit_shift: bool = False,
) -> ValueMatrix:
    """Erase one target concept from every non-SOT row of ``v_orig``.

    ``unit_shift`` keeps the shifted formula but pins every shift to 1, which
    must reproduce the plain projection.
    """
    if v_orig.shape != v_target.shape:
        raise ShapeMismatchError(f"prompt values {v_orig.shape} vs target values {v_target.shape}")
    out = v_orig.rows.copy()
    out[1:] = _kernels.erase_single_rows(
        np.ascontiguousarray(v_orig.rows[1:]),
        np.ascontiguousarray(v_target.rows[1:]),
        _mode(adaptive, unit_shift),
        cfg.s,
        cfg.p,
        cfg.epsilon,
        cfg.zero_tol,
    )
    return ValueMatrix(out, "erased", v_orig.fingerprint)


@dataclass(frozen=True, eq=False)
class TargetBasis:
    """Per-position orthonormal bases for ``n`` target concepts.

    Arrays cover token positions ``1 .. l-1`` (index ``j - 1``):
    ``vectors`` and ``basis`` are ``(l-1, n, d)``, ``weights`` is
    ``(l-1, n, n)``.
    """

    vectors: np.ndarray
    basis: np.ndarray
    weights: np.ndarray
    fingerprint: str | None = None

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    @property
    def length(self) -> int:
        return self.vectors.shape[0] + 1

    @property
    def dim(self) -> int:
        return self.vectors.shape[2]

    def at(self, position: int) -> OrthonormalSet:
        if not 1 <= position < self.length:
            raise IndexError(f"no basis at token position {position}")
        return OrthonormalSet(self.basis[position - 1], self.weights[position - 1])


def build_target_basis(targets: Sequence[ValueMatrix], dep_tol: float = DEP_TOL) -> TargetBasis:
    """Gram-Schmidt over the target values at each token position."""
    if not targets:
        raise ValueError("at least one target is required")
    shape = targets[0].shape
    prints = {t.fingerprint for t in targets}
    for t in targets:
        if t.shape != shape:
            raise ShapeMismatchError(f"target values {t.shape} vs {shape}")
    if len(prints) > 1:
        raise ValueError("targets were computed with different value projectors")
    # (l-1, n, d)
    vectors = np.ascontiguousarray(np.stack([t.rows[1:] for t in targets], axis=1))
    basis, weights, pos, idx = _kernels.mgs_batch(vectors, dep_tol)
    if pos >= 0:
        raise LinearlyDependentConceptsError(pos + 1, idx)
    return TargetBasis(vectors, basis, weights, prints.pop())


def erase_multi(
    v_orig: ValueMatrix,
    basis: TargetBasis,
    cfg: ShiftConfig = ShiftConfig(),
    adaptive: bool = True,
    unit_shift: bool = False,
) -> ValueMatrix:
    """Erase every concept in ``basis`` from the non-SOT rows of ``v_orig``."""
    l, d = v_orig.shape
    if l != basis.length or d != basis.dim:
        raise ShapeMismatchError(
            f"prompt values {v_orig.shape} vs basis for length {basis.length}, dim {basis.dim}"
        )
    out = v_orig.rows.copy()
    out[1:] = _kernels.erase_multi_rows(
        np.ascontiguousarray(v_orig.rows[1:]),
        basis.vectors,
        basis.basis,
        basis.weights,
        _mode(adaptive, unit_shift),
        cfg.s,
        cfg.p,
        cfg.epsilon,
        cfg.zero_tol,
    )
    return ValueMatrix(out, "erased", v_orig.fingerprint)
