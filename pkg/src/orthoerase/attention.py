"""Single-head cross-attention layer with an erasure hook on the value path.

Latent features are plain ``(HW, D_z)`` float arrays. The output map after
aggregation is one linear map; the erasure never touches keys or queries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eraser import (
    ShiftConfig,
    TargetBasis,
    ValueMatrix,
    ValueProjector,
    compute_values,
    erase_multi,
    erase_single,
)
from .errors import BasisLayerMismatchError, DimensionMismatchError
from .linalg import as_finite
from .tokens import EmbeddingMatrix, Layout


def _semi_orthogonal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Random ``rows x cols`` map; an isometry on row space whenever rows <= cols."""
    g = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))
    return q.T if rows <= cols else q


def structured_value_projector(rng: np.random.Generator, d_c: int, d: int) -> ValueProjector:
    """Value map that drops SOT/EOT axes and keeps shared and reserved words apart."""
    if d < 2:
        raise DimensionMismatchError(f"value dimension must be >= 2, got {d}")
    layout = Layout(d_c)
    r_val = max(1, d // 4)
    W = np.zeros((d_c, d))
    sh, rs = layout.shared, layout.reserved
    W[sh, : d - r_val] = _semi_orthogonal(rng, sh.stop - sh.start, d - r_val)
    W[rs, d - r_val :] = _semi_orthogonal(rng, rs.stop - rs.start, r_val)
    return ValueProjector(W)


@dataclass(frozen=True, eq=False)
class CALayer:
    key: np.ndarray  # (D_c, d)
    value: ValueProjector  # (D_c, d)
    query: np.ndarray  # (D_z, d)
    out: np.ndarray  # (d, D_z)

    def __post_init__(self):
        for name in ("key", "query", "out"):
            as_finite(getattr(self, name), name, 2)
        d_c, d = self.key.shape
        if self.value.matrix.shape != (d_c, d):
            raise DimensionMismatchError("key and value projectors differ in shape")
        if self.query.shape[1] != d or self.out.shape != (d, self.query.shape[0]):
            raise DimensionMismatchError("query/output maps inconsistent with head dimension")

    @property
    def d(self) -> int:
        return self.key.shape[1]

    @property
    def d_c(self) -> int:
        return self.key.shape[0]

    @property
    def d_z(self) -> int:
        return self.query.shape[0]

    @property
    def fingerprint(self) -> str:
        return self.value.fingerprint

    @classmethod
    def random(cls, rng: np.random.Generator, d_c: int, d: int, d_z: int) -> "CALayer":
        key = rng.standard_normal((d_c, d)) / np.sqrt(d_c)
        value = structured_value_projector(rng, d_c, d)
        query = rng.standard_normal((d_z, d)) / np.sqrt(d_z)
        out = rng.standard_normal((d, d_z)) / np.sqrt(d)
        return cls(key, value, query, out)


def _check_inputs(z, emb: EmbeddingMatrix, layer: CALayer) -> np.ndarray:
    z = as_finite(z, "latent", 2)
    if z.shape[1] != layer.d_z:
        raise DimensionMismatchError(f"latent channels {z.shape[1]} != layer D_z {layer.d_z}")
    if emb.rows.shape[1] != layer.d_c:
        raise DimensionMismatchError(f"embedding width {emb.rows.shape[1]} != layer D_c {layer.d_c}")
    return z


def attention_map(z, emb: EmbeddingMatrix, layer: CALayer) -> np.ndarray:
    """Row-stochastic ``(HW, l)`` softmax of scaled query-key products."""
    z = _check_inputs(z, emb, layer)
    logits = (z @ layer.query) @ (emb.rows @ layer.key).T / np.sqrt(layer.d)
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    return w / w.sum(axis=1, keepdims=True)


def forward(z, emb: EmbeddingMatrix, layer: CALayer, values: ValueMatrix | None = None) -> np.ndarray:
    """``(A @ V) @ out``. ``values`` overrides ``V`` (used to inject edited values)."""
    A = attention_map(z, emb, layer)
    V = compute_values(emb, layer.value) if values is None else values
    if V.shape != (A.shape[1], layer.d):
        raise DimensionMismatchError(f"values {V.shape} vs expected {(A.shape[1], layer.d)}")
    return (A @ V.rows) @ layer.out


def forward_erased(
    z,
    emb: EmbeddingMatrix,
    layer: CALayer,
    target: TargetBasis | ValueMatrix,
    cfg: ShiftConfig = ShiftConfig(),
    adaptive: bool = True,
    unit_shift: bool = False,
) -> tuple[np.ndarray, ValueMatrix]:
    """Layer output with erased values, plus the erased value matrix itself."""
    if target.fingerprint is not None and target.fingerprint != layer.fingerprint:
        raise BasisLayerMismatchError("target values were built with another layer's projector")
    values = compute_values(emb, layer.value)
    if isinstance(target, TargetBasis):
        erased = erase_multi(values, target, cfg, adaptive, unit_shift)
    else:
        erased = erase_single(values, target, cfg, adaptive, unit_shift)
    return forward(z, emb, layer, erased), erased
