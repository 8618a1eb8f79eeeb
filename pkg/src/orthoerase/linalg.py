"""Dense linear algebra used by the eraser.

Everything here works in float64 on plain numpy arrays. Vectors are 1-D
arrays; a set of ``n`` vectors of dimension ``d`` is stored row-wise as an
``(n, d)`` array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import (
    DimensionMismatchError,
    LinearlyDependentError,
    NonFiniteError,
    NotSymmetricError,
    SingularGramError,
    ZeroNormError,
)

ZERO_TOL = 1e-12
DEP_TOL = 1e-8
COND_MAX = 1e12
SYM_TOL = 1e-9
_REFINE_STEPS = 4


def as_finite(x, name: str = "input", ndim: int | None = None) -> np.ndarray:
    """Return ``x`` as a float64 array, rejecting NaN/Inf and wrong rank."""
    arr = np.asarray(x, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionMismatchError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionMismatchError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return arr


def cosine(x, y, zero_tol: float = ZERO_TOL) -> float:
    """Cosine similarity clamped to [-1, 1].

    Raises ZeroNormError when either vector is (numerically) zero; callers
    pick the fallback.
    """
    x = as_finite(x, "x", 1)
    y = as_finite(y, "y", 1)
    if x.shape != y.shape:
        raise DimensionMismatchError(f"cosine of {x.shape} and {y.shape}")
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    if nx < zero_tol or ny < zero_tol:
        raise ZeroNormError("cosine undefined for a zero-norm vector")
    return float(np.clip(np.dot(x, y) / (nx * ny), -1.0, 1.0))


@dataclass(frozen=True)
class OrthonormalSet:
    """Orthonormal basis plus the upper-triangular weights that produce it.

    ``basis`` is ``(n, d)``. ``weights`` is ``(n, n)`` with
    ``inputs.T @ weights == basis.T``: column ``h`` of ``weights`` holds the
    coefficients expressing basis vector ``h`` in the original vectors.
    """

    basis: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def gram_schmidt(vectors, dep_tol: float = DEP_TOL) -> OrthonormalSet:
    """Orthonormalise ``vectors`` (rows) with re-orthogonalised MGS.

    Raises
    ------
    LinearlyDependentError
        If the residual of vector ``k`` drops to ``dep_tol`` times its own
        norm or below. ``err.index`` is ``k``.
    """
    V = as_finite(vectors, "vectors", 2)
    n, d = V.shape
    if n > d:
        raise DimensionMismatchError(f"{n} vectors cannot be independent in dimension {d}")
    Q, W, pos, idx = _kernels.mgs_batch(V[None, :, :].copy(), dep_tol)
    if pos >= 0:
        raise LinearlyDependentError(idx)
    return OrthonormalSet(basis=Q[0], weights=W[0])


def project_complement_basis(v, basis: OrthonormalSet) -> np.ndarray:
    """``v - sum_h (o_h . v) o_h``."""
    v = as_finite(v, "v", 1)
    if v.shape[0] != basis.dim:
        raise DimensionMismatchError(f"vector of dim {v.shape[0]} vs basis of dim {basis.dim}")
    O = basis.basis
    return v - O.T @ (O @ v)


def project_complement_inverse(v, spanning, cond_max: float = COND_MAX) -> np.ndarray:
    """Complement projection through the Gram matrix instead of an orthonormal basis.

    ``spanning`` is ``d x n`` with the spanning vectors as columns. The Gram
    system is factorised once (pivoted symmetric-indefinite) and the
    coefficients are refined against the true residual ``A^T (v - A x)``;
    without refinement the error grows like ``cond(A)**2 * eps``.
    """
    v = as_finite(v, "v", 1)
    A = as_finite(spanning, "spanning", 2)
    if A.shape[0] != v.shape[0]:
        raise DimensionMismatchError(f"spanning has {A.shape[0]} rows, v has dim {v.shape[0]}")
    if A.shape[1] > A.shape[0]:
        raise SingularGramError(f"{A.shape[1]} columns cannot be independent in dimension {A.shape[0]}")
    sv = np.linalg.svd(A, compute_uv=False)
    cond = np.inf if sv[-1] == 0.0 else (sv[0] / sv[-1]) ** 2
    if not np.isfinite(cond) or cond > cond_max:
        raise SingularGramError(f"Gram matrix condition {cond:.3e} exceeds {cond_max:.1e}")
    G = A.T @ A
    lu, piv, _ = scipy.linalg.lapack.dsytrf(G, lower=1)
    coef = np.zeros(A.shape[1])
    r = v.copy()
    for _ in range(_REFINE_STEPS):
        step, info = scipy.linalg.lapack.dsytrs(lu, piv, A.T @ r, lower=1)
        if info != 0:
            raise SingularGramError(f"symmetric solve failed (info={info})")
        coef = coef + step
        r = v - A @ coef
    return r


@dataclass(frozen=True)
class GaussianStats:
    mean: np.ndarray
    covariance: np.ndarray

    @classmethod
    def fit(cls, samples) -> "GaussianStats":
        """Mean and unbiased covariance of row samples (needs >= 2 rows)."""
        X = as_finite(samples, "samples", 2)
        if X.shape[0] < 2:
            raise DimensionMismatchError("need at least two samples for a covariance")
        return cls(mean=X.mean(axis=0), covariance=np.atleast_2d(np.cov(X, rowvar=False)))


def _check_sym(S: np.ndarray, name: str, tol: float) -> None:
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got {S.shape}")
    scale = max(1.0, float(np.max(np.abs(S))))
    if np.max(np.abs(S - S.T)) > tol * scale:
        raise NotSymmetricError(f"{name} is not symmetric")


def sqrtm_psd(S: np.ndarray) -> np.ndarray:
    """Symmetric square root with negative eigenvalues clamped to zero."""
    w, U = np.linalg.eigh((S + S.T) / 2.0)
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.T


def frechet_gaussian(a: GaussianStats, b: GaussianStats, sym_tol: float = SYM_TOL) -> float:
    """Squared Frechet (2-Wasserstein) distance between two Gaussians."""
    mu_a = as_finite(a.mean, "mean", 1)
    mu_b = as_finite(b.mean, "mean", 1)
    Sa = as_finite(a.covariance, "covariance", 2)
    Sb = as_finite(b.covariance, "covariance", 2)
    if mu_a.shape != mu_b.shape or Sa.shape != Sb.shape or Sa.shape[0] != mu_a.shape[0]:
        raise DimensionMismatchError("Gaussian statistics have mismatched dimensions")
    _check_sym(Sa, "covariance a", sym_tol)
    _check_sym(Sb, "covariance b", sym_tol)

    root_a = sqrtm_psd(Sa)
    cross = sqrtm_psd(root_a @ Sb @ root_a)
    diff = mu_a - mu_b
    value = float(diff @ diff + np.trace(Sa) + np.trace(Sb) - 2.0 * np.trace(cross))
    return max(value, 0.0)
