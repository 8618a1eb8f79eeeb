"""Training-free concept erasure by orthogonal value decomposition.

The numeric core lives in :mod:`orthoerase.linalg` and
:mod:`orthoerase.eraser`; :mod:`orthoerase.pipeline` drives a synthetic
cross-attention stack end to end.
"""

from ._kernels import BACKEND
from .eraser import (
    ShiftConfig,
    TargetBasis,
    ValueMatrix,
    ValueProjector,
    build_target_basis,
    compute_values,
    erase_multi,
    erase_single,
    make_target_values,
    shift_factor,
)
from .linalg import (
    GaussianStats,
    OrthonormalSet,
    cosine,
    frechet_gaussian,
    gram_schmidt,
    project_complement_basis,
    project_complement_inverse,
)
from .pipeline import PipelineConfig, cs_analog, fid_analog, run, scenario_multi
from .tokens import EmbeddingMatrix, TokenSequence, encode_causal, preprocess_target, tokenize

__version__ = "0.1.0"
