"""Synthetic end-to-end harness around the eraser.

A run seeds a latent, then for each synthetic step pushes it through a
stack of cross-attention layers twice: once with the prompt's own values
and once with erased values. Both passes start from the same latent, so any
difference between them comes from the erasure alone. Set
``divergent=True`` to let the erased pass follow its own trajectory instead.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .attention import CALayer, forward, forward_erased
from .eraser import (
    ShiftConfig,
    TargetBasis,
    ValueMatrix,
    build_target_basis,
    compute_values,
    make_target_values,
)
from .errors import InvariantViolation, TooFewSamplesError
from .linalg import GaussianStats, frechet_gaussian
from .tokens import (
    DEFAULT_DC,
    DEFAULT_LENGTH,
    EmbeddingMatrix,
    Layout,
    encode_causal,
    preprocess_target,
    tokenize,
)


@dataclass(frozen=True)
class PipelineConfig:
    layers: int = 4
    steps: int = 5
    d: int = 64
    d_c: int = DEFAULT_DC
    d_z: int = 32
    length: int = DEFAULT_LENGTH
    hw: int = 16
    seed: int = 0
    shift: ShiftConfig = field(default_factory=ShiftConfig)
    adaptive: bool = True
    unit_shift: bool = False
    divergent: bool = False
    # erase only during the first ``erase_steps`` steps; None means every step
    erase_steps: int | None = None

    def __post_init__(self):
        for name in ("layers", "steps", "d", "d_c", "d_z", "length", "hw"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


@lru_cache(maxsize=64)
def _stack(layers: int, d_c: int, d: int, d_z: int, seed: int) -> tuple[CALayer, ...]:
    root = np.random.SeedSequence([seed, 0xCA])
    return tuple(
        CALayer.random(np.random.default_rng(child), d_c, d, d_z) for child in root.spawn(layers)
    )


def build_stack(cfg: PipelineConfig) -> tuple[CALayer, ...]:
    return _stack(cfg.layers, cfg.d_c, cfg.d, cfg.d_z, cfg.seed)


@lru_cache(maxsize=1024)
def _encode(text: str, seed: int, d_c: int, length: int, provenance: str) -> EmbeddingMatrix:
    return encode_causal(tokenize(text, length), seed, d_c, provenance)


def encode_prompt(prompt: str | EmbeddingMatrix, cfg: PipelineConfig) -> EmbeddingMatrix:
    if isinstance(prompt, EmbeddingMatrix):
        return prompt
    return _encode(prompt, cfg.seed, cfg.d_c, cfg.length, "prompt")


def encode_target(target: str, cfg: PipelineConfig) -> EmbeddingMatrix:
    raw = _encode(target, cfg.seed, cfg.d_c, cfg.length, "target-raw")
    pre = preprocess_target(raw)
    if len(np.unique(pre.rows, axis=0)) > 2:
        raise InvariantViolation(f"pre-processed target {target!r} has more than two distinct rows")
    return pre


def blend_toward(
    prompt: str, target: str, similarity: float, cfg: PipelineConfig
) -> EmbeddingMatrix:
    """Embedding of ``prompt`` rotated so every content-carrying row has the
    given cosine with ``target``'s subject row inside the shared word block.

    Because value projectors act isometrically on that block, the same
    cosine holds between prompt and target values in every layer. Used to
    stand in for semantically related concepts, which random toy word
    vectors cannot express.
    """
    if not -1.0 <= similarity <= 1.0:
        raise ValueError(f"similarity must be in [-1, 1], got {similarity}")
    base = encode_prompt(prompt, cfg)
    t = encode_target(target, cfg).rows[1]
    sh = Layout(cfg.d_c).shared
    t_s = t[sh] / np.linalg.norm(t[sh])
    rows = base.rows.copy()
    for j in range(1, rows.shape[0]):
        r = rows[j, sh]
        mag = np.linalg.norm(r)
        if mag == 0.0:
            continue
        u = r - (r @ t_s) * t_s
        nu = np.linalg.norm(u)
        if nu == 0.0:
            u = np.zeros_like(r)
            u[np.argmin(np.abs(t_s))] = 1.0
            u -= (u @ t_s) * t_s
            nu = np.linalg.norm(u)
        rows[j, sh] = mag * (similarity * t_s + math.sqrt(1.0 - similarity**2) * u / nu)
    return EmbeddingMatrix(rows=rows, provenance="prompt", tokens=base.tokens)


def _label(prompt: str | EmbeddingMatrix) -> str:
    if isinstance(prompt, str):
        return prompt
    if prompt.tokens is not None:
        return " ".join(prompt.tokens.words)
    return "<embedding>"


@dataclass
class ErasureReport:
    """Everything a run records. Array axes are (step, layer, token[, channel])."""

    prompt: str
    targets: tuple[str, ...]
    components: np.ndarray
    component_norms: np.ndarray
    value_norms: np.ndarray  # Frobenius norm of the prompt values per layer
    samples_before: np.ndarray  # final-layer output per step, (steps, HW, D_z)
    samples_after: np.ndarray
    cs_before: float
    cs_after: float
    fid: float
    concept_flags: dict[str, bool]
    elapsed: float = 0.0

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    @property
    def cs_drop(self) -> float:
        return self.cs_before - self.cs_after

    @property
    def mean_component_norm(self) -> float:
        return float(self.component_norms.mean())


@dataclass
class RunResult:
    features_before: np.ndarray
    features_after: np.ndarray
    report: ErasureReport


def _target_values(targets: Sequence[str], layers, cfg) -> list[list[ValueMatrix]]:
    embs = [encode_target(t, cfg) for t in targets]
    return [[make_target_values(e, layer.value) for e in embs] for layer in layers]


def _erasers(target_vals: list[list[ValueMatrix]], n: int) -> list[TargetBasis | ValueMatrix] | None:
    if n == 0:
        return None
    if n == 1:
        return [vals[0] for vals in target_vals]
    return [build_target_basis(vals[:n]) for vals in target_vals]


def _concept_flags(targets, prompt_vals, target_vals, cfg) -> dict[str, bool]:
    flags = {}
    for h, name in enumerate(targets):
        hit = False
        for V, vals in zip(prompt_vals, target_vals):
            T = vals[h].rows[1:]
            P = V.rows[1:]
            num = np.einsum("jd,jd->j", T, P)
            den = np.linalg.norm(T, axis=1) * np.linalg.norm(P, axis=1)
            ok = den > cfg.shift.zero_tol**2
            if np.any(num[ok] / den[ok] > cfg.shift.epsilon):
                hit = True
                break
        flags[name] = hit
    return flags


def _execute(
    prompt: str | EmbeddingMatrix,
    targets: Sequence[str],
    cfg: PipelineConfig,
    layers,
    target_vals,
    erasers,
) -> RunResult:
    started = time.perf_counter()
    emb = encode_prompt(prompt, cfg)
    prompt_vals = [compute_values(emb, layer.value) for layer in layers]
    L, S = len(layers), cfg.steps
    components = np.zeros((S, L, cfg.length, cfg.d))

    rng = np.random.default_rng([cfg.seed, 0x1A7])
    z = rng.standard_normal((cfg.hw, cfg.d_z))
    z_alt = z.copy()
    before = np.empty((S, cfg.hw, cfg.d_z))
    after = np.empty((S, cfg.hw, cfg.d_z))
    dt = 1.0 / S

    for step in range(S):
        h = z
        for layer in layers:
            h = forward(h, emb, layer)
        before[step] = h

        erase_now = erasers is not None and (cfg.erase_steps is None or step < cfg.erase_steps)
        h = z_alt if cfg.divergent else z
        for i, layer in enumerate(layers):
            if not erase_now:
                h = forward(h, emb, layer)
                continue
            h, erased = forward_erased(
                h, emb, layer, erasers[i], cfg.shift, cfg.adaptive, cfg.unit_shift
            )
            if not np.array_equal(erased.rows[0], prompt_vals[i].rows[0]):
                raise InvariantViolation("erasure modified the SOT value row")
            components[step, i] = prompt_vals[i].rows - erased.rows
        after[step] = h

        z = z - dt * before[step]
        z_alt = z_alt - dt * after[step] if cfg.divergent else z

    label = _label(prompt)
    norms = np.linalg.norm(components, axis=-1)
    fid = fid_analog(list(before), list(after)) if S >= 2 else float("nan")
    flags = _concept_flags(targets, prompt_vals, target_vals, cfg) if targets else {}
    report = ErasureReport(
        prompt=label,
        targets=tuple(targets),
        components=components,
        component_norms=norms,
        value_norms=np.array([np.linalg.norm(V.rows) for V in prompt_vals]),
        samples_before=before,
        samples_after=after,
        cs_before=cs_analog(before[-1], emb, cfg),
        cs_after=cs_analog(after[-1], emb, cfg),
        fid=fid,
        concept_flags=flags,
        elapsed=time.perf_counter() - started,
    )
    return RunResult(before[-1].copy(), after[-1].copy(), report)


def run(
    prompt: str | EmbeddingMatrix, targets: Sequence[str], cfg: PipelineConfig = PipelineConfig()
) -> RunResult:
    """Plain vs erased generation for one prompt. ``targets`` may be empty."""
    targets = tuple(targets)
    layers = build_stack(cfg)
    target_vals = _target_values(targets, layers, cfg)
    return _execute(prompt, targets, cfg, layers, target_vals, _erasers(target_vals, len(targets)))


def _pooled(concept: str | EmbeddingMatrix, cfg: PipelineConfig) -> np.ndarray:
    emb = encode_prompt(concept, cfg)
    k = emb.tokens.content_len if emb.tokens is not None else emb.length - 1
    return emb.rows[k]


def cs_analog(features, concept: str | EmbeddingMatrix, cfg: PipelineConfig = PipelineConfig()) -> float:
    """Cosine between mean-pooled features and the concept's subject-token
    embedding pushed through the last layer's value and output maps."""
    f = np.asarray(features, dtype=np.float64).mean(axis=0)
    last = build_stack(cfg)[-1]
    g = _pooled(concept, cfg) @ last.value.matrix @ last.out
    nf, ng = np.linalg.norm(f), np.linalg.norm(g)
    if nf == 0.0 or ng == 0.0:
        return 0.0
    return float(np.clip(f @ g / (nf * ng), -1.0, 1.0))


def fid_analog(set_a: Sequence[np.ndarray], set_b: Sequence[np.ndarray]) -> float:
    """Frechet distance between Gaussians fitted to per-sample mean features."""
    if len(set_a) < 2 or len(set_b) < 2:
        raise TooFewSamplesError("fid_analog needs at least two samples per set")
    a = np.stack([np.asarray(f, dtype=np.float64).mean(axis=0) for f in set_a])
    b = np.stack([np.asarray(f, dtype=np.float64).mean(axis=0) for f in set_b])
    return frechet_gaussian(GaussianStats.fit(a), GaussianStats.fit(b))


@dataclass(frozen=True)
class ScenarioRow:
    prompt: str
    n_targets: int
    cs_analog: float
    fid_analog: float
    mean_component_norm: float


def scenario_multi(
    prompts: Sequence[str | EmbeddingMatrix],
    targets: Sequence[str],
    cfg: PipelineConfig = PipelineConfig(),
) -> list[ScenarioRow]:
    """Erase ``targets[:n]`` cumulatively for n = 0 .. len(targets)."""
    targets = tuple(targets)
    layers = build_stack(cfg)
    target_vals = _target_values(targets, layers, cfg)
    rows = []
    for n in range(len(targets) + 1):
        erasers = _erasers(target_vals, n)
        sub_vals = [vals[:n] for vals in target_vals]
        for prompt in prompts:
            rep = _execute(prompt, targets[:n], cfg, layers, sub_vals, erasers).report
            rows.append(ScenarioRow(rep.prompt, n, rep.cs_after, rep.fid, rep.mean_component_norm))
    return rows


def orthogonal_prompt(words: int = 3, start: int = 0) -> str:
    """A prompt built only from reserved words, orthogonal to every ordinary target."""
    return " ".join(f"ortho{start + i}" for i in range(words))


def with_shift(cfg: PipelineConfig, **changes) -> PipelineConfig:
    return replace(cfg, shift=replace(cfg.shift, **changes))
