"""Acceptance criteria 1-9.

Each test records a one-line verdict; ``conftest.pytest_terminal_summary``
prints them after the run. Run alone with
``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from orthoerase.checks import PROPERTIES
from orthoerase.cli import main
from orthoerase.eraser import ShiftConfig, shift_from_cosine
from orthoerase.errors import LinearlyDependentConceptsError
from orthoerase.formats import avde_bytes, component_heatmap, parse_avde, pgm_bytes
from orthoerase.pipeline import (
    PipelineConfig,
    blend_toward,
    build_stack,
    encode_target,
    orthogonal_prompt,
    run,
    scenario_multi,
    with_shift,
)
from orthoerase.tokens import encode_causal, tokenize

VERDICTS: dict[int, str] = {}

CONCEPTS = [
    "Snoopy", "Mickey", "Crystal", "Pikachu", "Legislator", "Bruce Lee", "Marilyn Monroe",
    "Tom Cruise", "Anne Hathaway", "Melania Trump", "Van Gogh", "Picasso", "Rembrandt",
    "Andy Warhol", "Caravaggio", "Samoyed", "Doraemon", "Tom", "Adam Driver", "Adriana Lima",
    "Amber Heard", "Amy Adams", "Andrew Garfield", "Angelina Jolie", "Anjelica Huston",
    "Bradley Cooper", "Bruce Willis", "Bryan Cranston", "Cameron Diaz", "Channing Tatum",
    "Charlie Sheen", "Charlize Theron", "Chris Evans", "Chris Hemsworth", "Chris Pine",
    "Barack Obama", "Beth Behrs", "Bill Clinton", "Bob Dylan", "Bob Marley",
]

# Interpretability analog thresholds. The ratio floor is the acceptance
# bound; the orthogonal-prompt ceiling comes from the block construction
# (reserved-word values share no coordinates with any target value, so the
# construction oracle below evaluates to exactly 0.0 for every seed).
RATIO_FLOOR = 10.0
ORTHO_FID_CEIL = 1e-6
# seed-0 target-prompt mean component norm, from the naive loop oracle below
ORACLE_SEED0_NORM = 3.1532461894442584e-05


def record(number: int, ok: bool, detail: str) -> None:
    VERDICTS[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"


def sweep_property(name: str, trials: int, seed: int = 0) -> float:
    prop = PROPERTIES[name]
    worst = 0.0
    for trial in range(trials):
        err, _ = prop(np.random.default_rng([seed, trial]), False)
        worst = max(worst, err)
    return worst


def test_criterion_1_oracle_equivalence():
    start = time.perf_counter()
    worst = sweep_property("oracle_equivalence", 1000)
    elapsed = time.perf_counter() - start
    ok = worst < 1e-8 and elapsed < 5.0
    record(1, ok, f"max|basis - inverse| = {worst:.2e} over 1000 cases in {elapsed:.2f} s")
    assert worst < 1e-8
    assert elapsed < 5.0


def test_criterion_2_orthogonality_and_idempotence():
    cos = sweep_property("orthogonality", 500)
    idem = sweep_property("idempotence", 500)
    record(2, cos < 1e-10 and idem < 1e-10, f"max|cos| = {cos:.2e}, max idempotence gap = {idem:.2e}")
    assert cos < 1e-10
    assert idem < 1e-10


def test_criterion_3_reduction_ladder():
    single = sweep_property("single_concept_reduction", 500)
    unit = sweep_property("unit_shift_reduction", 500)
    record(3, single < 1e-10 and unit < 1e-10, f"n=1 gap = {single:.2e}, unit-shift gap = {unit:.2e}")
    assert single < 1e-10
    assert unit < 1e-10


def test_criterion_4_shift_anchors():
    cfg = ShiftConfig()
    assert (cfg.s, cfg.p, cfg.epsilon) == (2.0, 100.0, 0.93)
    at_eps = shift_from_cosine(0.93, cfg)
    at_one = shift_from_cosine(1.0, cfg)
    at_065 = shift_from_cosine(0.65, cfg)
    ok = abs(at_eps - 1.0) <= 1e-12 and 1.998 < at_one < 2.0 and at_065 < 1e-11
    record(4, ok, f"delta(eps) = {at_eps!r}, delta(1) = {at_one:.12f}, delta(0.65) = {at_065:.3e}")
    assert abs(at_eps - 1.0) <= 1e-12
    assert 1.998 < at_one < 2.0
    assert at_065 < 1e-11


def test_criterion_5_sot_contract():
    cfg = PipelineConfig()
    worst_rows = max(len(np.unique(encode_target(c, cfg).rows, axis=0)) for c in CONCEPTS)
    sot = sweep_property("sot_preservation", 500)
    # the pipeline raises InvariantViolation if any layer alters row 0
    for prompt in ("a photo of Snoopy", "Mickey and Pikachu", orthogonal_prompt()):
        rep = run(prompt, ["Snoopy", "Mickey", "Pikachu"], cfg).report
        assert np.all(rep.components[:, :, 0] == 0)
    ok = worst_rows <= 2 and sot == 0.0
    record(5, ok, f"max distinct target rows = {worst_rows}, max SOT change = {sot}")
    assert worst_rows <= 2
    assert sot == 0.0


def component_oracle(prompt: str, concept: str, seed: int) -> float:
    """Mean erased-component norm from a per-row loop over raw embeddings.

    Components do not depend on latents, so each step repeats the same
    (layer, token) grid and the mean over steps equals the mean over one step.
    """
    cfg = PipelineConfig(seed=seed)
    E = encode_causal(tokenize(prompt), seed).rows
    raw = encode_causal(tokenize(concept), seed, provenance="target-raw")
    subject = raw.rows[raw.tokens.content_len]
    norms = []
    for layer in build_stack(cfg):
        W = layer.value.matrix
        t = subject @ W
        norms.append(0.0)
        for j in range(1, E.shape[0]):
            v = E[j] @ W
            nv = np.linalg.norm(v)
            c = float(t @ v) / (np.linalg.norm(t) * nv) if nv > 1e-12 else 0.0
            delta = 2.0 / (1.0 + math.exp(-100.0 * (c - 0.93)))
            norms.append(float(np.linalg.norm(delta * (t @ v) / (t @ t) * t)))
    return float(np.mean(norms))


def test_component_oracle_matches_pipeline():
    prompt = "a photo of Snoopy"
    got = run(prompt, ["Snoopy"], PipelineConfig(seed=0)).report.mean_component_norm
    assert component_oracle(prompt, "Snoopy", 0) == pytest.approx(ORACLE_SEED0_NORM, rel=1e-12)
    assert got == pytest.approx(ORACLE_SEED0_NORM, rel=1e-9)
    assert component_oracle(orthogonal_prompt(), "Snoopy", 0) == 0.0


def test_criterion_6_interpretability_analog():
    worst_ratio, worst_fid = math.inf, 0.0
    for seed in range(20):
        cfg = PipelineConfig(seed=seed)
        concept = CONCEPTS[seed]
        target = run(f"a photo of {concept}", [concept], cfg).report
        ortho = run(orthogonal_prompt(3, start=seed), [concept], cfg).report
        assert target.mean_component_norm > 0
        ratio = math.inf if ortho.mean_component_norm == 0 else target.mean_component_norm / ortho.mean_component_norm
        worst_ratio = min(worst_ratio, ratio)
        worst_fid = max(worst_fid, ortho.fid)
    ok = worst_ratio >= RATIO_FLOOR and worst_fid < ORTHO_FID_CEIL
    record(6, ok, f"min target/orthogonal norm ratio = {worst_ratio}, max orthogonal fid = {worst_fid:.2e}")
    assert worst_ratio >= RATIO_FLOOR
    assert worst_fid < ORTHO_FID_CEIL


def test_criterion_7_sweep_structure():
    cfg = PipelineConfig()
    related = blend_toward("Mickey", "Snoopy", 0.85, cfg)
    eps_grid = (0.93, 0.8, 0.7, 0.6)
    fids = [run(related, ["Snoopy"], with_shift(cfg, epsilon=e)).report.fid for e in eps_grid]
    drops = [run("Snoopy", ["Snoopy"], with_shift(cfg, s=s)).report.cs_drop for s in (1.0, 2.0)]
    fid_ok = all(b >= a for a, b in zip(fids, fids[1:]))
    drop_ok = drops[1] >= drops[0]
    record(7, fid_ok and drop_ok,
           "fid over eps " + ", ".join(f"{f:.3e}" for f in fids) + f"; cs_drop s=1 {drops[0]:.3e}, s=2 {drops[1]:.3f}")
    assert fid_ok
    assert drop_ok


def test_criterion_8_multi_concept_scaling():
    prompts = ["a photo of Snoopy", orthogonal_prompt()]
    start = time.perf_counter()
    rows = scenario_multi(prompts, CONCEPTS)
    elapsed = time.perf_counter() - start
    again = scenario_multi(prompts, CONCEPTS)
    deterministic = rows == again
    ratios_ok = fid_ok = True
    for n in range(1, len(CONCEPTS) + 1):
        tgt, ortho = rows[2 * n], rows[2 * n + 1]
        assert (tgt.n_targets, ortho.n_targets) == (n, n)
        if ortho.mean_component_norm == 0:
            ratios_ok &= tgt.mean_component_norm > 0
        else:
            ratios_ok &= tgt.mean_component_norm / ortho.mean_component_norm >= RATIO_FLOOR
        fid_ok &= ortho.fid_analog < ORTHO_FID_CEIL
    with pytest.raises(LinearlyDependentConceptsError):
        scenario_multi(prompts[:1], CONCEPTS[:5] + ["Snoopy"])
    ok = elapsed < 30.0 and deterministic and ratios_ok and fid_ok
    record(8, ok, f"40 concepts in {elapsed:.2f} s, deterministic={deterministic}, bounds at every n={ratios_ok and fid_ok}, duplicate raises")
    assert elapsed < 30.0
    assert deterministic
    assert ratios_ok and fid_ok


def test_criterion_9_io_bit_exactness(tmp_path):
    rng = np.random.default_rng(9)
    m = rng.standard_normal((77, 64))
    m[0, 0], m[0, 1] = -0.0, 5e-324
    round_trip = parse_avde(avde_bytes(m)).tobytes() == m.tobytes()

    comp = np.zeros((77, 64))
    comp[3] = 2.0
    pgm = pgm_bytes(component_heatmap(comp))
    golden = b"P5\n77 64\n255\n" + (bytes([0] * 3 + [255] + [0] * 73) * 64)
    pgm_ok = pgm == golden

    def tree(root):
        return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}

    args = ["erase", "a photo of Snoopy", "--target", "Snoopy", "--target", "Mickey"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    repeat_ok = tree(tmp_path / "a") == tree(tmp_path / "b")
    record(9, round_trip and pgm_ok and repeat_ok,
           f"AVDE round trip={round_trip}, PGM golden={pgm_ok}, repeated erase identical={repeat_ok}")
    assert round_trip
    assert pgm_ok
    assert repeat_ok


if __name__ == "__main__":
    import sys

    raise SystemExit(pytest.main([__file__, "-q", *sys.argv[1:]]))
