"""``orthoerase`` command line: erase, viz, check, sweep.

Exit codes: 0 ok, 1 I/O failure, 2 configuration or input error,
3 linearly dependent target concepts, 4 invariant check failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from dataclasses import replace
from pathlib import Path

from . import formats
from .checks import run_checks
from .eraser import ShiftConfig
from .errors import FormatError, LinearlyDependentConceptsError, OrthoEraseError
from .pipeline import PipelineConfig, blend_toward, run

log = logging.getLogger("orthoerase")

EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_DEPENDENT = 3
EXIT_CHECK = 4

SEED_ENV = "ORTHOERASE_SEED"
FAULT_ENV = "ORTHOERASE_INJECT_FAULT"

_INT_KEYS = {
    "token_length": "length",
    "d": "d",
    "d_c": "d_c",
    "d_z": "d_z",
    "hw": "hw",
    "layers": "layers",
    "steps": "steps",
    "seed": "seed",
}
_FLOAT_KEYS = {"s", "p", "epsilon"}
CONFIG_KEYS = set(_INT_KEYS) | _FLOAT_KEYS | {"adaptive"}


class ConfigError(Exception):
    pass


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in {"1", "true", "yes", "on"}:
        return True
    if t in {"0", "false", "no", "off"}:
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def read_config_file(path: str | os.PathLike) -> dict[str, object]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"([A-Za-z_]+)\s*=\s*(.+)", line)
        if not m:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, val = m.group(1).lower(), m.group(2).strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            if key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            else:
                values[key] = _parse_bool(val)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {val!r}") from exc
    return values


def _positive_float(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not x > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return x


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}") from None


def _positive_list(text: str) -> list[float]:
    vals = _float_list(text)
    if any(not v > 0 for v in vals):
        raise argparse.ArgumentTypeError(f"all values must be > 0: {text!r}")
    return vals


def build_config(args: argparse.Namespace) -> PipelineConfig:
    """defaults < $ORTHOERASE_SEED < --config file < flags."""
    merged: dict[str, object] = {}
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        try:
            merged["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env_seed!r}") from None
    if getattr(args, "config", None):
        merged.update(read_config_file(args.config))
    for key in ("s", "p", "epsilon", "seed", "adaptive"):
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val

    shift = ShiftConfig()
    try:
        shift = replace(shift, **{k: merged[k] for k in _FLOAT_KEYS if k in merged})
        fields = {_INT_KEYS[k]: merged[k] for k in _INT_KEYS if k in merged}
        return PipelineConfig(shift=shift, adaptive=bool(merged.get("adaptive", True)),
                              divergent=bool(getattr(args, "divergent", False)), **fields)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--adaptive", action=argparse.BooleanOptionalAction, default=None,
                   help="sigmoid-shifted erasure (default) or plain projection")
    p.add_argument("--s", type=_positive_float, help="shift scale")
    p.add_argument("--p", type=_positive_float, help="shift steepness")
    p.add_argument("--epsilon", type=float, help="cosine threshold in (0, 1)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orthoerase", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("erase", help="run one erasure and write CSV + component dumps")
    p.add_argument("prompt")
    p.add_argument("--target", action="append", default=[], help="concept to erase (repeatable)")
    p.add_argument("--out", required=True, help="output directory (parent must exist)")
    p.add_argument("--noop", action="store_true", help="allow running without targets")
    p.add_argument("--divergent", action="store_true",
                   help="erased pass follows its own latent trajectory")
    _add_common(p)

    p = sub.add_parser("viz", help="render component dumps as PGM heatmaps")
    p.add_argument("report_dir")
    p.add_argument("--ppm", action="store_true", help="also write before/after feature PPM")

    p = sub.add_parser("check", help="randomised invariant suite")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("sweep", help="grid over s, p, epsilon on a target/related pair")
    p.add_argument("--target", default="snoopy")
    p.add_argument("--related", default="mickey", help="non-target prompt")
    p.add_argument("--similarity", type=float, default=0.85,
                   help="cosine the related prompt is rotated to (see --no-blend)")
    p.add_argument("--no-blend", action="store_true", help="use the related prompt as-is")
    p.add_argument("--s-values", type=_positive_list, default=[2.0])
    p.add_argument("--p-values", type=_positive_list, default=[100.0])
    p.add_argument("--eps-values", type=_float_list, default=[0.93])
    p.add_argument("--out", help="CSV path (default: stdout)")
    _add_common(p)
    return parser


def cmd_erase(args) -> int:
    cfg = build_config(args)
    if not args.target and not args.noop:
        raise ConfigError("at least one --target is required (or pass --noop)")
    out = Path(args.out)
    if not out.parent.exists():
        print(f"error: parent directory of {out} does not exist", file=sys.stderr)
        return EXIT_IO
    result = run(args.prompt, args.target, cfg)
    rep = result.report
    out.mkdir(exist_ok=True)
    comp_dir = out / "components"
    comp_dir.mkdir(exist_ok=True)
    formats.write_report_csv(out / "report.csv", rep)
    S, L = rep.components.shape[:2]
    for s in range(S):
        for layer in range(L):
            formats.write_avde(comp_dir / f"step{s:03d}_layer{layer:02d}.avde", rep.components[s, layer])
    formats.write_avde(out / "features_before.avde", result.features_before)
    formats.write_avde(out / "features_after.avde", result.features_after)
    print(f"n={rep.n_targets} cs_drop={formats.fmt_float(rep.cs_drop)} fid={formats.fmt_float(rep.fid)}")
    log.info("wall-clock %.3f s", rep.elapsed)
    return 0


def cmd_viz(args) -> int:
    root = Path(args.report_dir)
    comp_dir = root / "components"
    if not comp_dir.is_dir():
        print(f"error: {comp_dir} is not a component dump directory", file=sys.stderr)
        return EXIT_CONFIG
    dumps = sorted(comp_dir.glob("*.avde"))
    if not dumps:
        print(f"error: no .avde dumps in {comp_dir}", file=sys.stderr)
        return EXIT_CONFIG
    viz = root / "viz"
    viz.mkdir(exist_ok=True)
    try:
        for dump in dumps:
            comp = formats.read_avde(dump)
            formats.atomic_write(viz / (dump.stem + ".pgm"), formats.pgm_bytes(formats.component_heatmap(comp)))
        if args.ppm:
            before = formats.read_avde(root / "features_before.avde")
            after = formats.read_avde(root / "features_after.avde")
            if before.shape != after.shape:
                raise FormatError("before/after feature dumps differ in shape")
            formats.atomic_write(viz / "features.ppm", formats.ppm_bytes(formats.side_by_side(before, after)))
    except FormatError as exc:
        print(f"error: malformed dump: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"images={len(dumps) + int(args.ppm)} dir={viz}")
    return 0


def cmd_check(args) -> int:
    if args.trials < 0:
        raise ConfigError("--trials must be >= 0")
    if args.trials == 0:
        print("warning: --trials 0 runs nothing; passing vacuously", file=sys.stderr)
    fault = os.environ.get(FAULT_ENV, "") not in {"", "0"}
    failed = False
    for res in run_checks(args.trials, args.seed, inject_fault=fault):
        status = "pass" if res.passed else "FAIL"
        line = f"check={res.name} status={status} trials={res.trials} worst={res.worst:.3e}"
        if not res.passed:
            failed = True
            line += f" seed={args.seed} trial={res.failing_trial}"
        print(line)
    return EXIT_CHECK if failed else 0


def sweep_rows(target: str, related, grid, base: PipelineConfig):
    for s in grid["s"]:
        for p in grid["p"]:
            for eps in grid["epsilon"]:
                cfg = replace(base, shift=replace(base.shift, s=s, p=p, epsilon=eps))
                cs_drop = run(target, [target], cfg).report.cs_drop
                fid = run(related, [target], cfg).report.fid
                yield (formats.fmt_float(s), formats.fmt_float(p), formats.fmt_float(eps),
                       formats.fmt_float(cs_drop), formats.fmt_float(fid))


def cmd_sweep(args) -> int:
    base = build_config(args)
    grid = {"s": args.s_values, "p": args.p_values, "epsilon": args.eps_values}
    if not all(grid.values()):
        raise ConfigError("sweep grid is empty")
    for eps in grid["epsilon"]:
        if not 0 < eps < 1:
            raise ConfigError(f"epsilon must lie in (0, 1), got {eps}")
    related = args.related if args.no_blend else blend_toward(args.related, args.target, args.similarity, base)
    data = formats.csv_bytes(("s", "p", "epsilon", "cs_drop_target", "fid_nontarget"),
                             sweep_rows(args.target, related, grid, base))
    if args.out:
        out = Path(args.out)
        if not out.parent.exists():
            print(f"error: parent directory of {out} does not exist", file=sys.stderr)
            return EXIT_IO
        formats.atomic_write(out, data)
    else:
        sys.stdout.write(data.decode())
    return 0


COMMANDS = {"erase": cmd_erase, "viz": cmd_viz, "check": cmd_check, "sweep": cmd_sweep}


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LinearlyDependentConceptsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEPENDENT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OrthoEraseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
