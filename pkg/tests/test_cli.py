import csv
import io

import pytest

from orthoerase.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_DEPENDENT, EXIT_IO, main, read_config_file
from orthoerase.formats import read_avde

FAST = ["--seed", "0"]


@pytest.fixture
def small_config(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text("# tiny run\nlayers = 2\nsteps = 3\ntoken_length = 16\n")
    return str(p)


def tree_bytes(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_erase_writes_outputs(tmp_path, small_config, capsys):
    out = tmp_path / "run"
    assert main(["erase", "a photo of snoopy", "--target", "snoopy", "--out", str(out), "--config", small_config]) == 0
    assert capsys.readouterr().out.startswith("n=1 cs_drop=")
    rows = list(csv.reader(io.StringIO((out / "report.csv").read_text())))
    assert rows[0][:3] == ["prompt", "n_targets", "step"]
    assert len(rows) == 1 + 3 * 2 * 16
    assert sorted(p.name for p in (out / "components").iterdir())[0] == "step000_layer00.avde"
    assert read_avde(out / "components" / "step002_layer01.avde").shape == (16, 64)
    assert read_avde(out / "features_after.avde").shape == (16, 32)


def test_erase_is_byte_identical(tmp_path, small_config):
    for name in ("a", "b"):
        main(["erase", "snoopy", "--target", "snoopy", "--out", str(tmp_path / name), "--config", small_config])
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")


def test_erase_error_codes(tmp_path, small_config):
    base = ["--config", small_config]
    assert main(["erase", "snoopy", "--target", "snoopy", "--target", "snoopy", "--out", str(tmp_path / "x")] + base) == EXIT_DEPENDENT
    assert main(["erase", "snoopy", "--target", "snoopy", "--out", str(tmp_path / "no" / "x")] + base) == EXIT_IO
    assert main(["erase", "snoopy", "--out", str(tmp_path / "y")] + base) == EXIT_CONFIG
    assert main(["erase", "snoopy", "--noop", "--out", str(tmp_path / "y")] + base) == 0
    assert main(["erase", "snoopy", "--target", "snoopy", "--epsilon", "1.5", "--out", str(tmp_path / "z")] + base) == EXIT_CONFIG


def test_config_file_parsing(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("s = 1.5\n\n# note\nadaptive = false\nseed=4\n")
    assert read_config_file(p) == {"s": 1.5, "adaptive": False, "seed": 4}
    p.write_text("bogus = 1\n")
    with pytest.raises(Exception):
        read_config_file(p)


def test_unknown_config_key_exits_2(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("bogus = 1\n")
    assert main(["erase", "snoopy", "--target", "snoopy", "--out", str(tmp_path / "o"), "--config", str(p)]) == EXIT_CONFIG


def test_precedence_env_file_flag(tmp_path, monkeypatch, small_config):
    from orthoerase.cli import build_config, make_parser

    parse = make_parser().parse_args
    monkeypatch.setenv("ORTHOERASE_SEED", "7")
    assert build_config(parse(["erase", "x", "--out", "o"])).seed == 7
    cfg_file = tmp_path / "seed.cfg"
    cfg_file.write_text("seed = 9\ns = 1.5\n")
    cfg = build_config(parse(["erase", "x", "--out", "o", "--config", str(cfg_file)]))
    assert (cfg.seed, cfg.shift.s) == (9, 1.5)
    cfg = build_config(parse(["erase", "x", "--out", "o", "--config", str(cfg_file), "--seed", "3", "--s", "3"]))
    assert (cfg.seed, cfg.shift.s) == (3, 3.0)
    monkeypatch.setenv("ORTHOERASE_SEED", "nope")
    with pytest.raises(Exception):
        build_config(parse(["erase", "x", "--out", "o"]))


def test_env_seed_changes_output(tmp_path, small_config, monkeypatch):
    main(["erase", "snoopy", "--target", "snoopy", "--out", str(tmp_path / "a"), "--config", small_config])
    monkeypatch.setenv("ORTHOERASE_SEED", "5")
    main(["erase", "snoopy", "--target", "snoopy", "--out", str(tmp_path / "b"), "--config", small_config])
    assert (tmp_path / "a" / "features_after.avde").read_bytes() != (tmp_path / "b" / "features_after.avde").read_bytes()


def test_viz(tmp_path, small_config):
    out = tmp_path / "run"
    main(["erase", "snoopy", "--target", "snoopy", "--out", str(out), "--config", small_config])
    assert main(["viz", str(out), "--ppm"]) == 0
    pgm = (out / "viz" / "step000_layer00.pgm").read_bytes()
    assert pgm.startswith(b"P5\n16 64\n255\n") and len(pgm) == 13 + 16 * 64
    assert (out / "viz" / "features.ppm").read_bytes().startswith(b"P6\n")
    (out / "components" / "step000_layer00.avde").write_bytes(b"junk")
    assert main(["viz", str(out)]) == EXIT_CONFIG
    assert main(["viz", str(tmp_path / "missing")]) == EXIT_CONFIG


def test_check_passes_and_reports(capsys):
    assert main(["check", "--trials", "20"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 7
    assert all("status=pass" in line and "trials=20" in line for line in lines)


def test_check_fault_injection(monkeypatch, capsys):
    monkeypatch.setenv("ORTHOERASE_INJECT_FAULT", "1")
    assert main(["check", "--trials", "5", "--seed", "3"]) == EXIT_CHECK
    out = capsys.readouterr().out
    assert "check=oracle_equivalence status=FAIL" in out
    assert "seed=3 trial=0" in out


def test_check_zero_trials(capsys):
    assert main(["check", "--trials", "0"]) == 0
    assert "warning" in capsys.readouterr().err


def test_sweep(tmp_path, small_config):
    out = tmp_path / "sweep.csv"
    rc = main(["sweep", "--s-values", "1,2", "--eps-values", "0.93,0.6", "--out", str(out), "--config", small_config])
    assert rc == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert [(r["s"], r["epsilon"]) for r in rows] == [
        ("1", "0.93000000000000005"), ("1", "0.59999999999999998"),
        ("2", "0.93000000000000005"), ("2", "0.59999999999999998"),
    ]
    assert main(["sweep", "--out", str(tmp_path / "no" / "x.csv"), "--config", small_config]) == EXIT_IO
    assert main(["sweep", "--eps-values", "1.2", "--config", small_config]) == EXIT_CONFIG


def test_sweep_rejects_zero_scale():
    with pytest.raises(SystemExit) as info:
        main(["sweep", "--s-values", "0"])
    assert info.value.code == 2
