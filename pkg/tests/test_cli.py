"""Command-line interface: flags, exit codes, output formats."""

import json
import shutil
import subprocess
import sys

import pytest

from conftest import LITMUS_DIR, MODEL_DIR, litmus_path
from litmusforge.cli import main, resolve_model

SB = str(litmus_path("SB"))
MP = str(litmus_path("MP"))
PETERSON = str(litmus_path("peterson"))


def test_happy_path(capsys):
    assert main(["-model", "sc", SB]) == 0
    out, err = capsys.readouterr()
    assert err == ""
    assert out.startswith("Test SB\nModel SC\n")
    assert "No\n" in out


def test_multiple_tests_blank_line_separated(capsys):
    assert main(["-model", "tso", SB, MP]) == 0
    out, _ = capsys.readouterr()
    blocks = out.split("\n\n")
    assert len(blocks) == 2
    assert blocks[0].startswith("Test SB")
    assert blocks[1].startswith("Test MP")


def test_missing_model_flag_exits_1(capsys):
    with pytest.raises(SystemExit) as err:
        main([SB])
    assert err.value.code == 1
    _, stderr = capsys.readouterr()
    assert "usage:" in stderr and "error:" in stderr


def test_unknown_flag_exits_1(capsys):
    with pytest.raises(SystemExit) as err:
        main(["-model", "sc", "-frobnicate", SB])
    assert err.value.code == 1


def test_unknown_model(capsys):
    assert main(["-model", "nosuchmodel", SB]) == 1
    _, stderr = capsys.readouterr()
    assert "model not found: nosuchmodel" in stderr


def test_litmus_parse_error_names_position(tmp_path, capsys):
    bad = tmp_path / "bad.litmus"
    bad.write_text("LISA bad\n{ x = 0; }\n P0: ;\n q[] x 1 ;\nexists (x=0)\n")
    assert main(["-model", "sc", str(bad)]) == 1
    _, stderr = capsys.readouterr()
    assert f"{bad}:4:" in stderr


def test_missing_litmus_file(tmp_path, capsys):
    assert main(["-model", "sc", str(tmp_path / "absent.litmus")]) == 1
    _, stderr = capsys.readouterr()
    assert "litmusforge:" in stderr


def test_bad_model_file(tmp_path, capsys):
    bad = tmp_path / "bad.cat"
    bad.write_text("Bad\nacyclic nosuchrel\n")
    assert main(["-model", str(bad), SB]) == 1
    _, stderr = capsys.readouterr()
    assert "unknown name" in stderr


def test_unroll_must_be_positive(capsys):
    assert main(["-model", "sc", "-unroll", "0", SB]) == 1
    _, stderr = capsys.readouterr()
    assert "-unroll must be at least 1" in stderr
    assert main(["-model", "sc", "-ceiling", "0", SB]) == 1
    _, stderr = capsys.readouterr()
    assert "-ceiling must be at least 1" in stderr


def test_ceiling_exit_2_without_partial(capsys):
    assert main(["-model", "sc", "-ceiling", "2", PETERSON]) == 2
    _, stderr = capsys.readouterr()
    assert "unroll budget exceeded" in stderr


def test_ceiling_with_partial_truncates(capsys):
    assert main(["-model", "sc", "-ceiling", "2", "-partial", PETERSON]) == 0
    out, _ = capsys.readouterr()
    assert "Warning: path ceiling reached" in out


def test_bounded_warning_at_low_unroll(capsys):
    # spin loops discard their over-bound prefixes but still verdict
    assert main(["-model", "sc", "-unroll", "1", PETERSON]) == 0
    out, _ = capsys.readouterr()
    assert "Test peterson" in out
    assert "path prefixes were discarded at the unroll bound" in out


def test_json_output(capsys):
    assert main(["-model", "sc", "-json", SB, MP]) == 0
    out, _ = capsys.readouterr()
    docs = json.loads(out)
    assert [d["test"] for d in docs] == ["SB", "MP"]
    assert all(d["model"] == "SC" for d in docs)
    assert docs[0]["result"] == "No" and docs[0]["states"]


def test_dot_output(tmp_path, capsys):
    outdir = tmp_path / "dots"
    assert main(["-model", "tso", "-dot", str(outdir), SB]) == 0
    files = sorted(p.name for p in outdir.iterdir())
    assert files == ["SB-w1.dot"]
    dot = (outdir / "SB-w1.dot").read_text()
    assert dot.startswith('digraph "SB witness 1"')
    capsys.readouterr()


def test_dot_caps_witness_count(tmp_path, capsys):
    outdir = tmp_path / "dots"
    assert main(["-model", "anarchic", "-dot", str(outdir), PETERSON]) == 0
    assert len(list(outdir.iterdir())) == 16
    capsys.readouterr()


def test_output_is_deterministic(capsys):
    paths = sorted(str(p) for p in LITMUS_DIR.glob("*.litmus"))
    assert main(["-model", "tso", *paths]) == 0
    first, _ = capsys.readouterr()
    assert main(["-model", "tso", *paths]) == 0
    second, _ = capsys.readouterr()
    assert first == second and first


def test_model_resolution(tmp_path, monkeypatch):
    # literal path, packaged stem, packaged filename, then env override
    assert resolve_model(str(MODEL_DIR / "sc.cat")) == MODEL_DIR / "sc.cat"
    assert resolve_model("sc") == MODEL_DIR / "sc.cat"
    assert resolve_model("sc.cat") == MODEL_DIR / "sc.cat"
    assert resolve_model("nosuchmodel") is None
    custom = tmp_path / "mine.cat"
    shutil.copyfile(MODEL_DIR / "sc.cat", custom)
    monkeypatch.setenv("LITMUSFORGE_MODELDIR", str(tmp_path))
    assert resolve_model("mine") == custom
    # the environment directory wins over the packaged one
    shadow = tmp_path / "sc.cat"
    shadow.write_text("Shadow\n")
    assert resolve_model("sc") == shadow


def test_env_modeldir_end_to_end(tmp_path, monkeypatch, capsys):
    (tmp_path / "strict.cat").write_text("Strict\nempty rf as no-reads\n")
    monkeypatch.setenv("LITMUSFORGE_MODELDIR", str(tmp_path))
    assert main(["-model", "strict", SB]) == 0
    out, _ = capsys.readouterr()
    assert "Model Strict" in out


def test_module_and_script_entry_points():
    cmd = ["-model", "sc", SB]
    via_module = subprocess.run(
        [sys.executable, "-m", "litmusforge", *cmd],
        capture_output=True, text=True,
    )
    assert via_module.returncode == 0
    script = shutil.which("litmusforge")
    assert script, "console script not installed"
    via_script = subprocess.run(
        [script, *cmd], capture_output=True, text=True
    )
    assert via_script.returncode == 0
    assert via_script.stdout == via_module.stdout
