import numpy as np
import pytest

from ldrbm.cli import EXIT_OK, EXIT_USAGE, main
from ldrbm.config import PRESETS, load_config
from ldrbm.errors import ConfigError
from ldrbm.mesh import read_vtk


def write(path, text):
    path.write_text(text)
    return path


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_load(name):
    cfg = load_config(preset=name)
    assert cfg.command in ("gen-geometry", "generate-fibers", "simulate", "fit-cv")
    assert f"[run]\ncommand = {cfg.command}" in cfg.to_text()


def test_merge_order(tmp_path):
    f = write(tmp_path / "a.ini", "[geometry]\nh = 0.2\n")
    cfg = load_config(f, "fibers-d", overrides={"fibers": {"method": "B"}})
    assert cfg.get_float("geometry", "h") == 0.2
    assert cfg.get("fibers", "method") == "B"
    assert cfg.get("geometry", "generator") == "biventricle"
    assert cfg.source == f"preset:fibers-d, {f}"


@pytest.mark.parametrize(
    "text, match",
    [
        ("[geometry]\ngenerator = slab\n", "command"),
        ("[run]\ncommand = bake\n", "unknown command"),
        ("[run]\ncommand = gen-geometry\n[geometry]\ngenerator = torus\n", "generator"),
        ("[run]\ncommand = gen-geometry\n[geometry]\nfile = /nonexistent.vtk\n", "does not exist"),
        ("[run]\ncommand = gen-geometry\n", "generator"),
        ("[run]\ncommand = fit-cv\n[fit]\ntargets = 60, 40\ndirections = f\n", "differ in length"),
        ("[run]\ncommand = compare\n[compare]\na = x\n", "does not exist"),
        ("[run\ncommand = x\n", "c.ini"),
    ],
)
def test_invalid_configs(tmp_path, text, match):
    with pytest.raises(ConfigError, match=match):
        load_config(write(tmp_path / "c.ini", text))


def test_typed_getters():
    cfg = load_config(preset="slab-benchmark", overrides={"numerics": {"dt": "fast", "flag": "maybe", "n": "1.5"}})
    assert cfg.get_floats("geometry", "lengths", 3) == (2.0, 0.7, 0.3)
    with pytest.raises(ConfigError, match="expected 2 numbers"):
        cfg.get_floats("geometry", "lengths", 2)
    with pytest.raises(ConfigError, match="expected numbers"):
        cfg.get_float("numerics", "dt")
    with pytest.raises(ConfigError, match="yes/no"):
        cfg.get_bool("numerics", "flag")
    with pytest.raises(ConfigError, match="integer"):
        cfg.get_int("numerics", "n")
    with pytest.raises(ConfigError, match="unknown preset"):
        load_config(preset="nope")
    with pytest.raises(ConfigError, match="no configuration"):
        load_config()


# command line


def test_usage_errors(tmp_path, capsys):
    assert main(["gen-geometry", "--preset", "nope"]) == EXIT_USAGE
    assert "unknown preset" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "missing.ini")]) == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["gen-geometry", "--preset", "ideal-la", "--threads", "0"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--preset", "ideal-la"])
    assert exc.value.code == EXIT_USAGE


def test_presets_command(capsys):
    assert main(["presets"]) == EXIT_OK
    out = capsys.readouterr().out
    assert all(name in out for name in PRESETS)


@pytest.fixture(scope="module")
def slab_runs(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    cfg = write(
        tmp / "slab.ini",
        "[geometry]\nlengths = 1.0, 0.1, 0.1\nh = 0.05\n[ionic]\nmodel = surrogate-ventricular\n"
        "[conductivity]\nsigma_f = 2.0\n[numerics]\nT_end = 60\nsnapshot_every = 10\n",
    )
    outs = [tmp / "a", tmp / "b"]
    codes = [main(["simulate", "--preset", "slab-cv-ttp", "--config", str(cfg), "--output", str(o), "--threads", "1"]) for o in outs]
    return tmp, outs, codes


def test_simulate_outputs(slab_runs):
    _, (a, _), codes = slab_runs
    assert codes == [EXIT_OK, EXIT_OK]
    names = {p.name for p in a.iterdir()}
    assert {"activation.vtk", "activation.csv", "log.csv", "cv.csv", "snapshots.vtk", "manifest.txt"} <= names
    mesh, arrays = read_vtk(a / "activation.vtk")
    assert np.all(arrays["activation"] >= 0)
    manifest = (a / "manifest.txt").read_text()
    assert "activation.csv = sha256:" in manifest and "[config]" in manifest


def test_runs_are_byte_identical(slab_runs):
    _, (a, b), _ = slab_runs
    for p in sorted(a.iterdir()):
        assert p.read_bytes() == (b / p.name).read_bytes(), p.name


def test_compare_identical_activation(slab_runs):
    tmp, (a, b), _ = slab_runs
    cfg = write(tmp / "cmp.ini", f"[run]\ncommand = compare\n[compare]\nkind = activation\na = {a / 'activation.vtk'}\nb = {b / 'activation.vtk'}\n")
    out = tmp / "cmp"
    assert main(["compare", "--config", str(cfg), "--output", str(out)]) == EXIT_OK
    row = (out / "activation_diff.csv").read_text().splitlines()[1].split(",")
    assert float(row[0]) == 0.0 and float(row[1]) == 0.0


def test_fibers_then_compare(tmp_path):
    over = write(tmp_path / "h.ini", "[geometry]\nh = 0.2\n")
    for m in "BD":
        assert main(["generate-fibers", "--preset", f"fibers-{m.lower()}", "--config", str(over), "--output", str(tmp_path / m)]) == EXIT_OK
    cfg = write(tmp_path / "cmp.ini", f"[run]\ncommand = compare\n[compare]\na = {tmp_path / 'B' / 'fibers.vtk'}\nb = {tmp_path / 'D' / 'fibers.vtk'}\n")
    assert main(["compare", "--config", str(cfg), "--output", str(tmp_path / "cmp")]) == EXIT_OK
    _, arr = read_vtk(tmp_path / "cmp" / "compare.vtk")
    assert np.all((arr["diff"] >= 0) & (arr["diff"] <= 1))
    assert arr["diff"].max() > 0.1
    # a field that is not there
    bad = write(tmp_path / "bad.ini", cfg.read_text() + "field = nope\n")
    assert main(["compare", "--config", str(bad), "--output", str(tmp_path / "x")]) == EXIT_USAGE


def test_inline_comments(tmp_path):
    f = write(tmp_path / "c.ini", "[run]\ncommand = gen-geometry ; build only\n[geometry]\ngenerator = slab  # box\n")
    cfg = load_config(f)
    assert cfg.command == "gen-geometry" and cfg.get("geometry", "generator") == "slab"
