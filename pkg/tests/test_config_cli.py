import csv
import json
import textwrap

import numpy as np
import pytest

from sympdrb import cli
from sympdrb.bench import ScalingConfig, loglog_slope, run_scaling, ScalingRow
from sympdrb.config import ExperimentConfig, apply_preset, load_config, parse_config
from sympdrb.errors import ConfigError

OSC = textwrap.dedent("""\
    [model]
    name = oscillator
    m = 8

    [parameters]
    ranges = 0:1, 0:1
    samples = 2, 3

    [reduction]
    sizes = 4, 6
    methods = tangent, rkmk-cay
    global = yes
    global_stride = 5

    [time]
    dt = 0.01
    T = 0.2
    save_stride = 5

    [output]
    seed = 3
    """)


def write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_defaults():
    cfg = parse_config(OSC)
    assert cfg.model.name == "oscillator" and cfg.full_dim == 16
    assert cfg.grid.ranges == ((0.0, 1.0), (0.0, 1.0))
    assert cfg.reduction.sizes == (4, 6)
    assert cfg.reduction.run_global is True
    assert cfg.seed == 3
    assert ExperimentConfig().full_dim == 512


@pytest.mark.parametrize("edit,where", [
    (("sizes = 4, 6", "sizes = 5"), "[reduction] sizes"),
    (("sizes = 4, 6", "sizes = 40"), "[reduction] sizes"),
    (("sizes = 4, 6", "sizes = 14"), "needs at least k=7"),
    (("dt = 0.01", "dt = -1"), "[time] dt"),
    (("T = 0.2", "T = 0.205"), "not a multiple"),
    (("methods = tangent, rkmk-cay", "methods = newton"), "unknown method"),
    (("name = oscillator", "name = kdv"), "unknown model"),
    (("seed = 3", "seed = x"), "[output] seed"),
    (("m = 8", "m = 8\ncolour = red"), "unknown key"),
    (("[time]", "[clock]"), "unknown section"),
    (("dt = 0.01", "dt = fast"), "cannot parse"),
])
def test_config_errors_carry_location(edit, where):
    text = OSC.replace(*edit)
    with pytest.raises(ConfigError) as err:
        parse_config(text, "exp.ini")
    assert where in str(err.value)
    assert str(err.value).startswith("exp.ini")


def test_config_error_line_number():
    with pytest.raises(ConfigError, match=r"exp.ini:16: \[time\] dt"):
        parse_config(OSC.replace("dt = 0.01", "dt = 0"), "exp.ini")


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "none.ini")


def test_presets():
    cfg = parse_config("[model]\nname = swe\n")
    desk = apply_preset(cfg, "desk")
    assert desk.model.grid_points == 256 and desk.grid.samples == (2, 8)
    full = apply_preset(cfg, "full")
    assert full.model.grid_points == 1000 and full.time.T == 7.0
    with pytest.raises(ConfigError):
        apply_preset(parse_config(OSC), "desk")


def test_shipped_configs_validate():
    for name in ("desk_swe.ini", "oscillator.ini", "scaling.ini"):
        load_config(f"configs/{name}")


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_cli_run_smoke(tmp_path, capsys):
    cfg = write(tmp_path, OSC)
    out = tmp_path / "out"
    assert cli.main(["run", str(cfg), "--out", str(out), "--threads", "1"]) == 0
    errors = read_csv(out / "errors.csv")
    assert list(errors[0]) == ["method", "2k", "runtime_seconds", "frobenius_error_at_T",
                               "frobenius_error_dx_weighted"]
    pairs = [(r["method"], r["2k"]) for r in errors]
    assert pairs == [("full", "16"), ("tangent", "4"), ("rkmk-cay", "4"), ("global", "4"),
                     ("tangent", "6"), ("rkmk-cay", "6"), ("global", "6")]
    drift = read_csv(out / "hamiltonian_drift.csv")
    assert {"sum_abs_drift", "abs_sum_drift"} <= set(drift[0])
    steps = read_csv(out / "steps.csv")
    assert len(steps) == 4 * 20
    meta = json.loads((out / "meta.json").read_text())
    assert meta["gate_passed"] and meta["seed"] == 3
    assert meta["max_manifold_defect"] <= 1e-10
    assert "frobenius_error" in meta["conventions"]
    assert not list(out.glob("*.tmp"))


def test_cli_run_deterministic(tmp_path):
    cfg = write(tmp_path, OSC)
    for d in ("a", "b"):
        assert cli.main(["run", str(cfg), "--out", str(tmp_path / d)]) == 0
    for name in ("hamiltonian_drift.csv", "steps.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ea, eb = read_csv(tmp_path / "a" / "errors.csv"), read_csv(tmp_path / "b" / "errors.csv")
    for ra, rb in zip(ea, eb):
        ra.pop("runtime_seconds"), rb.pop("runtime_seconds")
        assert ra == rb


def test_cli_seed_changes_gauge(tmp_path):
    cfg = write(tmp_path, OSC.replace("global = yes", "global = no\ngauge = random:0.5")
                .replace("methods = tangent, rkmk-cay", "methods = tangent"))
    for d, seed in (("a", "1"), ("b", "2")):
        assert cli.main(["run", str(cfg), "--out", str(tmp_path / d), "--seed", seed]) == 0
    a = read_csv(tmp_path / "a" / "errors.csv")[1]["frobenius_error_at_T"]
    b = read_csv(tmp_path / "b" / "errors.csv")[1]["frobenius_error_at_T"]
    assert a != b


def test_cli_config_error_exit(tmp_path, capsys):
    cfg = write(tmp_path, OSC.replace("dt = 0.01", "dt = 0"))
    assert cli.main(["validate", str(cfg)]) == 2
    assert "[time] dt" in capsys.readouterr().err
    assert cli.main(["validate", str(write(tmp_path, OSC, "ok.ini"))]) == 0


def test_cli_numeric_abort_exit(tmp_path, capsys):
    text = OSC.replace("m = 8", "m = 8\nfrequencies = " + ", ".join(["1e4"] * 8)).replace("dt = 0.01", "dt = 0.1").replace("T = 0.2", "T = 1.0")
    assert cli.main(["run", str(write(tmp_path, text)), "--out", str(tmp_path / "o")]) == 3
    assert "numerical abort at step 1" in capsys.readouterr().err


def test_cli_oracle(capsys):
    assert cli.main(["oracle", "cayley", "--trials", "20"]) == 0
    out = capsys.readouterr().out
    assert "cayley" in out and "PASS" in out


def test_cli_bench_scaling(tmp_path, capsys):
    cfg = write(tmp_path, "[model]\nname = swe\n[scaling]\nm_values = 64, 128\nk = 2\nsamples = 2, 2\n"
                          "steps = 3\nwarmup = 1\ntableau = heun\n")
    assert cli.main(["bench-scaling", str(cfg), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "scaling.csv")
    assert [(r["m"], r["method"]) for r in rows] == [
        ("64", "rkmk-cay"), ("64", "tangent"), ("128", "rkmk-cay"), ("128", "tangent")]
    assert "log-log slope" in capsys.readouterr().out


def test_single_m_bench():
    rows = run_scaling(ScalingConfig(m_values=(64,), k=2, samples=(2, 2), steps=2, warmup=0))
    assert [r.method for r in rows] == ["rkmk-cay", "tangent"]
    assert all(r.median_ns > 0 and r.steps == 2 for r in rows)


def test_loglog_slope():
    rows = [ScalingRow(m, "x", 5.0 * m, 0.0, 1) for m in (2, 4, 8)]
    assert loglog_slope(rows, "x") == pytest.approx(1.0)
    assert np.isnan(loglog_slope(rows[:1], "x"))
