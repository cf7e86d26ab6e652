import hashlib
import json

import numpy as np
import pytest

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from nvbath import cli, dynamics, model


def run(args, outdir):
    return cli.main(list(args) + ["--output-dir", str(outdir)])


def read_manifest(outdir):
    return json.loads((outdir / "manifest.json").read_text())


def test_coherence_scan_outputs(tmp_path):
    out = tmp_path / "scan"
    rc = run(
        ["coherence-scan", "--n", "16", "--tau-min", "0.4", "--tau-max", "0.5",
         "--tau-step", "0.01"],
        out,
    )
    assert rc == 0
    assert (out / "coherence_scan.csv").exists()
    manifest = read_manifest(out)
    assert manifest["command"] == "coherence-scan"
    assert manifest["parameters"]["n"] == 16
    assert manifest["seed"] == 0
    assert manifest["kernel_backend"] in ("cython", "python")
    # output hash matches the file content
    digest = hashlib.sha256((out / "coherence_scan.csv").read_bytes()).hexdigest()
    assert manifest["outputs"]["coherence_scan.csv"] == digest
    # no timestamps anywhere
    assert "time" not in json.dumps(manifest).lower()


def test_rerun_is_bitwise_identical(tmp_path):
    args = ["entanglement-trace", "--tau", "0.47", "--n-max", "16"]
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run(args, out1) == 0
    assert run(args, out2) == 0
    for name in ("entanglement_trace.csv", "manifest.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_override_changes_output_and_manifest(tmp_path):
    base, shifted = tmp_path / "base", tmp_path / "shifted"
    args = ["coherence-scan", "--tau-min", "0.4", "--tau-max", "0.5", "--tau-step", "0.01"]
    assert run(args, base) == 0
    assert run(args + ["--override", "constants.b_z=600"], shifted) == 0
    assert (base / "coherence_scan.csv").read_bytes() != (
        shifted / "coherence_scan.csv"
    ).read_bytes()
    manifest = read_manifest(shifted)
    assert manifest["parameters"]["override"] == ["constants.b_z=600"]
    # effective config echo parses back to the overridden value
    effective = tomllib.loads(manifest["effective_config"])
    assert effective["constants"]["b_z"] == 600.0
    assert read_manifest(base)["config_sha256"] != manifest["config_sha256"]


def test_config_file_round_trip(tmp_path):
    cfg = model.apply_overrides(model.default_config(), ["constants.b_z=555"])
    cfg_path = tmp_path / "cfg.toml"
    cfg_path.write_text(model.dump_config(cfg))
    out = tmp_path / "out"
    rc = run(
        ["coherence-scan", "--config", str(cfg_path), "--tau-min", "0.4",
         "--tau-max", "0.42", "--tau-step", "0.01"],
        out,
    )
    assert rc == 0
    effective = tomllib.loads(read_manifest(out)["effective_config"])
    assert effective["constants"]["b_z"] == 555.0


def test_output_dir_env(tmp_path, monkeypatch):
    target = tmp_path / "from_env"
    monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(target))
    rc = cli.main(
        ["coherence-scan", "--tau-min", "0.4", "--tau-max", "0.42", "--tau-step", "0.01"]
    )
    assert rc == 0
    assert (target / "coherence_scan.csv").exists()


def test_entanglement_trace_values(tmp_path):
    out = tmp_path / "ent"
    assert run(["entanglement-trace", "--tau", "2.0", "--n-max", "8"], out) == 0
    text = (out / "entanglement_trace.csv").read_text()
    header = [ln for ln in text.splitlines() if not ln.startswith("#")][0]
    assert header == "t,concurrence,w"
    cfg = model.default_config()
    trace = dynamics.entanglement_trace(cfg.carbons, cfg.constants, 2.0, [2, 4, 6, 8])
    rows = [ln for ln in text.splitlines() if not ln.startswith("#")][1:]
    got = np.array([[float(v) for v in row.split(",")] for row in rows])
    assert np.allclose(got[:, 0], trace.t, rtol=1e-8)
    assert np.allclose(got[:, 1], trace.c, rtol=1e-7, atol=1e-9)


def test_spectrum_command(tmp_path):
    out = tmp_path / "spec"
    rc = run(
        ["spectrum", "--n", "32", "--tau-min", "0.35", "--tau-max", "0.6",
         "--tau-step", "0.01"],
        out,
    )
    assert rc == 0
    meta, cols = {}, {}
    for line in (out / "spectrum.csv").read_text().splitlines():
        if line.startswith("#") or not line:
            continue
        cols.setdefault("rows", []).append(line)
    assert cols["rows"][0] == "omega_over_2pi_MHz,s_value"
    assert len(cols["rows"]) > 10


def test_tomography_demo_exact(tmp_path):
    out = tmp_path / "tomo"
    rc = run(
        ["tomography-demo", "--state", "dephased-bell", "--w", "0.6", "--shots",
         "100000", "--exact"],
        out,
    )
    assert rc == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["concurrence_true"] == pytest.approx(0.6, abs=1e-9)
    assert metrics["concurrence_mle"] == pytest.approx(0.6, abs=1e-4)
    assert metrics["fidelity"] > 1 - 1e-6
    assert (out / "counts.csv").exists()
    assert (out / "rho_mle.txt").exists()


def test_tomography_demo_werner_seeded(tmp_path):
    out1, out2 = tmp_path / "w1", tmp_path / "w2"
    args = ["tomography-demo", "--state", "werner", "--p", "0.8", "--shots", "50000",
            "--seed", "3"]
    assert run(args, out1) == 0
    assert run(args, out2) == 0
    assert (out1 / "counts.csv").read_bytes() == (out2 / "counts.csv").read_bytes()
    metrics = json.loads((out1 / "metrics.json").read_text())
    assert metrics["concurrence_true"] == pytest.approx(0.7, abs=1e-9)


def test_calibrate_command(tmp_path):
    out = tmp_path / "cal"
    rc = run(
        ["calibrate", "--carbon", "1", "--tau-min", "2.3", "--tau-max", "2.9",
         "--tau-step", "0.02"],
        out,
    )
    assert rc == 0
    result = json.loads((out / "calibration.json").read_text())
    assert result["params"]["a_zz"] == pytest.approx(-77.02, abs=0.05)
    assert result["params"]["a_xz"] == pytest.approx(114.5, abs=0.5)
    text = (out / "calibration.txt").read_text()
    assert "a_zz" in text


def test_fit_decay_command(tmp_path):
    out = tmp_path / "fit"
    assert run(["fit-decay", "--t-decay", "3.7", "--points", "40"], out) == 0
    result = json.loads((out / "fit_decay.json").read_text())
    assert result["params"]["t_decay"] == pytest.approx(3.7, abs=1e-6)
    assert (out / "decay_trace.csv").exists()


def test_fit_decay_from_csv(tmp_path):
    t = np.linspace(0.0, 10.0, 30)
    y = 0.9 * np.exp(-((t / 4.0) ** 2))
    src = tmp_path / "input.csv"
    src.write_text("t,y\n" + "\n".join(f"{a},{b}" for a, b in zip(t, y)) + "\n")
    out = tmp_path / "fit2"
    assert run(["fit-decay", "--input", str(src)], out) == 0
    result = json.loads((out / "fit_decay.json").read_text())
    assert result["params"]["t_decay"] == pytest.approx(4.0, abs=1e-6)


@pytest.mark.parametrize("target", ["fig1c", "fig2c", "fig3d", "fig4a"])
def test_reproduce_targets(tmp_path, target):
    out = tmp_path / target
    assert run(["reproduce", target], out) == 0
    manifest = read_manifest(out)
    assert f"{target}.csv" in manifest["outputs"]
    digest = hashlib.sha256((out / f"{target}.csv").read_bytes()).hexdigest()
    assert manifest["outputs"][f"{target}.csv"] == digest


def test_reproduce_fig3d_columns(tmp_path):
    out = tmp_path / "f3d"
    assert run(["reproduce", "fig3d"], out) == 0
    header = [
        ln for ln in (out / "fig3d.csv").read_text().splitlines() if not ln.startswith("#")
    ][0]
    assert header == "t,c_all,c_c1"


def test_error_exit_codes(tmp_path, capsys):
    cases = [
        ["reproduce", "fig9z"],
        ["coherence-scan", "--tau-min", "-1"],
        ["coherence-scan", "--override", "constants.mass=1"],
        ["calibrate", "--carbon", "9"],
        ["fit-decay", "--input", str(tmp_path / "missing.csv")],
        ["bogus-command"],
    ]
    for args in cases:
        rc = cli.main(args + ["--output-dir", str(tmp_path / "err")])
        captured = capsys.readouterr()
        assert rc == 2, args
        assert captured.err.startswith("nvbath: error:")
        assert captured.err.strip().count("\n") == 0


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    assert "nvbath" in capsys.readouterr().out
