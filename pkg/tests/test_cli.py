import csv
import json

import numpy as np
import pytest

from torusfloer.cli import main
from torusfloer.structures import standard_structures


def run_cli(*args):
    return main(list(args))


def read_json(path):
    return json.loads(path.read_text())


def test_structures_standard(tmp_path, capsys):
    out = tmp_path / "run"
    assert run_cli("structures", "--standard", "1", "--out", str(out)) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["J"] == standard_structures(1).J.tolist()
    assert printed["K"] == standard_structures(1).K.tolist()
    report = read_json(out / "report.json")
    assert report["passed"]
    manifest = read_json(out / "manifest.json")
    assert manifest["exit_status"] == 0
    assert manifest["subcommand"] == "structures"


def test_structures_malformed_input(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run_cli("structures", "--input", str(bad), "--out", str(tmp_path / "o")) == 1


def test_structures_sign_flip_fails(tmp_path):
    t = standard_structures(1)
    payload = {
        "omega1": t.omega1.tolist(),
        "omega2": (-t.omega2).tolist(),
        "I": t.I.tolist(),
    }
    cfg = tmp_path / "pair.json"
    cfg.write_text(json.dumps(payload))
    out = tmp_path / "out"
    assert run_cli("structures", "--input", str(cfg), "--out", str(out)) == 2
    report = read_json(out / "report.json")
    assert report["failed_checks"] == ["pairing"]


def test_structures_valid_input_builds_triple(tmp_path):
    t = standard_structures(1)
    payload = {
        "omega1": (2 * t.omega1).tolist(),
        "omega2": (2 * t.omega2).tolist(),
        "I": t.I.tolist(),
    }
    cfg = tmp_path / "pair.json"
    cfg.write_text(json.dumps(payload))
    out = tmp_path / "out"
    assert run_cli("structures", "--input", str(cfg), "--out", str(out)) == 0
    report = read_json(out / "report.json")
    assert report["triple"]["g"] == (2 * np.eye(4)).tolist()
    # byte-identical config snapshot
    assert (out / "config_snapshot.json").read_bytes() == cfg.read_bytes()


def test_symbol_sweep(tmp_path):
    out = tmp_path / "sym"
    assert run_cli("symbol", "--m-bound", "3", "--xi", "0", "--nmin-m-bound", "6",
                   "--out", str(out)) == 0
    with (out / "sweep.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 49
    assert all(float(r["det_residual"]) < 1e-10 for r in rows)
    cert = read_json(out / "nmin_certificate.json")
    assert cert["n_min"] == 1
    assert cert["certified"]


def test_flow_mode_seed_monotone_action(tmp_path):
    out = tmp_path / "flow"
    code = run_cli("flow", "--h", "zero", "--seed-mode", "1,0", "--grid", "16",
                   "--s-max", "20", "--out", str(out))
    assert code == 0  # the run reaches a definite reported outcome
    with (out / "diagnostics.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    acts = [float(r["action"]) for r in rows]
    assert len(acts) > 10
    assert all(b <= a + 1e-12 for a, b in zip(acts, acts[1:]))
    result = read_json(out / "result.json")
    assert result["diverged"]  # a bare mode overlaps the growing directions


def test_flow_bad_seed_mode(tmp_path):
    assert run_cli("flow", "--seed-mode", "oops", "--out", str(tmp_path / "x")) == 1


def test_energy_command(tmp_path):
    out = tmp_path / "energy"
    code = run_cli("energy", "--trajectories", "2", "--grid", "16", "--ds", "0.01",
                   "--rng-seed", "3", "--save-trajectories", "--out", str(out))
    assert code == 0
    report = read_json(out / "report.json")
    assert report["passed"]
    assert len(report["trajectories"]) == 2
    for row in report["trajectories"]:
        assert row["energy"] <= report["bound"] + 1e-2
        assert row["defect"] < 1e-3
    # re-run the checks on the stored trajectories
    out2 = tmp_path / "energy_reload"
    assert run_cli("energy", "--load", str(out), "--out", str(out2)) == 0
    report2 = read_json(out2 / "report.json")
    assert report2["passed"]
    assert [r["energy"] for r in report2["trajectories"]] == pytest.approx(
        [r["energy"] for r in report["trajectories"]]
    )


def test_cuplength_command_and_determinism(tmp_path):
    config = {
        "n_pairs": 1,
        "grid_size": 16,
        "potential": {"kind": "trig_potential", "epsilon": 0.3, "modes": [[1, 0], [0, 1]]},
        "lattice_per_dim": 2,
        "random_starts": 1,
        "residual_tol": 1e-8,
        "dedup_delta": 0.05,
        "s_max": 60.0,
        "ds": 0.02,
        "seed": 11,
    }
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(config))
    out1 = tmp_path / "run1"
    out2 = tmp_path / "run2"
    assert run_cli("cuplength", "--config", str(cfg), "--out", str(out1), "--save-fields") == 0
    assert run_cli("cuplength", "--config", str(cfg), "--out", str(out2)) == 0
    report = read_json(out1 / "report.json")
    assert report["distinct"] >= 3 and report["passed"]
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
    with (out1 / "summary.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5  # 4 lattice + 1 random seed
    assert any((out1 / "records").glob("*.bin"))


def test_cuplength_dry_run(tmp_path):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"n_pairs": 1, "grid_size": 16}))
    out = tmp_path / "dry"
    assert run_cli("cuplength", "--config", str(cfg), "--dry-run", "--out", str(out)) == 0
    assert not (out / "report.json").exists()


def test_cuplength_invalid_config(tmp_path):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"grid": 99}))
    assert run_cli("cuplength", "--config", str(cfg), "--out", str(tmp_path / "x")) == 1


def test_legendre_check(tmp_path):
    out = tmp_path / "leg"
    assert run_cli("legendre-check", "--samples", "4", "--out", str(out)) == 0
    report = read_json(out / "report.json")
    assert report["passed"]


def test_ddw_demo(tmp_path):
    out = tmp_path / "ddw"
    assert run_cli("ddw-demo", "--grid", "16", "--samples", "5", "--out", str(out)) == 0
    report = read_json(out / "report.json")
    assert report["passed"]
    assert report["max_witness_residual"] < 1e-12


def test_field_round_trip(tmp_path):
    from torusfloer.fields_io import load_field, save_field
    from torusfloer.spectral import random_band_limited

    f = random_band_limited(np.random.default_rng(0), 16, 4, 2, layout="z")
    save_field(f, tmp_path / "field")
    g = load_field(tmp_path / "field")
    assert np.array_equal(f.values, g.values)
    assert g.layout == "z"
    header = json.loads((tmp_path / "field.json").read_text())
    assert header["shape"] == [16, 16, 4]
