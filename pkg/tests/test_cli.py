import csv
import json

import numpy as np
import pytest

from stochpend.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main


def run_cli(tmp_path, command, config, out="run", seed=None):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config))
    argv = [command, "--config", str(cfg_path), "--out", str(tmp_path / out)]
    if seed is not None:
        argv += ["--seed", str(seed)]
    return main(argv), tmp_path / out


BASE = {
    "noise": {"sigma1": 0.1, "sigma2": 0.1},
    "grid": {"h": 0.001, "horizon_periods": 3},
    "seeds": {"master": 11},
}


def read_bytes(root):
    return {p.name: p.read_bytes() for p in sorted(root.iterdir())}


# ---------------------------------------------------------------------------
# simulate


def test_simulate_classical_trajectory(tmp_path, capsys):
    cfg = dict(BASE, noise={"sigma1": 0.0, "sigma2": 0.0},
               simulate={"initial": [0.5, 0.0]})
    code, out = run_cli(tmp_path, "simulate", cfg)
    assert code == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["outputs"]) == {"paths.csv", "trajectory.csv",
                                        "embedding.csv"}
    with open(out / "trajectory.csv") as fh:
        rows = list(csv.DictReader(fh))
    energy = np.array([float(r["H"]) for r in rows])
    assert np.abs(energy - energy[0]).max() <= 1e-8
    # 17-significant-digit round trip
    theta = [float(r["theta"]) for r in rows]
    assert all(np.isfinite(theta))


def test_simulate_byte_identical_rerun(tmp_path):
    cfg = dict(BASE, simulate={"initial": [0.1, 0.0], "section": True})
    code1, out1 = run_cli(tmp_path, "simulate", cfg, out="a")
    code2, out2 = run_cli(tmp_path, "simulate", cfg, out="b")
    assert code1 == code2 == EXIT_OK
    assert read_bytes(out1) == read_bytes(out2)


def test_simulate_seed_override_changes_outputs(tmp_path):
    cfg = dict(BASE, simulate={"initial": [0.1, 0.0]})
    _, out1 = run_cli(tmp_path, "simulate", cfg, out="a", seed=1)
    _, out2 = run_cli(tmp_path, "simulate", cfg, out="b", seed=2)
    a = (out1 / "paths.csv").read_bytes()
    b = (out2 / "paths.csv").read_bytes()
    assert a != b


def test_unknown_field_rejected(tmp_path, capsys):
    cfg = dict(BASE)
    cfg["noise"] = {"sigma1": 0.1, "typo_field": 1}
    code, out = run_cli(tmp_path, "simulate", cfg)
    assert code == EXIT_CONFIG
    assert not out.exists()
    assert "typo_field" in capsys.readouterr().err


def test_incommensurate_tau_with_section(tmp_path, capsys):
    cfg = dict(BASE, grid={"h": 0.0003, "horizon_periods": 2},
               simulate={"section": True})
    code, out = run_cli(tmp_path, "simulate", cfg)
    assert code == EXIT_CONFIG
    assert not out.exists()
    err = capsys.readouterr().err
    assert "multiple" in err and "0.0003" in err


def test_incommensurate_tau_without_section_ok(tmp_path):
    cfg = dict(BASE, grid={"h": 0.0003, "horizon_periods": 2})
    code, out = run_cli(tmp_path, "simulate", cfg)
    assert code == EXIT_OK


def test_blowup_exits_numeric(tmp_path, capsys):
    cfg = {
        "noise": {"channel1": {"alpha": 3000.0}},
        "grid": {"h": 0.001, "horizon_periods": 3},
    }
    with np.errstate(over="ignore", invalid="ignore"):
        code, out = run_cli(tmp_path, "simulate", cfg)
    assert code == EXIT_NUMERIC
    assert not out.exists()
    assert "numeric failure" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# average


def test_average_matches_ou_oracle(tmp_path):
    cfg = {
        "noise": {
            "channel1": {"alpha": 1.0, "beta": float(np.sqrt(2.0))},
            "channel2": {"alpha": 1.0, "beta": float(np.sqrt(2.0))},
        },
        "grid": {"h": 0.002},
        "average": {"burn_in_periods": 100, "avg_periods": 500, "batches": 16},
    }
    code, out = run_cli(tmp_path, "average", cfg)
    assert code == EXIT_OK
    stats = json.loads((out / "ergodic_stats.json").read_text())
    assert abs(stats["c1"] - 1.0) <= 3 * stats["se_c1"]
    assert stats["lambda1"] == pytest.approx(0.0, abs=1e-12)  # equal channels


def test_average_rejects_short_window(tmp_path):
    cfg = {"average": {"burn_in_periods": 100, "avg_periods": 10, "batches": 16}}
    code, _ = run_cli(tmp_path, "average", cfg)
    assert code == EXIT_CONFIG


# ---------------------------------------------------------------------------
# atlas / portrait


def test_atlas_contains_cusp_anchor(tmp_path):
    cfg = {"atlas": {"samples": 512}}
    code, out = run_cli(tmp_path, "atlas", cfg)
    assert code == EXIT_OK
    atlas = json.loads((out / "atlas.json").read_text())
    points = np.array(atlas["gamma1"])
    cusp = points[np.argmin(np.abs(points[:, 0] - 0.25) + np.abs(points[:, 1]))]
    assert cusp[0] == pytest.approx(0.25, abs=1e-12)
    assert cusp[1] == pytest.approx(0.0, abs=1e-12)
    assert atlas["gamma2"]["min_lambda1"] == 0.25


def test_atlas_scan_writes_labels(tmp_path):
    cfg = {"atlas": {"samples": 64, "scan": True,
                     "box": [0.0, 0.6, 0.0, 0.6], "step": 0.1,
                     "scan_grid_n": 256}}
    code, out = run_cli(tmp_path, "atlas", cfg)
    assert code == EXIT_OK
    with open(out / "scan.csv") as fh:
        rows = list(csv.DictReader(fh))
    labels = {r["label"] for r in rows}
    assert labels <= {"pi1", "pi2", "boundary"}
    assert "pi1" in labels and "pi2" in labels


def test_portrait_files(tmp_path):
    cfg = {"portrait": {"lambda1": 0.5, "lambda2": 1.0, "grid": [48, 48]}}
    code, out = run_cli(tmp_path, "portrait", cfg)
    assert code == EXIT_OK
    meta = json.loads((out / "portrait_meta.json").read_text())
    assert len(meta["equilibria"]) == 4
    assert len(meta["separatrix_levels"]) == 2
    with open(out / "portrait.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 48 * 48


# ---------------------------------------------------------------------------
# verify / poincare


def test_verify_deviation_needs_three_levels(tmp_path, capsys):
    cfg = {"verify": {"run": ["deviation"], "sigma_levels": [[0.1, 0.1]]}}
    code, out = run_cli(tmp_path, "verify", cfg)
    assert code == EXIT_CONFIG
    assert "3 sigma levels" in capsys.readouterr().err


def test_verify_small_exceedance(tmp_path):
    cfg = {
        "grid": {"h": 0.01, "horizon_periods": 3},
        "seeds": {"master": 5, "ensemble": 30},
        "verify": {"run": ["exceedance", "chebyshev"], "delta": 0.02,
                   "sigma_levels": [[0.2, 0.2], [0.05, 0.05]],
                   "burn_in_periods": 5},
    }
    code, out = run_cli(tmp_path, "verify", cfg)
    assert code == EXIT_OK
    rep = json.loads((out / "exceedance.json").read_text())
    assert rep["probs"][0] >= rep["probs"][1]
    cheb = json.loads((out / "chebyshev.json").read_text())
    assert cheb["passed"]


def test_poincare_concentration_run(tmp_path):
    cfg = {
        "grid": {"h": 0.01, "horizon_periods": 5},
        "seeds": {"master": 3, "ensemble": 40},
        "poincare": {"run": ["concentration", "sections", "fill"],
                     "sigma_levels": [[0.1, 0.1], [0.05, 0.05]],
                     "sections_exported": 2, "fill_grid": [16, 16]},
    }
    code, out = run_cli(tmp_path, "poincare", cfg)
    assert code == EXIT_OK
    rep = json.loads((out / "concentration.json").read_text())
    assert rep["radii"][0] > rep["radii"][1]
    assert (out / "section-000.csv").exists()
    assert (out / "fill.json").exists()


def test_invalid_json_config(tmp_path, capsys):
    cfg_path = tmp_path / "broken.json"
    cfg_path.write_text("{not json")
    code = main(["simulate", "--config", str(cfg_path), "--out",
                 str(tmp_path / "x")])
    assert code == EXIT_CONFIG
