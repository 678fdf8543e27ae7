import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from fixture_helpers import scrambled_database, stability_database
from romdb import dbstore
from romdb.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def scrambled_path(tmp_path):
    db, _ = scrambled_database(seed=5)
    path = tmp_path / "scrambled.romdb"
    dbstore.save(db, path)
    return path


@pytest.fixture()
def stability_path(tmp_path):
    path = tmp_path / "flutter.romdb"
    dbstore.save(stability_database(), path)
    return path


BUILD_CONFIG = {
    "family": {
        "kind": "msd_chain",
        "base_dofs": 12,
        "stiff_coeffs": [0.4, 0.3],
        "rayleigh": [0.05, 0.02],
    },
    "points": {"lattice": {"axes": [[0.2, 0.8], [0.2, 0.8]]}},
    "rob": {"method": "modal", "k": 3},
    "domain": {"lower": [0.0, 0.0], "upper": [1.0, 1.0]},
}


class TestBuildInspect:
    def test_build_then_inspect(self, tmp_path, capsys):
        cfg = tmp_path / "family.json"
        cfg.write_text(json.dumps(BUILD_CONFIG))
        out_db = tmp_path / "built.romdb"
        code, out, _ = run_cli(capsys, "build", "--config", str(cfg), "--out", str(out_db))
        assert code == 0
        assert json.loads(out)["n_records"] == 4

        code, out, _ = run_cli(capsys, "inspect", "--db", str(out_db))
        assert code == 0
        report = json.loads(out)
        assert report["checks"]["entry_count"] == "PASS"
        assert report["k"] == 3
        assert report["n_records"] == 4

    def test_malformed_config_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text("{not json")
        code, _, err = run_cli(capsys, "build", "--config", str(cfg), "--out", str(tmp_path / "x"))
        assert code == 2
        assert json.loads(err)["error"] == "invalid_spec"

    def test_corrupt_db_exits_1(self, tmp_path, capsys, scrambled_path):
        raw = bytearray(scrambled_path.read_bytes())
        raw[-2] ^= 0xFF
        bad = tmp_path / "corrupt.romdb"
        bad.write_bytes(bytes(raw))
        code, _, err = run_cli(capsys, "inspect", "--db", str(bad))
        assert code == 1
        assert json.loads(err)["error"] == "load_error"


class TestAlign:
    def test_fixed_point_pg_on_scrambled_fixture(self, tmp_path, capsys, scrambled_path):
        out_db = tmp_path / "aligned.romdb"
        code, out, _ = run_cli(
            capsys, "align", "--db", str(scrambled_path), "--out", str(out_db),
            "--mode", "fixed-point-pg",
        )
        assert code == 0
        report = json.loads(out)
        assert report["max_pairwise_distance_after"] <= 1e-9 * report["max_pairwise_distance_before"]
        assert report["all_converged"]
        loaded = dbstore.load(out_db)
        assert loaded.consistency.mode == "fixed_point_pg"

    def test_procrustes_without_bases_exits_1(self, tmp_path, capsys, scrambled_path):
        code, _, err = run_cli(
            capsys, "align", "--db", str(scrambled_path), "--out", str(tmp_path / "x.romdb"),
            "--mode", "procrustes",
        )
        assert code == 1
        assert json.loads(err)["error"] == "mesh_mismatch"


class TestPartition:
    def test_partition_axis(self, tmp_path, capsys, stability_path):
        out_db = tmp_path / "parts.romdb"
        code, out, _ = run_cli(
            capsys, "partition", "--db", str(stability_path), "--out", str(out_db),
            "--axis", "0=0.5",
        )
        assert code == 0
        report = json.loads(out)
        assert report["subdomains"] == 2
        assert sum(report["sizes"]) > dbstore.load(out_db).n_records  # shared column duplicated

    def test_boundary_outside_exits_2(self, tmp_path, capsys, stability_path):
        code, _, err = run_cli(
            capsys, "partition", "--db", str(stability_path), "--out", str(tmp_path / "x"),
            "--axis", "0=2.0",
        )
        assert code == 2


class TestInterpSweep:
    def test_interp_at_node(self, capsys, stability_path):
        db = dbstore.load(stability_path)
        rec = db.records[4]
        code, out, _ = run_cli(
            capsys, "interp", "--db", str(stability_path),
            "--target", ",".join(str(c) for c in rec.point),
        )
        assert code == 0
        dump = json.loads(out)
        assert dump["rom"]["slots"]["E"] == rec.rom.E.tolist()
        assert dump["consistency"]["mode"] == "fixed_point_g"

    def test_frequency_sweep_csv(self, tmp_path, capsys, stability_path):
        out_csv = tmp_path / "sweep.csv"
        code, out, _ = run_cli(
            capsys, "sweep", "--db", str(stability_path), "--target", "0.3,0.2",
            "--grid", "0.5:1.5:5", "--out", str(out_csv),
        )
        assert code == 0
        rows = list(csv.DictReader(out_csv.open()))
        assert len(rows) == 5  # one output channel
        assert set(rows[0]) == {"p0", "p1", "x", "output_index", "re", "im", "db"}
        xs = sorted({float(r["x"]) for r in rows})
        assert xs == [0.5, 0.75, 1.0, 1.25, 1.5]

    def test_stability_sweep_csv(self, tmp_path, capsys, stability_path):
        out_csv = tmp_path / "stab.csv"
        code, out, _ = run_cli(
            capsys, "sweep", "--db", str(stability_path), "--target", "0.0,0.0",
            "--stability", "--axis", "0", "--samples", "6", "--crit-axis", "1",
            "--tol", "1e-5", "--out", str(out_csv),
        )
        assert code == 0
        rows = list(csv.DictReader(out_csv.open()))
        assert len(rows) == 6
        assert set(rows[0]) == {"p0", "p1", "q_crit", "mode_index", "ambiguous"}
        q = [float(r["q_crit"]) for r in rows]
        assert all(0.4 <= v <= 1.1 for v in q)
        assert {int(r["mode_index"]) for r in rows} == {0, 2}

    def test_out_of_domain_exits_2(self, capsys, stability_path):
        code, _, err = run_cli(
            capsys, "interp", "--db", str(stability_path), "--target", "7.0,0.0"
        )
        assert code == 2
        assert json.loads(err)["error"] == "out_of_domain"


class TestInverseSample:
    def test_inverse_with_explicit_measurements(self, tmp_path, capsys, stability_path):
        from romdb.analyze import db_transform, frequency_response
        from romdb.manifold import interpolate_rom

        db = dbstore.load(stability_path)
        truth = np.array([0.4, 0.6])
        rom = interpolate_rom(db, truth)
        wavenumbers = [0.4, 0.8, 1.2, 1.8]
        resp = frequency_response(rom, wavenumbers)
        spec = {
            "measured": db_transform(resp.outputs).tolist(),
            "wavenumbers": wavenumbers,
            "alpha": [1.0, 1.0, 1.0, 1.0],
            "beta": 0.0,
            "optimizer": {"kind": "simulated_annealing", "seed": 11, "n_temperatures": 25},
            "truth_point": truth.tolist(),
        }
        spec_path = tmp_path / "inverse.json"
        spec_path.write_text(json.dumps(spec))
        code, out, _ = run_cli(
            capsys, "inverse", "--db", str(stability_path), "--spec", str(spec_path)
        )
        assert code == 0
        report = json.loads(out)
        assert report["recovery_error"] <= 0.05
        assert report["n_calls"] > 100

    def test_sample_converges(self, tmp_path, capsys):
        cfg = {
            "family": {"kind": "msd_chain", "base_dofs": 10, "stiff_coeffs": [0.3, 0.2]},
            "rob": {"method": "modal", "k": 6},
            "domain": {"lower": [0.1, 0.1], "upper": [0.9, 0.9]},
            "sampler": {
                "tolerance": 0.4,
                "max_refinements": 1,
                "initial_lattice": [2, 2],
                "metric": "output_error",
                "frequency_grid": [0.3, 0.8],
                "align_mode": "fixed_point_g",
            },
        }
        cfg_path = tmp_path / "sampler.json"
        cfg_path.write_text(json.dumps(cfg))
        out_db = tmp_path / "sampled.romdb"
        code, out, _ = run_cli(capsys, "sample", "--config", str(cfg_path), "--out", str(out_db))
        report = json.loads(out)
        assert code == 0
        assert report["converged"]
        assert dbstore.load(out_db).n_records >= 4


def test_console_entry_point(tmp_path):
    db, _ = scrambled_database(seed=1)
    path = tmp_path / "db.romdb"
    dbstore.save(db, path)
    proc = subprocess.run(
        [sys.executable, "-m", "romdb.cli", "inspect", "--db", str(path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["checks"]["entry_count"] == "PASS"
