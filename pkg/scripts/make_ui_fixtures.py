"""Regenerate the frontend cross-check fixtures.

Builds the deterministic two-rotor stability database, exports the CLI
stability and damping sweeps as CSV, and captures the matching service
responses as JSON. The vitest cross-check compares both at the UI's display
precision; `tests/test_ui_fixtures.py` fails when the committed files
drift from what this script produces.

Usage: python scripts/make_ui_fixtures.py
"""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

import numpy as np  # noqa: E402
from fastapi.testclient import TestClient  # noqa: E402

from fixture_helpers import stability_database  # noqa: E402
from romdb import dbstore  # noqa: E402
from romdb.cli import main as cli_main  # noqa: E402
from romdb.service import create_app  # noqa: E402

FIXTURE_DIR = ROOT / "frontend" / "test" / "fixtures"
TARGET = [0.0, 0.0]
SAMPLES = 5
TOL = 1e-7


def generate(out_dir=FIXTURE_DIR):
    out_dir.mkdir(parents=True, exist_ok=True)
    db = stability_database()
    db_path = out_dir / "flutter.romdb"
    dbstore.save(db, db_path)

    code = cli_main([
        "sweep", "--db", str(db_path), "--target", ",".join(map(str, TARGET)),
        "--stability", "--axis", "0", "--samples", str(SAMPLES),
        "--crit-axis", "1", "--tol", str(TOL),
        "--out", str(out_dir / "stability_sweep.csv"),
    ])
    assert code == 0
    code = cli_main([
        "sweep", "--db", str(db_path), "--target", ",".join(map(str, TARGET)),
        "--damping", "--axis", "1", "--samples", str(SAMPLES),
        "--out", str(out_dir / "damping_sweep.csv"),
    ])
    assert code == 0

    client = TestClient(create_app(databases={"flutter": db}))
    stability = client.post(
        "/databases/flutter/query",
        json={
            "target": {"coords": TARGET},
            "operation": "stability_curve",
            "stability_curve": {"axis": 0, "samples": SAMPLES, "crit_axis": 1, "tol": TOL},
        },
    )
    assert stability.status_code == 200
    (out_dir / "stability_curve.json").write_text(
        json.dumps(stability.json(), sort_keys=True, indent=1) + "\n"
    )

    eigen_samples = []
    for x in np.linspace(db.domain.lower[1], db.domain.upper[1], SAMPLES):
        resp = client.post(
            "/databases/flutter/query",
            json={"target": {"coords": [TARGET[0], float(x)]}, "operation": "eigen"},
        )
        assert resp.status_code == 200
        eigen_samples.append({"x": float(x), "eigen": resp.json()["result"]})
    (out_dir / "eigen_sweep.json").write_text(
        json.dumps(eigen_samples, sort_keys=True, indent=1) + "\n"
    )
    return out_dir


if __name__ == "__main__":
    path = generate()
    print(f"fixtures written to {path}")
