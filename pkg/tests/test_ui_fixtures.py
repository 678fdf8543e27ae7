"""The committed frontend cross-check fixtures must match regeneration."""

import filecmp
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "frontend" / "test" / "fixtures"

sys.path.insert(0, str(ROOT / "scripts"))


@pytest.mark.skipif(not FIXTURES.exists(), reason="frontend fixtures not present")
def test_committed_fixtures_are_current(tmp_path):
    from make_ui_fixtures import generate

    fresh = generate(tmp_path)
    for name in (
        "stability_sweep.csv",
        "damping_sweep.csv",
        "stability_curve.json",
        "eigen_sweep.json",
        "flutter.romdb",
    ):
        assert (FIXTURES / name).exists(), f"missing committed fixture {name}"
        assert filecmp.cmp(FIXTURES / name, fresh / name, shallow=False), (
            f"fixture {name} is stale; rerun scripts/make_ui_fixtures.py"
        )
