import pathlib
import subprocess
import sys

import pytest

ROOT = pathlib.Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def fixtures_dir():
    return ROOT / "fixtures"


@pytest.fixture()
def run_cli(tmp_path):
    """Run the obatalab CLI in a subprocess, artifacts under tmp_path."""

    def run(*args, out=None):
        out = tmp_path / (out or "out")
        cmd = [sys.executable, "-m", "obatalab.cli", *[str(a) for a in args], "--out", str(out)]
        proc = subprocess.run(cmd, capture_output=True, text=True, cwd=str(ROOT))
        return proc, out

    return run
