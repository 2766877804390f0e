"""
Scenarios, artifacts and checks
===============================

Run a built-in scenario, write its CSV/JSON/SVG artifacts to a temporary
directory, then run one of the numerical check suites. The same operations
are available from the command line:

    secularbilliards billiard --scenario builtin:kepler-ellipse-spherical --out run/ --svg run/orbit.svg
    secularbilliards check --suite identities
"""

import tempfile
from pathlib import Path

from secularbilliards import catalog
from secularbilliards.checks import run_suite
from secularbilliards.runner import execute, write_artifacts

sc = catalog.get("kepler-ellipse-spherical")
result = execute(sc)
with tempfile.TemporaryDirectory() as tmp:
    paths = write_artifacts(result, tmp, svg_path=Path(tmp) / "orbit.svg")
    for p in paths:
        print(f"wrote {p.name:16s} {p.stat().st_size:8d} bytes")
print("summary status:", result.summary["status"])

rep = run_suite("identities", samples=200)
print(f"identities: max residual {rep.value:.2e} (threshold {rep.threshold:.0e}) -> {'pass' if rep.passed else 'FAIL'}")
