"""Regenerate the studio's recorded fixtures from the Python stack.

Writes step-mapping parity cases (curve rows + expected step per probe
probability) and verbatim service payloads the studio's byte-match tests
check against. Run from the repository root:

    python scripts/make_studio_fixtures.py
"""
from __future__ import annotations

import json
import tempfile
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from switchpoint.cli import DEFAULT_TAXONOMY
from switchpoint.editeval import edit_at_probability
from switchpoint.manifest import plan_experiment
from switchpoint.runner import execute
from switchpoint.service import create_app
from switchpoint.stats import OutcomeMatrix, curve_to_rows, estimate_curve
from switchpoint.store import ResultsStore
from switchpoint.taxonomy import load_taxonomy
from switchpoint.trajectory import build_grid

FIXTURES = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures"


def random_curve(rng: np.random.Generator):
    steps = int(rng.integers(4, 60))
    seeds = int(rng.integers(1, 12))
    cells = rng.integers(0, 2, size=(seeds, steps + 1)).astype(np.int8)
    if rng.random() < 0.3:  # punch missing holes, sometimes whole steps
        holes = rng.random(cells.shape) < 0.15
        cells[holes] = -1
        if rng.random() < 0.5:
            cells[:, int(rng.integers(0, steps + 1))] = -1
    grid = build_grid(steps)
    matrix = OutcomeMatrix(seeds=list(range(seeds)), grid=grid, cells=cells, pair_key="fixture")
    return estimate_curve(matrix)


def step_curve(lock_tau: float, steps: int = 50):
    grid = build_grid(steps)
    cells = np.zeros((8, steps + 1), dtype=np.int8)
    for k in range(steps + 1):
        if grid.tau_of(k) >= lock_tau:
            cells[:, k] = 1
    matrix = OutcomeMatrix(seeds=list(range(8)), grid=grid, cells=cells, pair_key="fixture")
    return estimate_curve(matrix)


def make_step_mapping():
    rng = np.random.default_rng(20250810)
    curves = [step_curve(lock) for lock in (0.2, 0.5, 0.6, 0.8)]
    while len(curves) < 50:
        curve = random_curve(rng)
        if curve.defined_points():
            curves.append(curve)
    cases = []
    for index, curve in enumerate(curves):
        probes = []
        for p in (0.0, float(rng.uniform(0, 1)), 0.5, 1.0):
            probes.append({"p": p, "expected_step": edit_at_probability(curve, p)})
        defined = curve.defined_points()
        exact = defined[int(rng.integers(0, len(defined)))].estimate
        probes.append({"p": exact, "expected_step": edit_at_probability(curve, exact)})
        cases.append({"name": f"curve-{index:02d}", "rows": curve_to_rows(curve), "probes": probes})
    out = FIXTURES / "step_mapping.json"
    out.write_text(json.dumps({"cases": cases}, indent=1), encoding="utf-8")
    print(f"wrote {out} ({len(cases)} curves)")


def make_recorded_payloads():
    taxonomy = load_taxonomy(DEFAULT_TAXONOMY)
    with tempfile.TemporaryDirectory() as tmp:
        store = ResultsStore(Path(tmp) / "store")
        manifest = plan_experiment(
            {
                "backend": {"type": "synthetic", "T": 10, "lock_tau": {"old": 0.6}},
                "scorer": {"type": "mock"},
                "seeds": {"count": 3},
                "scope": {"concept": "old", "context": "city park", "directions": ["insertion"]},
            },
            taxonomy,
        )
        store.save_manifest(manifest)
        execute(manifest, store, taxonomy)
        app = create_app(Path(tmp) / "store", taxonomy_path=DEFAULT_TAXONOMY)
        with TestClient(app) as client:
            pair = "Demographics|Age group|old|city park"
            curve = client.get(f"/manifests/{manifest.manifest_id}/curves", params={"pair": pair})
            (FIXTURES / "payloads").mkdir(parents=True, exist_ok=True)
            (FIXTURES / "payloads" / "curve.json").write_text(curve.text, encoding="utf-8")
            summary = client.get(f"/manifests/{manifest.manifest_id}/summary")
            (FIXTURES / "payloads" / "summary.json").write_text(summary.text, encoding="utf-8")
    print(f"wrote {FIXTURES / 'payloads'}")


if __name__ == "__main__":
    FIXTURES.mkdir(parents=True, exist_ok=True)
    make_step_mapping()
    make_recorded_payloads()
