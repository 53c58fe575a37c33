from __future__ import annotations

import time

import pytest
from fastapi.testclient import TestClient

from switchpoint.cli import DEFAULT_TAXONOMY
from switchpoint.editeval import edit_at_probability
from switchpoint.manifest import plan_experiment
from switchpoint.runner import curve_for_pair, execute
from switchpoint.service import create_app
from switchpoint.stats import curve_to_rows
from switchpoint.store import ResultsStore
from switchpoint.taxonomy import load_taxonomy

PAIR = "Demographics|Age group|old|city park"


@pytest.fixture(scope="module")
def stack(tmp_path_factory):
    root = tmp_path_factory.mktemp("service-store")
    taxonomy = load_taxonomy(DEFAULT_TAXONOMY)
    store = ResultsStore(root)
    manifest = plan_experiment(
        {
            "backend": {"type": "synthetic", "T": 10, "lock_tau": {"old": 0.6}},
            "scorer": {"type": "mock"},
            "seeds": {"count": 3, "candidate_factor": 2},
            "scope": {"concept": "old", "context": "city park", "directions": ["insertion"]},
        },
        taxonomy,
    )
    store.save_manifest(manifest)
    execute(manifest, store, taxonomy)
    app = create_app(root, taxonomy_path=DEFAULT_TAXONOMY)
    with TestClient(app) as client:
        yield client, manifest, store, taxonomy


def poll_edit(client, edit_id, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        body = client.get(f"/edits/{edit_id}").json()
        if body["status"] in ("completed", "failed"):
            return body
        time.sleep(0.02)
    raise TimeoutError("edit job did not finish")


def test_taxonomy_payload_mirrors_document(stack):
    client, manifest, store, taxonomy = stack
    body = client.get("/taxonomy").json()
    assert body["schema_version"] == 1
    assert body["document"] == taxonomy.serialize()
    assert body["hash"] == taxonomy.document_hash


def test_manifest_listing_and_lookup(stack):
    client, manifest, *_ = stack
    listing = client.get("/manifests").json()
    assert [m["id"] for m in listing["manifests"]] == [manifest.manifest_id]
    single = client.get(f"/manifests/{manifest.manifest_id}").json()
    assert single["manifest"]["id"] == manifest.manifest_id
    assert single["manifest"]["task_count"] == manifest.task_count


def test_unknown_manifest_is_404(stack):
    client, *_ = stack
    assert client.get("/manifests/nope").status_code == 404
    assert client.get("/manifests/nope/curves", params={"pair": PAIR}).status_code == 404


def test_curve_payload_matches_export_schema(stack):
    client, manifest, store, taxonomy = stack
    body = client.get(f"/manifests/{manifest.manifest_id}/curves", params={"pair": PAIR}).json()
    curve = curve_for_pair(manifest, store, PAIR)
    assert body["rows"] == curve_to_rows(curve)
    assert body["summary"]["tau50"] == 0.6
    assert body["summary"]["tau70"] == 0.6
    assert body["recommended_band"] == [0.5, 0.7]
    assert body["schema_version"] == 1


def test_unknown_pair_is_404(stack):
    client, manifest, *_ = stack
    response = client.get(
        f"/manifests/{manifest.manifest_id}/curves", params={"pair": "Objects|Animals|horse|park"}
    )
    assert response.status_code == 404


def test_summary_lists_pairs_and_aggregates(stack):
    client, manifest, *_ = stack
    body = client.get(f"/manifests/{manifest.manifest_id}/summary").json()
    assert len(body["pairs"]) == 1
    assert body["pairs"][0]["pair"] == PAIR
    assert body["aggregates"]["insertion"]["tau50"]["mean"] == 0.6


def test_edit_dry_run_matches_library_mapping(stack):
    client, manifest, store, _ = stack
    curve = curve_for_pair(manifest, store, PAIR)
    for p in (0.0, 0.3, 0.5, 0.9, 1.0):
        body = client.post(
            "/edits",
            json={"pair": PAIR, "probability": p, "seed": 1, "dry_run": True},
        ).json()
        assert body["step_k"] == edit_at_probability(curve, p)


def test_edit_job_end_to_end(stack):
    client, manifest, store, _ = stack
    posted = client.post("/edits", json={"pair": PAIR, "probability": 0.6, "seed": 11}).json()
    assert posted["status"] == "queued"
    done = poll_edit(client, posted["edit_id"])
    assert done["status"] == "completed"
    assert done["outcomes"] == {"old": "yes"}
    report = done["report"]
    assert set(report) >= {"clip_img", "clip_txt", "clip_dir", "degenerate_direction", "tau"}
    image = client.get(f"/images/{done['image_ref']}")
    assert image.status_code == 200
    assert image.content.startswith(b"\x89PNG")
    base = client.get(f"/images/{done['base_image_ref']}")
    assert base.status_code == 200


def test_edit_jobs_are_deterministic(stack):
    client, *_ = stack
    first = poll_edit(client, client.post("/edits", json={"pair": PAIR, "probability": 0.7, "seed": 4}).json()["edit_id"])
    second = poll_edit(client, client.post("/edits", json={"pair": PAIR, "probability": 0.7, "seed": 4}).json()["edit_id"])
    assert first["image_ref"] == second["image_ref"]
    assert first["report"] == second["report"]


def test_unknown_edit_and_image_are_404(stack):
    client, *_ = stack
    assert client.get("/edits/ffff").status_code == 404
    assert client.get("/images/ffff").status_code == 404


def test_edit_rejects_bad_probability(stack):
    client, *_ = stack
    response = client.post("/edits", json={"pair": PAIR, "probability": 1.5, "seed": 0})
    assert response.status_code == 400
