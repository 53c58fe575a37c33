"""Filesystem results store: manifests, append-only run logs, derived artifacts.

Layout under the store root:

    manifests/<id>.json           frozen manifests
    runs/<id>.ndjson              one run record per line, append-only
    pools/<id>/<pair-hash>.json   seed pools used by the sweeps
    images/<ref>.png              decoded images, content-addressed
    derived/<id>/<name>           report artifacts plus an index of hashes

Run logs are never rewritten; derived artifacts are reproducible functions
of the log and are re-derived rather than edited.
"""
from __future__ import annotations

import hashlib
import json
import threading
from pathlib import Path
from typing import Iterator

from .backend import GeneratedImage
from .errors import StoreError
from .hashing import stable_digest
from .intervene import RunRecord
from .manifest import ExperimentManifest
from .seedcontrol import SeedPool

RECORD_SCHEMA_VERSION = 1


def pair_slug(pair_key: str) -> str:
    return stable_digest("pair", pair_key)[:16]


class ResultsStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        for sub in ("manifests", "runs", "pools", "images", "derived"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self._append_lock = threading.Lock()

    # -- manifests ---------------------------------------------------------

    def save_manifest(self, manifest: ExperimentManifest) -> None:
        path = self.root / "manifests" / f"{manifest.manifest_id}.json"
        path.write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True), encoding="utf-8")

    def load_manifest(self, manifest_id: str) -> ExperimentManifest:
        path = self.root / "manifests" / f"{manifest_id}.json"
        if not path.exists():
            raise StoreError(f"unknown manifest {manifest_id!r}")
        return ExperimentManifest.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def list_manifests(self) -> list[ExperimentManifest]:
        manifests = []
        for path in sorted((self.root / "manifests").glob("*.json")):
            manifests.append(ExperimentManifest.from_dict(json.loads(path.read_text(encoding="utf-8"))))
        manifests.sort(key=lambda m: m.created_at)
        return manifests

    # -- run records ---------------------------------------------------------

    def _runs_path(self, manifest_id: str) -> Path:
        return self.root / "runs" / f"{manifest_id}.ndjson"

    def append_record(self, manifest_id: str, record: RunRecord) -> None:
        line = json.dumps(
            {"manifest_id": manifest_id, "schema_version": RECORD_SCHEMA_VERSION, **record.to_dict()},
            sort_keys=True,
        )
        with self._append_lock:
            with self._runs_path(manifest_id).open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def iter_records(self, manifest_id: str) -> Iterator[RunRecord]:
        """Replay the log; a torn trailing line from a crash is skipped."""
        path = self._runs_path(manifest_id)
        if not path.exists():
            return
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    doc = json.loads(line)
                except json.JSONDecodeError:
                    continue
                yield RunRecord(
                    fingerprint=doc["fingerprint"],
                    pair_key=doc["pair"],
                    direction=doc["direction"],
                    seed=doc["seed"],
                    switch_k=doc["switch_k"],
                    tau=doc["tau"],
                    outcomes=doc["outcomes"],
                    image_ref=doc["image_ref"],
                    scorer_id=doc["scorer_id"],
                    wall_ms=doc["wall_ms"],
                    error=doc["error"],
                )

    def completed_fingerprints(self, manifest_id: str) -> set[str]:
        """Fingerprints of successful runs; failed cells stay re-runnable."""
        return {r.fingerprint for r in self.iter_records(manifest_id) if not r.failed}

    # -- seed pools ----------------------------------------------------------

    def save_pool(self, manifest_id: str, pool: SeedPool) -> None:
        pool_dir = self.root / "pools" / manifest_id
        pool_dir.mkdir(parents=True, exist_ok=True)
        path = pool_dir / f"{pair_slug(pool.pair_key)}.json"
        path.write_text(json.dumps(pool.to_dict(), indent=2, sort_keys=True), encoding="utf-8")

    def load_pool(self, manifest_id: str, pair_key: str) -> SeedPool | None:
        path = self.root / "pools" / manifest_id / f"{pair_slug(pair_key)}.json"
        if not path.exists():
            return None
        return SeedPool.from_dict(json.loads(path.read_text(encoding="utf-8")))

    # -- images --------------------------------------------------------------

    def save_image(self, image: GeneratedImage) -> str:
        path = self.root / "images" / f"{image.ref}.png"
        if not path.exists():
            path.write_bytes(image.png_bytes)
        return image.ref

    def image_path(self, ref: str) -> Path:
        path = self.root / "images" / f"{ref}.png"
        if not path.exists():
            raise StoreError(f"unknown image {ref!r}")
        return path

    # -- derived artifacts -----------------------------------------------------

    def derived_dir(self, manifest_id: str) -> Path:
        path = self.root / "derived" / manifest_id
        path.mkdir(parents=True, exist_ok=True)
        return path

    def write_derived(self, manifest_id: str, name: str, payload: bytes) -> str:
        path = self.derived_dir(manifest_id) / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
        return hashlib.sha256(payload).hexdigest()

    def derived_index(self, manifest_id: str) -> dict[str, str]:
        index_path = self.derived_dir(manifest_id) / "index.json"
        if not index_path.exists():
            return {}
        return json.loads(index_path.read_text(encoding="utf-8"))["artifacts"]

    def write_derived_index(self, manifest_id: str, hashes: dict[str, str]) -> None:
        index_path = self.derived_dir(manifest_id) / "index.json"
        payload = {"schema_version": RECORD_SCHEMA_VERSION, "artifacts": dict(sorted(hashes.items()))}
        index_path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
