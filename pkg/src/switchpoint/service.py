"""HTTP service over a results store: curves, summaries, images, edit jobs.

Edit jobs run on a single background worker so one backend session is live
at a time; clients poll GET /edits/{id}. Every payload carries
``schema_version`` so clients can detect drift.
"""
from __future__ import annotations

import queue
import threading
import uuid
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse
from pydantic import BaseModel

from .config import build_backend, build_embeddings, build_scorer
from .editeval import RECOMMENDED_PROBABILITY_BAND, edit_at_probability, evaluate_edit
from .errors import StoreError, SwitchpointError
from .intervene import INSERTION, InterventionPlan, run_pci
from .manifest import ExperimentManifest
from .runner import canonical_records, curve_for_pair
from .stats import CrossingSummary, aggregate, curve_to_rows
from .store import ResultsStore
from .taxonomy import Taxonomy, load_taxonomy, pair_from_key
from .trajectory import build_grid

API_SCHEMA_VERSION = 1


class EditRequest(BaseModel):
    pair: str
    probability: float
    seed: int
    manifest_id: str | None = None
    direction: str = INSERTION
    dry_run: bool = False


class ServiceState:
    def __init__(self, store: ResultsStore, taxonomy: Taxonomy, embeddings_config: dict | None = None):
        self.store = store
        self.taxonomy = taxonomy
        self.embeddings = build_embeddings(embeddings_config)
        self.jobs: dict[str, dict] = {}
        self.queue: "queue.Queue[str]" = queue.Queue()
        self.lock = threading.Lock()
        worker = threading.Thread(target=self._work, daemon=True, name="edit-worker")
        worker.start()

    # -- job machinery -----------------------------------------------------

    def enqueue(self, job: dict) -> str:
        edit_id = uuid.uuid4().hex
        job["id"] = edit_id
        job["status"] = "queued"
        with self.lock:
            self.jobs[edit_id] = job
        self.queue.put(edit_id)
        return edit_id

    def _work(self) -> None:
        while True:
            edit_id = self.queue.get()
            with self.lock:
                job = self.jobs[edit_id]
                job["status"] = "running"
            try:
                result = self._run_edit(job)
                with self.lock:
                    job.update(result)
                    job["status"] = "completed"
            except Exception as exc:
                with self.lock:
                    job["status"] = "failed"
                    job["error"] = str(exc)

    def _run_edit(self, job: dict) -> dict:
        manifest = self.store.load_manifest(job["manifest_id"])
        pair = pair_from_key(self.taxonomy, job["pair"])
        grid = build_grid(manifest.grid_steps)
        backend = build_backend(manifest.backend_config)
        pool = self.store.load_pool(manifest.manifest_id, pair.key)
        negative = bool(pool and pool.negative_guidance_used)
        scorer = build_scorer(manifest.scorer_config, backend)

        step_k = job["step_k"]
        base_plan = InterventionPlan.insertion(
            pair, grid, grid.steps, job["seed"],
            guidance_scale=manifest.guidance_scale, negative_seed_control=negative,
        )
        edit_plan = InterventionPlan.insertion(
            pair, grid, step_k, job["seed"],
            guidance_scale=manifest.guidance_scale, negative_seed_control=negative,
        )
        images: dict[str, object] = {}
        base_record = run_pci(base_plan, backend, scorer, image_sink=lambda im: images.__setitem__("base", im))
        edit_record = run_pci(edit_plan, backend, scorer, image_sink=lambda im: images.__setitem__("edited", im))
        base_image, edited_image = images["base"], images["edited"]
        self.store.save_image(base_image)
        self.store.save_image(edited_image)
        report = evaluate_edit(
            base_image,
            edited_image,
            pair.base_prompt,
            pair.concept_prompt,
            self.embeddings,
            tau=grid.tau_of(step_k),
            curve_ref=job["pair"],
        )
        return {
            "step_k": step_k,
            "tau": grid.tau_of(step_k),
            "image_ref": edit_record.image_ref,
            "base_image_ref": base_record.image_ref,
            "outcomes": dict(edit_record.outcomes),
            "report": report.to_dict(),
        }

    def snapshot(self, edit_id: str) -> dict:
        with self.lock:
            job = self.jobs.get(edit_id)
            if job is None:
                raise KeyError(edit_id)
            return dict(job)


def _manifest_for_pair(state: ServiceState, pair_key: str, manifest_id: str | None) -> ExperimentManifest:
    if manifest_id is not None:
        return state.store.load_manifest(manifest_id)
    candidates = [m for m in state.store.list_manifests() if pair_key in m.pair_keys]
    if not candidates:
        raise StoreError(f"no manifest covers pair {pair_key!r}")
    return candidates[-1]


def create_app(
    store_root: str | Path,
    taxonomy_path: str | Path | None = None,
    embeddings_config: dict | None = None,
) -> FastAPI:
    store = ResultsStore(store_root)
    if taxonomy_path is None:
        taxonomy_path = Path(__file__).parent / "data" / "taxonomy.json"
    taxonomy = load_taxonomy(Path(taxonomy_path))
    state = ServiceState(store, taxonomy, embeddings_config)
    app = FastAPI(title="switchpoint", version="0.1.0")
    app.state.service = state
    # the studio is served separately (static files); no auth layer by design
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.get("/taxonomy")
    def get_taxonomy() -> dict:
        return {
            "schema_version": API_SCHEMA_VERSION,
            "version": taxonomy.version,
            "hash": taxonomy.document_hash,
            "document": taxonomy.serialize(),
        }

    @app.get("/manifests")
    def list_manifests() -> dict:
        return {
            "schema_version": API_SCHEMA_VERSION,
            "manifests": [
                {
                    "id": m.manifest_id,
                    "status": m.status,
                    "created_at": m.created_at,
                    "pairs": list(m.pair_keys),
                    "directions": list(m.directions),
                    "task_count": m.task_count,
                }
                for m in state.store.list_manifests()
            ],
        }

    @app.get("/manifests/{manifest_id}")
    def get_manifest(manifest_id: str) -> dict:
        try:
            manifest = state.store.load_manifest(manifest_id)
        except StoreError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {"schema_version": API_SCHEMA_VERSION, "manifest": manifest.to_dict()}

    @app.get("/manifests/{manifest_id}/curves")
    def get_curve(manifest_id: str, pair: str, direction: str = INSERTION) -> dict:
        try:
            manifest = state.store.load_manifest(manifest_id)
            curve = curve_for_pair(manifest, state.store, pair, direction)
        except (StoreError, SwitchpointError) as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        summary = CrossingSummary.from_curve(curve)
        return {
            "schema_version": API_SCHEMA_VERSION,
            "pair": pair,
            "direction": direction,
            "kind": curve.kind,
            "scorer_id": curve.scorer_id,
            "rows": curve_to_rows(curve),
            "summary": summary.to_dict(),
            "monotonicity_violations": curve.monotonicity_violations(),
            "recommended_band": list(RECOMMENDED_PROBABILITY_BAND),
        }

    @app.get("/manifests/{manifest_id}/summary")
    def get_summary(manifest_id: str) -> dict:
        try:
            manifest = state.store.load_manifest(manifest_id)
        except StoreError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        records = canonical_records(state.store, manifest_id)
        groups: dict[tuple[str, str], list] = {}
        for record in records:
            groups.setdefault((record.pair_key, record.direction), []).append(record)
        summaries = []
        crossing: dict[str, list[CrossingSummary]] = {}
        for (pair_key, direction), _ in sorted(groups.items()):
            curve = curve_for_pair(manifest, state.store, pair_key, direction)
            summary = CrossingSummary.from_curve(curve)
            crossing.setdefault(direction, []).append(summary)
            summaries.append(
                {
                    "pair": pair_key,
                    "direction": direction,
                    **summary.to_dict(),
                    "monotonicity_violations": curve.monotonicity_violations(),
                }
            )
        aggregates = {
            direction: {
                name: (stat.to_dict() if stat else None)
                for name, stat in aggregate(group).items()
            }
            for direction, group in sorted(crossing.items())
        }
        return {
            "schema_version": API_SCHEMA_VERSION,
            "manifest_id": manifest_id,
            "pairs": summaries,
            "aggregates": aggregates,
        }

    @app.post("/edits")
    def post_edit(body: EditRequest) -> dict:
        try:
            manifest = _manifest_for_pair(state, body.pair, body.manifest_id)
            curve = curve_for_pair(manifest, state.store, body.pair, body.direction)
            step_k = edit_at_probability(curve, body.probability)
        except (StoreError, SwitchpointError) as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        point = curve.points[step_k]
        proposal = {
            "schema_version": API_SCHEMA_VERSION,
            "manifest_id": manifest.manifest_id,
            "pair": body.pair,
            "probability": body.probability,
            "step_k": step_k,
            "tau": point.tau,
            "predicted_estimate": point.estimate,
        }
        if body.dry_run:
            return proposal
        edit_id = state.enqueue(
            {
                "manifest_id": manifest.manifest_id,
                "pair": body.pair,
                "probability": body.probability,
                "seed": body.seed,
                "step_k": step_k,
            }
        )
        return {**proposal, "edit_id": edit_id, "status": "queued"}

    @app.get("/edits/{edit_id}")
    def get_edit(edit_id: str) -> dict:
        try:
            job = state.snapshot(edit_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown edit {edit_id!r}")
        return {"schema_version": API_SCHEMA_VERSION, **job}

    @app.get("/images/{ref}")
    def get_image(ref: str) -> FileResponse:
        try:
            path = state.store.image_path(ref)
        except StoreError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return FileResponse(path, media_type="image/png")

    return app
