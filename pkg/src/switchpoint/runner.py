"""Sweep execution and report derivation over a results store.

Execution is resumable and idempotent: every task is content-fingerprinted,
completed fingerprints are skipped on re-run, and derived artifacts are
computed from the canonicalized record set, so worker count, completion
order, and crash/resume history never change the derived bytes.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

from .config import build_backend, build_scorer
from .editeval import REFERENCE_EDITING_ROWS, RECOMMENDED_PROBABILITY_BAND, representative_curve
from .errors import StoreError
from .hashing import canonical_json
from .intervene import (
    DELETION,
    INSERTION,
    InterventionPlan,
    RunRecord,
    build_sweep_plans,
    run_pci,
)
from .manifest import ExperimentManifest
from .seedcontrol import SeedPool, candidate_seeds, filter_seeds, resample_with_negative_guidance
from .stats import (
    CisCurve,
    CrossingSummary,
    OutcomeMatrix,
    aggregate,
    curve_to_rows,
    estimate_curve,
)
from .store import ResultsStore, pair_slug
from .taxonomy import PromptPair, Taxonomy, pair_from_key, strip_variant
from .trajectory import build_grid


def ensure_seed_pool(
    manifest: ExperimentManifest,
    pair: PromptPair,
    store: ResultsStore,
    backend,
    scorer,
) -> SeedPool:
    """Load the pair's pool, or build it (filter, then negative guidance)."""
    pool = store.load_pool(manifest.manifest_id, pair.key)
    if pool is not None:
        return pool
    budget = manifest.seed_count * manifest.candidate_factor
    salt = f"{manifest.manifest_id}:{pair.key}"
    pool = filter_seeds(
        pair,
        candidate_seeds(salt, budget),
        backend,
        scorer,
        target_count=manifest.seed_count,
        guidance_scale=manifest.guidance_scale,
    )
    if pool.short_of_target:
        fresh = pool.seeds_with_status("concept_present") + candidate_seeds(salt, budget, offset=budget)
        pool = resample_with_negative_guidance(pair, pool, fresh, backend, scorer)
    store.save_pool(manifest.manifest_id, pool)
    return pool


def plan_tasks(
    manifest: ExperimentManifest,
    taxonomy: Taxonomy,
    store: ResultsStore,
    backend,
    scorer,
) -> list[InterventionPlan]:
    grid = build_grid(manifest.grid_steps)
    plans: list[InterventionPlan] = []
    for pair_key in manifest.pair_keys:
        pair = pair_from_key(taxonomy, pair_key)
        pool = ensure_seed_pool(manifest, pair, store, backend, scorer)
        seeds = pool.valid_seeds()[: manifest.seed_count]
        for direction in manifest.directions:
            plans.extend(
                build_sweep_plans(
                    pair,
                    grid,
                    seeds,
                    direction,
                    guidance_scale=manifest.guidance_scale,
                    negative_seed_control=(
                        direction == INSERTION and pool.negative_guidance_used
                    ),
                )
            )
    return plans


def execute(
    manifest: ExperimentManifest,
    store: ResultsStore,
    taxonomy: Taxonomy,
    worker_count: int = 1,
    task_limit: int | None = None,
) -> dict:
    """Run every pending task of a manifest; per-task failures never abort.

    ``task_limit`` stops after that many new tasks (budgeted or interrupted
    runs); a later call resumes from the log.
    """
    backend = build_backend(manifest.backend_config)
    scorer = build_scorer(manifest.scorer_config, backend)
    plans = plan_tasks(manifest, taxonomy, store, backend, scorer)
    done = store.completed_fingerprints(manifest.manifest_id)
    pending = [p for p in plans if p.fingerprint() not in done]
    if task_limit is not None:
        pending = pending[:task_limit]

    def one(plan: InterventionPlan) -> RunRecord:
        try:
            record = run_pci(plan, backend, scorer, image_sink=store.save_image)
        except Exception as exc:
            record = RunRecord(
                fingerprint=plan.fingerprint(),
                pair_key=plan.pair_key,
                direction=plan.direction,
                seed=plan.seed,
                switch_k=plan.switch_k,
                tau=plan.tau_switch,
                error=str(exc),
            )
        store.append_record(manifest.manifest_id, record)
        return record

    if worker_count <= 1:
        executed = [one(p) for p in pending]
    else:
        with ThreadPoolExecutor(max_workers=worker_count) as pool_:
            executed = list(pool_.map(one, pending))

    failed = sum(1 for r in executed if r.failed)
    return {
        "planned": len(plans),
        "skipped": len(plans) - len(pending),
        "executed": len(executed),
        "failed": failed,
        "completed_total": len(store.completed_fingerprints(manifest.manifest_id)),
    }


def canonical_records(store: ResultsStore, manifest_id: str) -> list[RunRecord]:
    """Dedupe by fingerprint (success wins) and sort into canonical order."""
    by_fingerprint: dict[str, RunRecord] = {}
    for record in store.iter_records(manifest_id):
        existing = by_fingerprint.get(record.fingerprint)
        if existing is None or (existing.failed and not record.failed):
            by_fingerprint[record.fingerprint] = record
    records = list(by_fingerprint.values())
    records.sort(key=lambda r: (r.pair_key, r.direction, r.seed, r.switch_k))
    return records


def curve_for_pair(
    manifest: ExperimentManifest,
    store: ResultsStore,
    pair_key: str,
    direction: str = INSERTION,
    concept: str | None = None,
) -> CisCurve:
    grid = build_grid(manifest.grid_steps)
    records = [
        r
        for r in canonical_records(store, manifest.manifest_id)
        if r.pair_key == pair_key and r.direction == direction
    ]
    if not records:
        raise StoreError(f"no records for pair {pair_key!r} ({direction})")
    matrix = OutcomeMatrix.from_records(records, grid, concept=concept)
    return estimate_curve(matrix)


def _curve_payload(curve: CisCurve, completeness: dict) -> dict:
    summary = CrossingSummary.from_curve(curve)
    return {
        "pair": curve.pair_key,
        "direction": curve.direction,
        "kind": curve.kind,
        "scorer_id": curve.scorer_id,
        "rows": curve_to_rows(curve),
        "summary": summary.to_dict(),
        "monotonicity_violations": curve.monotonicity_violations(),
        "recommended_band": list(RECOMMENDED_PROBABILITY_BAND),
        "completeness": completeness,
    }


def _plot_payload(curve: CisCurve) -> dict:
    defined = curve.by_ascending_tau()
    return {
        "pair": curve.pair_key,
        "direction": curve.direction,
        "tau": [p.tau for p in defined],
        "estimate": [p.estimate for p in defined],
        "wilson_lo": [p.wilson_lo for p in defined],
        "wilson_hi": [p.wilson_hi for p in defined],
    }


def report(manifest: ExperimentManifest, store: ResultsStore, taxonomy: Taxonomy) -> dict[str, str]:
    """Derive the full export bundle; returns artifact name -> content hash.

    Emits per-pair curve tables and plot data, crossing summaries, per-
    subcategory aggregates, side-by-side prompt-variant bundles, and the
    published editing reference table. Pairs with incomplete sweeps are
    flagged, not dropped.
    """
    grid = build_grid(manifest.grid_steps)
    records = canonical_records(store, manifest.manifest_id)
    by_group: dict[tuple[str, str], list[RunRecord]] = {}
    for record in records:
        by_group.setdefault((record.pair_key, record.direction), []).append(record)

    hashes: dict[str, str] = {}
    summaries: dict[str, list[CrossingSummary]] = {}
    curves_by_canonical: dict[tuple[str, str], list[CisCurve]] = {}
    curves_by_subcategory: dict[tuple[str, str], list[CisCurve]] = {}
    pair_index: dict[str, dict] = {}

    expected_per_pair = manifest.seed_count * (manifest.grid_steps + 1)
    for (pair_key, direction), group in sorted(by_group.items()):
        matrix = OutcomeMatrix.from_records(group, grid)
        curve = estimate_curve(matrix)
        ok = sum(1 for r in group if not r.failed)
        completeness = {
            "expected": expected_per_pair,
            "completed": ok,
            "failed": len(group) - ok,
            "partial": ok < expected_per_pair,
        }
        slug = f"{pair_slug(pair_key)}__{direction}"
        csv_text = _rows_to_csv(curve_to_rows(curve))
        hashes[f"curves/{slug}.csv"] = store.write_derived(
            manifest.manifest_id, f"curves/{slug}.csv", csv_text.encode("utf-8")
        )
        hashes[f"plots/{slug}.json"] = store.write_derived(
            manifest.manifest_id,
            f"plots/{slug}.json",
            _json_bytes(_plot_payload(curve)),
        )
        hashes[f"summaries/{slug}.json"] = store.write_derived(
            manifest.manifest_id,
            f"summaries/{slug}.json",
            _json_bytes(_curve_payload(curve, completeness)),
        )
        pair_index[slug] = {"pair": pair_key, "direction": direction, "scorer_id": curve.scorer_id}

        canonical, _ = strip_variant(pair_key)
        parts = canonical.split("|")
        subcategory_key = "|".join(parts[:2]) + f"|{direction}"
        summaries.setdefault(subcategory_key, []).append(
            CrossingSummary.from_curve(curve)
        )
        curves_by_canonical.setdefault((canonical, direction), []).append(curve)
        curves_by_subcategory.setdefault(("|".join(parts[:2]), direction), []).append(curve)

    aggregates = {
        group_key: {name: (stat.to_dict() if stat else None) for name, stat in aggregate(group).items()}
        for group_key, group in sorted(summaries.items())
        if group
    }
    hashes["aggregates.json"] = store.write_derived(
        manifest.manifest_id, "aggregates.json", _json_bytes(aggregates)
    )

    for (canonical, direction), curves in sorted(curves_by_canonical.items()):
        if len(curves) < 2:
            continue
        bundle = {
            "pair": canonical,
            "direction": direction,
            "series": [_plot_payload(c) | {"variant": strip_variant(c.pair_key)[1]} for c in curves],
            "mean": _plot_payload(representative_curve(curves)),
        }
        name = f"variants/{pair_slug(canonical)}__{direction}.json"
        hashes[name] = store.write_derived(manifest.manifest_id, name, _json_bytes(bundle))

    # overall trend + individual-curve overlay per subcategory
    for (subcategory, direction), curves in sorted(curves_by_subcategory.items()):
        if len(curves) < 2:
            continue
        overlay = {
            "subcategory": subcategory,
            "direction": direction,
            "series": [_plot_payload(c) for c in curves],
            "mean": _plot_payload(representative_curve(curves)),
        }
        name = f"overlays/{pair_slug(subcategory)}__{direction}.json"
        hashes[name] = store.write_derived(manifest.manifest_id, name, _json_bytes(overlay))

    reference = {
        "note": "reference rows are published comparison numbers, not reproduced by this toolkit",
        "rows": [row.to_dict() for row in REFERENCE_EDITING_ROWS],
    }
    hashes["editing_reference.json"] = store.write_derived(
        manifest.manifest_id, "editing_reference.json", _json_bytes(reference)
    )
    hashes["pair_index.json"] = store.write_derived(
        manifest.manifest_id, "pair_index.json", _json_bytes(pair_index)
    )
    store.write_derived_index(manifest.manifest_id, hashes)
    return hashes


def _json_bytes(payload: dict) -> bytes:
    return (canonical_json(payload) + "\n").encode("utf-8")


def _rows_to_csv(rows: Sequence[dict[str, str]]) -> str:
    from .stats import CURVE_COLUMNS

    lines = [",".join(CURVE_COLUMNS)]
    for row in rows:
        lines.append(",".join(row[col] for col in CURVE_COLUMNS))
    return "\n".join(lines) + "\n"
