"""Command-line interface for planning, running, and reporting experiments."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import build_backend, build_embeddings, build_scorer
from .editeval import edit_at_probability, evaluate_edit
from .intervene import INSERTION, DELETION, InterventionPlan, run_pci
from .manifest import plan_experiment
from .runner import canonical_records, curve_for_pair, execute, report
from .stats import (
    CrossingSummary,
    OutcomeMatrix,
    aggregate,
    bootstrap_seed_budget,
    curve_to_rows,
    write_curve_csv,
)
from .store import ResultsStore
from .taxonomy import Taxonomy, load_taxonomy, pair_from_key
from .trajectory import build_grid

DEFAULT_TAXONOMY = Path(__file__).parent / "data" / "taxonomy.json"


def _load_json(path: str) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _taxonomy(args: argparse.Namespace) -> Taxonomy:
    return load_taxonomy(Path(args.taxonomy))


def _store(args: argparse.Namespace) -> ResultsStore:
    return ResultsStore(args.store)


def cmd_plan(args: argparse.Namespace) -> int:
    draft = _load_json(args.draft)
    if args.config:
        stack = _load_json(args.config)
        draft.setdefault("backend", stack.get("backend"))
        draft.setdefault("scorer", stack.get("scorer"))
    manifest = plan_experiment(draft, _taxonomy(args))
    _store(args).save_manifest(manifest)
    _emit({"manifest_id": manifest.manifest_id, "task_count": manifest.task_count,
           "pairs": len(manifest.pair_keys), "directions": list(manifest.directions)})
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    store = _store(args)
    manifest = store.load_manifest(args.manifest)
    summary = execute(
        manifest, store, _taxonomy(args),
        worker_count=args.workers, task_limit=args.task_limit,
    )
    _emit(summary)
    return 0


def _curve_command(args: argparse.Namespace, direction: str) -> int:
    store = _store(args)
    manifest = store.load_manifest(args.manifest)
    curve = curve_for_pair(manifest, store, args.pair, direction)
    if args.out:
        write_curve_csv(curve, args.out)
    summary = CrossingSummary.from_curve(curve)
    _emit({
        "pair": args.pair,
        "direction": direction,
        "kind": curve.kind,
        "summary": summary.to_dict(),
        "monotonicity_violations": curve.monotonicity_violations(),
        "rows": None if args.out else curve_to_rows(curve),
        "out": args.out,
    })
    return 0


def cmd_curve(args: argparse.Namespace) -> int:
    return _curve_command(args, args.direction)


def cmd_cds(args: argparse.Namespace) -> int:
    return _curve_command(args, DELETION)


def cmd_stats(args: argparse.Namespace) -> int:
    store = _store(args)
    manifest = store.load_manifest(args.manifest)
    groups: dict[tuple[str, str], list] = {}
    for record in canonical_records(store, manifest.manifest_id):
        groups.setdefault((record.pair_key, record.direction), []).append(record)
    summaries = []
    crossing: dict[str, list[CrossingSummary]] = {}
    for (pair_key, direction), _ in sorted(groups.items()):
        curve = curve_for_pair(manifest, store, pair_key, direction)
        summary = CrossingSummary.from_curve(curve)
        crossing.setdefault(direction, []).append(summary)
        summaries.append({**summary.to_dict(), "direction": direction})
    aggregates = {
        direction: {
            name: (stat.to_dict() if stat else None)
            for name, stat in aggregate(group).items()
        }
        for direction, group in sorted(crossing.items())
    }
    _emit({"pairs": summaries, "aggregates": aggregates})
    return 0


def cmd_bootstrap(args: argparse.Namespace) -> int:
    store = _store(args)
    manifest = store.load_manifest(args.manifest)
    records = [
        r for r in canonical_records(store, manifest.manifest_id)
        if r.pair_key == args.pair and r.direction == args.direction
    ]
    matrix = OutcomeMatrix.from_records(records, build_grid(manifest.grid_steps))
    report_ = bootstrap_seed_budget(
        matrix,
        k_values=[int(k) for k in args.k.split(",")],
        resamples=args.resamples,
        rng_seed=args.rng_seed,
    )
    _emit(report_.to_dict())
    return 0


def cmd_edit(args: argparse.Namespace) -> int:
    store = _store(args)
    manifest = store.load_manifest(args.manifest)
    taxonomy = _taxonomy(args)
    pair = pair_from_key(taxonomy, args.pair)
    curve = curve_for_pair(manifest, store, args.pair, INSERTION)
    step_k = edit_at_probability(curve, args.probability)
    grid = build_grid(manifest.grid_steps)
    backend = build_backend(manifest.backend_config)
    scorer = build_scorer(manifest.scorer_config, backend)
    pool = store.load_pool(manifest.manifest_id, pair.key)
    negative = bool(pool and pool.negative_guidance_used)

    images = {}
    base_record = run_pci(
        InterventionPlan.insertion(pair, grid, grid.steps, args.seed,
                                   manifest.guidance_scale, negative),
        backend, scorer, image_sink=lambda im: images.__setitem__("base", im),
    )
    edit_record = run_pci(
        InterventionPlan.insertion(pair, grid, step_k, args.seed,
                                   manifest.guidance_scale, negative),
        backend, scorer, image_sink=lambda im: images.__setitem__("edited", im),
    )
    store.save_image(images["base"])
    store.save_image(images["edited"])
    edit_report = evaluate_edit(
        images["base"], images["edited"], pair.base_prompt, pair.concept_prompt,
        build_embeddings(None), tau=grid.tau_of(step_k), curve_ref=args.pair,
    )
    _emit({
        "pair": args.pair,
        "probability": args.probability,
        "step_k": step_k,
        "tau": grid.tau_of(step_k),
        "base_image_ref": base_record.image_ref,
        "image_ref": edit_record.image_ref,
        "outcomes": dict(edit_record.outcomes),
        "report": edit_report.to_dict(),
    })
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    store = _store(args)
    manifest = store.load_manifest(args.manifest)
    hashes = report(manifest, store, _taxonomy(args))
    _emit({"manifest_id": manifest.manifest_id, "artifacts": hashes})
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.store, taxonomy_path=args.taxonomy)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="switchpoint")
    parser.add_argument("--taxonomy", default=str(DEFAULT_TAXONOMY), help="taxonomy document path")
    parser.add_argument("--store", default="./store", help="results store directory")
    parser.add_argument("--config", default=None, help="stack config JSON (backend/scorer defaults)")
    parser.add_argument("--workers", type=int, default=1, help="sweep worker count")
    parser.add_argument("--rng-seed", type=int, default=0, help="seed for resampling analyses")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="validate a draft and freeze a manifest")
    p.add_argument("--draft", required=True)
    p.set_defaults(fn=cmd_plan)

    p = sub.add_parser("run", help="execute pending tasks of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--task-limit", type=int, default=None)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("curve", help="export one pair's success curve")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pair", required=True)
    p.add_argument("--direction", default=INSERTION, choices=[INSERTION, DELETION])
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_curve)

    p = sub.add_parser("stats", help="crossing summaries and aggregates")
    p.add_argument("--manifest", required=True)
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("bootstrap", help="seed-budget bootstrap analysis")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pair", required=True)
    p.add_argument("--direction", default=INSERTION, choices=[INSERTION, DELETION])
    p.add_argument("--k", required=True, help="comma-separated subsample sizes")
    p.add_argument("--resamples", type=int, default=100)
    p.set_defaults(fn=cmd_bootstrap)

    p = sub.add_parser("cds", help="export one pair's deletion persistence curve")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pair", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_cds)

    p = sub.add_parser("edit", help="run a curve-guided edit at a probability")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pair", required=True)
    p.add_argument("--probability", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(fn=cmd_edit)

    p = sub.add_parser("report", help="derive the full export bundle")
    p.add_argument("--manifest", required=True)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("serve", help="serve the HTTP API over a store")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
