"""Experiment manifests: validated, frozen, content-addressed run plans.

A manifest pins everything a sweep depends on: taxonomy version and hash,
backend and scorer configuration, grid size, seed policy, and scope. Its id
is the hash of that content, so re-planning an identical draft yields the
identical id and identical downstream artifact addresses.
"""
from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Mapping

from .config import build_backend, build_scorer
from .errors import ManifestError
from .hashing import content_address
from .intervene import DELETION, INSERTION
from .taxonomy import PromptPair, Taxonomy, build_pair, enumerate_pairs

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ExperimentManifest:
    manifest_id: str
    taxonomy_version: str
    taxonomy_hash: str
    backend_config: dict
    backend_id: str
    scorer_config: dict
    scorer_id: str
    grid_steps: int
    seed_count: int
    candidate_factor: int
    directions: tuple[str, ...]
    use_variants: bool
    pair_keys: tuple[str, ...]
    guidance_scale: float
    created_at: str
    status: str = "planned"
    scope: dict | None = None

    @property
    def task_count(self) -> int:
        return len(self.pair_keys) * len(self.directions) * self.seed_count * (self.grid_steps + 1)

    def content(self) -> dict:
        """The identity-bearing fields; created_at and status excluded."""
        return {
            "schema_version": SCHEMA_VERSION,
            "taxonomy_version": self.taxonomy_version,
            "taxonomy_hash": self.taxonomy_hash,
            "backend": self.backend_config,
            "scorer": self.scorer_config,
            "grid_T": self.grid_steps,
            "seed_count": self.seed_count,
            "candidate_factor": self.candidate_factor,
            "directions": list(self.directions),
            "use_variants": self.use_variants,
            "pairs": list(self.pair_keys),
            "guidance_scale": self.guidance_scale,
        }

    def to_dict(self) -> dict:
        doc = self.content()
        doc.update(
            {
                "id": self.manifest_id,
                "backend_id": self.backend_id,
                "scorer_id": self.scorer_id,
                "created_at": self.created_at,
                "status": self.status,
                "scope": self.scope,
                "task_count": self.task_count,
            }
        )
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ExperimentManifest":
        return cls(
            manifest_id=doc["id"],
            taxonomy_version=doc["taxonomy_version"],
            taxonomy_hash=doc["taxonomy_hash"],
            backend_config=dict(doc["backend"]),
            backend_id=doc["backend_id"],
            scorer_config=dict(doc["scorer"]),
            scorer_id=doc["scorer_id"],
            grid_steps=doc["grid_T"],
            seed_count=doc["seed_count"],
            candidate_factor=doc["candidate_factor"],
            directions=tuple(doc["directions"]),
            use_variants=doc["use_variants"],
            pair_keys=tuple(doc["pairs"]),
            guidance_scale=doc["guidance_scale"],
            created_at=doc["created_at"],
            status=doc.get("status", "planned"),
            scope=doc.get("scope"),
        )


def resolve_pairs(taxonomy: Taxonomy, scope: Mapping | None) -> list[PromptPair]:
    scope = scope or {}
    pairs = enumerate_pairs(
        taxonomy,
        category=scope.get("category"),
        subcategory=scope.get("subcategory"),
        concept=scope.get("concept"),
        context=scope.get("context"),
    )
    if not scope.get("variants"):
        return pairs
    expanded: list[PromptPair] = []
    for pair in pairs:
        ctx = pair.concept.context_named(pair.context)
        for idx in range(len(ctx.phrasings)):
            expanded.append(build_pair(pair.concept, ctx, idx))
    return expanded


def plan_experiment(draft: Mapping, taxonomy: Taxonomy) -> ExperimentManifest:
    """Validate a draft against the taxonomy and freeze it into a manifest."""
    backend_config = draft.get("backend")
    scorer_config = draft.get("scorer")
    if not isinstance(backend_config, Mapping) or not isinstance(scorer_config, Mapping):
        raise ManifestError("draft must carry 'backend' and 'scorer' config objects")
    try:
        backend = build_backend(backend_config)
        scorer = build_scorer(scorer_config, backend)
    except (KeyError, ValueError) as exc:
        raise ManifestError(f"unresolvable stack config: {exc}") from exc

    seeds = draft.get("seeds", {})
    seed_count = int(seeds.get("count", 0))
    if seed_count < 1:
        raise ManifestError("seed policy needs count >= 1")
    candidate_factor = int(seeds.get("candidate_factor", 3))
    if candidate_factor < 1:
        raise ManifestError("candidate factor must be >= 1")

    scope = dict(draft.get("scope", {}))
    directions = tuple(scope.get("directions", [INSERTION]))
    for direction in directions:
        if direction not in (INSERTION, DELETION):
            raise ManifestError(f"unknown direction {direction!r}")
    if not directions:
        raise ManifestError("scope needs at least one direction")

    try:
        pairs = resolve_pairs(taxonomy, scope)
    except KeyError as exc:
        raise ManifestError(f"scope does not resolve: {exc}") from exc
    if not pairs:
        raise ManifestError("scope matches no prompt pairs")

    manifest = ExperimentManifest(
        manifest_id="",
        taxonomy_version=taxonomy.version,
        taxonomy_hash=taxonomy.document_hash,
        backend_config=dict(backend_config),
        backend_id=backend.backend_id,
        scorer_config=dict(scorer_config),
        scorer_id=scorer.scorer_id,
        grid_steps=backend.grid.steps,
        seed_count=seed_count,
        candidate_factor=candidate_factor,
        directions=directions,
        use_variants=bool(scope.get("variants", False)),
        pair_keys=tuple(p.key for p in pairs),
        guidance_scale=float(draft.get("guidance_scale", 5.0)),
        created_at=datetime.now(timezone.utc).isoformat(),
        scope=scope,
    )
    object.__setattr__(manifest, "manifest_id", content_address(manifest.content()))
    return manifest
