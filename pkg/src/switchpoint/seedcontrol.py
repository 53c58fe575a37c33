"""Concept-controlled seed resampling.

Insertion probing is only meaningful when the base generation is neutral
with respect to the target concept, so candidate seeds are screened first:
generate under the base prompt alone, score, and discard seeds that already
show the concept. If too few survive, a second pass regenerates with the
concept as a negative prompt (inverted guidance) and re-screens. The order
is fixed: plain filtering first, negative guidance as the fallback.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .backend import Condition, GenerativeBackend
from .errors import SeedPoolError
from .hashing import stable_u64
from .score import Scorer, assess
from .taxonomy import PromptPair, render_question

VALID = "valid"
CONCEPT_PRESENT = "concept_present"
FAILED = "failed"


def candidate_seeds(experiment_id: str, count: int, offset: int = 0) -> list[int]:
    """Deterministic counter-based candidate stream keyed by experiment id."""
    return [stable_u64("seed-candidate", experiment_id, i) for i in range(offset, offset + count)]


@dataclass(frozen=True)
class SeedPool:
    """Screened candidate seeds for one prompt pair.

    ``statuses`` preserves examination order; a seed appears at most once,
    so the valid and concept-present sets are disjoint by construction.
    """

    pair_key: str
    concept: str
    target_count: int
    statuses: tuple[tuple[int, str], ...]
    negative_guidance_used: bool = False
    guidance_scale: float = 5.0
    backend_id: str = ""
    scorer_id: str = ""

    def valid_seeds(self) -> list[int]:
        return [seed for seed, status in self.statuses if status == VALID]

    def seeds_with_status(self, status: str) -> list[int]:
        return [seed for seed, st in self.statuses if st == status]

    @property
    def attempted(self) -> int:
        return len(self.statuses)

    @property
    def short_of_target(self) -> bool:
        return len(self.valid_seeds()) < self.target_count

    def to_dict(self) -> dict:
        return {
            "pair": self.pair_key,
            "concept": self.concept,
            "target_count": self.target_count,
            "statuses": [[seed, status] for seed, status in self.statuses],
            "negative_guidance_used": self.negative_guidance_used,
            "guidance_scale": self.guidance_scale,
            "backend_id": self.backend_id,
            "scorer_id": self.scorer_id,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SeedPool":
        return cls(
            pair_key=data["pair"],
            concept=data["concept"],
            target_count=data["target_count"],
            statuses=tuple((int(s), st) for s, st in data["statuses"]),
            negative_guidance_used=data["negative_guidance_used"],
            guidance_scale=data["guidance_scale"],
            backend_id=data.get("backend_id", ""),
            scorer_id=data.get("scorer_id", ""),
        )


def base_generation_shows_concept(
    pair: PromptPair,
    seed: int,
    backend: GenerativeBackend,
    scorer: Scorer,
    guidance_scale: float = 5.0,
    negative_guidance: bool = False,
) -> bool:
    """Generate under the base prompt only and score the target question."""
    condition = Condition(
        prompt=pair.base_prompt,
        negative_prompt=pair.concept.concept if negative_guidance else None,
        guidance_scale=guidance_scale,
    )
    session = backend.session()
    state = session.init_state(seed)
    state = session.denoise_range(state, condition, 0, backend.grid.steps)
    image = session.decode(state)
    return assess(image, render_question(pair.concept), scorer).answer == "yes"


def filter_seeds(
    pair: PromptPair,
    candidates: Sequence[int],
    backend: GenerativeBackend,
    scorer: Scorer,
    target_count: int,
    guidance_scale: float = 5.0,
) -> SeedPool:
    """Screen candidates in order, stopping once enough valid seeds are found.

    Backend or scorer failures mark a seed failed, never valid.
    """
    if target_count < 1:
        raise ValueError("target count must be >= 1")
    statuses: list[tuple[int, str]] = []
    valid = 0
    for seed in candidates:
        if valid >= target_count:
            break
        try:
            present = base_generation_shows_concept(
                pair, seed, backend, scorer, guidance_scale=guidance_scale
            )
        except Exception:
            statuses.append((seed, FAILED))
            continue
        if present:
            statuses.append((seed, CONCEPT_PRESENT))
        else:
            statuses.append((seed, VALID))
            valid += 1
    return SeedPool(
        pair_key=pair.key,
        concept=pair.concept.concept,
        target_count=target_count,
        statuses=tuple(statuses),
        negative_guidance_used=False,
        guidance_scale=guidance_scale,
        backend_id=backend.backend_id,
        scorer_id=scorer.scorer_id,
    )


def resample_with_negative_guidance(
    pair: PromptPair,
    pool: SeedPool,
    candidates: Sequence[int],
    backend: GenerativeBackend,
    scorer: Scorer,
    guidance_scale: float | None = None,
) -> SeedPool:
    """Second-stage screening with the concept as a negative prompt.

    Seeds already valid in ``pool`` are kept; the given candidates (typically
    the rejected seeds plus fresh ones) are regenerated under inverted
    guidance and re-scored. Raises :class:`SeedPoolError` if the pool still
    falls short, reporting how many seeds were attempted in total.
    """
    if not pool.short_of_target:
        raise ValueError("seed pool already meets its target; nothing to resample")
    scale = pool.guidance_scale if guidance_scale is None else guidance_scale
    statuses: list[tuple[int, str]] = [(s, st) for s, st in pool.statuses if st == VALID]
    valid = len(statuses)
    already = {seed for seed, _ in statuses}
    for seed in candidates:
        if valid >= pool.target_count:
            break
        if seed in already:
            continue
        already.add(seed)
        try:
            present = base_generation_shows_concept(
                pair, seed, backend, scorer,
                guidance_scale=scale, negative_guidance=True,
            )
        except Exception:
            statuses.append((seed, FAILED))
            continue
        if present:
            statuses.append((seed, CONCEPT_PRESENT))
        else:
            statuses.append((seed, VALID))
            valid += 1
    result = SeedPool(
        pair_key=pair.key,
        concept=pair.concept.concept,
        target_count=pool.target_count,
        statuses=tuple(statuses),
        negative_guidance_used=True,
        guidance_scale=scale,
        backend_id=backend.backend_id,
        scorer_id=scorer.scorer_id,
    )
    if result.short_of_target:
        attempted = pool.attempted + len(candidates)
        raise SeedPoolError(
            f"still short of target after negative guidance: "
            f"{valid}/{pool.target_count} valid over {attempted} attempted seeds",
            attempted=attempted,
            valid=valid,
            target=pool.target_count,
        )
    return result


def verify_pool(
    pool: SeedPool,
    pair: PromptPair,
    backend: GenerativeBackend,
    scorer: Scorer,
) -> list[int]:
    """Re-score every valid seed; returns the seeds that now show the concept.

    Under an unchanged (backend, scorer, base prompt) configuration this must
    come back empty; anything else is a regression.
    """
    offenders = []
    for seed in pool.valid_seeds():
        if base_generation_shows_concept(
            pair, seed, backend, scorer,
            guidance_scale=pool.guidance_scale,
            negative_guidance=pool.negative_guidance_used,
        ):
            offenders.append(seed)
    return offenders


def presence_report(outcomes: Mapping[str, Sequence[bool]]) -> list[dict]:
    """Fraction of base generations showing each concept, sorted descending."""
    rows = []
    for concept, flags in outcomes.items():
        flags = list(flags)
        if not flags:
            continue
        rows.append(
            {
                "concept": concept,
                "fraction": sum(1 for f in flags if f) / len(flags),
                "n": len(flags),
            }
        )
    rows.sort(key=lambda r: (-r["fraction"], r["concept"]))
    return rows


def survey_base_presence(
    pairs: Sequence[PromptPair],
    seeds: Sequence[int],
    backend: GenerativeBackend,
    scorer: Scorer,
    guidance_scale: float = 5.0,
) -> list[dict]:
    """Per-concept base-prompt presence fractions over a seed set."""
    outcomes: dict[str, list[bool]] = {}
    for pair in pairs:
        flags = [
            base_generation_shows_concept(pair, seed, backend, scorer, guidance_scale)
            for seed in seeds
        ]
        outcomes[pair.concept.concept] = flags
    return presence_report(outcomes)
