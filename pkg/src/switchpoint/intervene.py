"""Prompt-switch interventions: insertion runs, deletion runs, and sweeps.

An insertion run denoises under the base prompt up to the switch index and
under the concept prompt afterwards; a deletion run swaps the two roles.
Sweeping the switch index over the whole grid for many seeds produces the
binary outcome matrices the statistics module turns into success curves.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .backend import Condition, GenerativeBackend
from .errors import ScorerError
from .hashing import content_address
from .score import Scorer, assess
from .taxonomy import MultiPromptPair, PromptPair, render_question
from .trajectory import TimestepGrid

INSERTION = "insertion"
DELETION = "deletion"

Pairish = PromptPair | MultiPromptPair


def _targets(pair: Pairish) -> tuple[tuple[str, str], ...]:
    """(concept surface, rendered question) per scoring target."""
    if isinstance(pair, MultiPromptPair):
        return tuple((t.concept, render_question(t)) for t in pair.targets)
    return ((pair.concept.concept, render_question(pair.concept)),)


@dataclass(frozen=True)
class InterventionPlan:
    """One prompt-switch experiment: who switches to what, when, on which seed."""

    direction: str
    pair: Pairish
    grid: TimestepGrid
    switch_k: int
    seed: int
    phase_one: Condition
    phase_two: Condition

    def __post_init__(self):
        if self.direction not in (INSERTION, DELETION):
            raise ValueError(f"unknown direction {self.direction!r}")
        if not 0 <= self.switch_k <= self.grid.steps:
            raise ValueError(f"switch index {self.switch_k} outside 0..{self.grid.steps}")

    @classmethod
    def insertion(
        cls,
        pair: Pairish,
        grid: TimestepGrid,
        switch_k: int,
        seed: int,
        guidance_scale: float = 5.0,
        negative_seed_control: bool = False,
    ) -> "InterventionPlan":
        """Base prompt first, concept prompt from the switch onward.

        When the seed pool was built with negative guidance, phase one keeps
        the concept as negative prompt; phase two always drops it, since the
        switched-to prompt now asks for that concept.
        """
        negative = None
        if negative_seed_control:
            if isinstance(pair, MultiPromptPair):
                negative = ", ".join(t.concept for t in pair.targets)
            else:
                negative = pair.concept.concept
        return cls(
            direction=INSERTION,
            pair=pair,
            grid=grid,
            switch_k=switch_k,
            seed=seed,
            phase_one=Condition(pair.base_prompt, negative, guidance_scale),
            phase_two=Condition(pair.concept_prompt, None, guidance_scale),
        )

    @classmethod
    def deletion(
        cls,
        pair: Pairish,
        grid: TimestepGrid,
        switch_k: int,
        seed: int,
        guidance_scale: float = 5.0,
    ) -> "InterventionPlan":
        """Concept prompt first, base prompt from the switch onward."""
        return cls(
            direction=DELETION,
            pair=pair,
            grid=grid,
            switch_k=switch_k,
            seed=seed,
            phase_one=Condition(pair.concept_prompt, None, guidance_scale),
            phase_two=Condition(pair.base_prompt, None, guidance_scale),
        )

    @property
    def tau_switch(self) -> float:
        return self.grid.tau_of(self.switch_k)

    @property
    def pair_key(self) -> str:
        return self.pair.key

    def fingerprint(self) -> str:
        return content_address(
            {
                "direction": self.direction,
                "pair": self.pair_key,
                "grid_T": self.grid.steps,
                "switch_k": self.switch_k,
                "seed": self.seed,
                "phase_one": self.phase_one.to_dict(),
                "phase_two": self.phase_two.to_dict(),
            }
        )


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one intervention run; ``error`` marks a failed cell."""

    fingerprint: str
    pair_key: str
    direction: str
    seed: int
    switch_k: int
    tau: float
    outcomes: Mapping[str, str] = field(default_factory=dict)
    image_ref: str = ""
    scorer_id: str = ""
    wall_ms: float = 0.0
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "pair": self.pair_key,
            "direction": self.direction,
            "seed": self.seed,
            "switch_k": self.switch_k,
            "tau": self.tau,
            "outcomes": dict(sorted(self.outcomes.items())),
            "image_ref": self.image_ref,
            "scorer_id": self.scorer_id,
            "wall_ms": self.wall_ms,
            "error": self.error,
        }


def run_pci(
    plan: InterventionPlan,
    backend: GenerativeBackend,
    scorer: Scorer,
    image_sink=None,
) -> RunRecord:
    """Execute one prompt-switch trajectory and score every target concept.

    Callers are responsible for using seeds that passed seed filtering when
    the plan is an insertion; the engine does not re-check the pool here.
    ``image_sink`` receives the decoded image, e.g. to persist it.
    """
    started = time.perf_counter()
    session = backend.session()
    state = session.init_state(plan.seed)
    state = session.denoise_range(state, plan.phase_one, 0, plan.switch_k)
    state = session.denoise_range(state, plan.phase_two, plan.switch_k, plan.grid.steps)
    image = session.decode(state)
    if image_sink is not None:
        image_sink(image)

    outcomes: dict[str, str] = {}
    for concept, question in _targets(plan.pair):
        try:
            outcomes[concept] = assess(image, question, scorer).answer
        except ScorerError as exc:
            raise ScorerError(f"scoring {question!r} failed: {exc}", retryable=exc.retryable) from exc
    return RunRecord(
        fingerprint=plan.fingerprint(),
        pair_key=plan.pair_key,
        direction=plan.direction,
        seed=plan.seed,
        switch_k=plan.switch_k,
        tau=plan.tau_switch,
        outcomes=outcomes,
        image_ref=image.ref,
        scorer_id=scorer.scorer_id,
        wall_ms=(time.perf_counter() - started) * 1e3,
    )


def run_cds(plan: InterventionPlan, backend: GenerativeBackend, scorer: Scorer) -> RunRecord:
    """Deletion run: a yes outcome means the concept persisted (deletion failed)."""
    if plan.direction != DELETION:
        raise ValueError("run_cds requires a deletion-direction plan")
    return run_pci(plan, backend, scorer)


def run_multi(plan: InterventionPlan, backend: GenerativeBackend, scorer: Scorer) -> RunRecord:
    """Multi-concept switch; success stays concept-specific, one outcome per target."""
    if not isinstance(plan.pair, MultiPromptPair):
        raise ValueError("run_multi requires a plan over a MultiPromptPair")
    return run_pci(plan, backend, scorer)


def build_sweep_plans(
    pair: Pairish,
    grid: TimestepGrid,
    seeds: Sequence[int],
    direction: str = INSERTION,
    guidance_scale: float = 5.0,
    negative_seed_control: bool = False,
) -> list[InterventionPlan]:
    """Every (seed, switch index) cell of a sweep, in deterministic order."""
    if not seeds:
        raise ValueError("sweep needs at least one seed")
    plans = []
    for seed in seeds:
        for switch_k in range(grid.steps + 1):
            if direction == INSERTION:
                plan = InterventionPlan.insertion(
                    pair, grid, switch_k, seed,
                    guidance_scale=guidance_scale,
                    negative_seed_control=negative_seed_control,
                )
            else:
                plan = InterventionPlan.deletion(pair, grid, switch_k, seed, guidance_scale)
            plans.append(plan)
    return plans


def sweep(
    pair: Pairish,
    grid: TimestepGrid,
    seeds: Sequence[int],
    direction: str,
    backend: GenerativeBackend,
    scorer: Scorer,
    guidance_scale: float = 5.0,
    negative_seed_control: bool = False,
    worker_count: int = 1,
) -> list[RunRecord]:
    """Run all |seeds| x (T+1) cells; failures are flagged, never fatal.

    The result list is sorted by (seed, switch index), so it is identical
    regardless of worker count or completion order.
    """
    plans = build_sweep_plans(
        pair, grid, seeds, direction,
        guidance_scale=guidance_scale,
        negative_seed_control=negative_seed_control,
    )

    def one(plan: InterventionPlan) -> RunRecord:
        try:
            return run_pci(plan, backend, scorer)
        except Exception as exc:  # failed cell: flag and continue
            return RunRecord(
                fingerprint=plan.fingerprint(),
                pair_key=plan.pair_key,
                direction=plan.direction,
                seed=plan.seed,
                switch_k=plan.switch_k,
                tau=plan.tau_switch,
                error=str(exc),
            )

    if worker_count <= 1:
        records = [one(plan) for plan in plans]
    else:
        with ThreadPoolExecutor(max_workers=worker_count) as pool:
            records = list(pool.map(one, plans))
    records.sort(key=lambda r: (r.seed, r.switch_k))
    return records


def sweep_completeness(records: Sequence[RunRecord]) -> dict:
    """Completed/failed counts for a sweep's record set."""
    failed = sum(1 for r in records if r.failed)
    return {"total": len(records), "completed": len(records) - failed, "failed": failed}
