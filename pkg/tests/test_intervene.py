from __future__ import annotations

import pytest

from switchpoint.backend import Condition, SyntheticBackend, SyntheticBackendSpec
from switchpoint.errors import ScorerError
from switchpoint.intervene import (
    DELETION,
    INSERTION,
    InterventionPlan,
    run_cds,
    run_multi,
    run_pci,
    sweep,
    sweep_completeness,
)
from switchpoint.score import MockScorer
from switchpoint.taxonomy import build_pair, combine_pairs
from switchpoint.stats import OutcomeMatrix, estimate_curve


@pytest.fixture
def old_pair(taxonomy):
    entry = taxonomy.entry("Demographics", "Age group", "old")
    return build_pair(entry, entry.context_named("city park"))


def test_plan_validates_switch_index(old_pair, grid50):
    with pytest.raises(ValueError):
        InterventionPlan.insertion(old_pair, grid50, 51, seed=0)


def test_insertion_at_T_is_pure_base(old_pair, oracle_backend, mock_scorer, grid50):
    plan = InterventionPlan.insertion(old_pair, grid50, grid50.steps, seed=5)
    record = run_pci(plan, oracle_backend, mock_scorer)
    assert record.outcomes == {"old": "no"}

    session = oracle_backend.session()
    state = session.init_state(5)
    state = session.denoise_range(state, Condition(old_pair.base_prompt), 0, 50)
    assert record.image_ref == session.decode(state).ref


def test_insertion_at_zero_is_pure_concept(old_pair, oracle_backend, mock_scorer, grid50):
    plan = InterventionPlan.insertion(old_pair, grid50, 0, seed=5)
    record = run_pci(plan, oracle_backend, mock_scorer)
    assert record.outcomes == {"old": "yes"}

    session = oracle_backend.session()
    state = session.init_state(5)
    state = session.denoise_range(state, Condition(old_pair.concept_prompt), 0, 50)
    assert record.image_ref == session.decode(state).ref


def test_insertion_around_lock_boundary(old_pair, oracle_backend, mock_scorer, grid50):
    at = {grid50.tau_of(k): k for k in range(grid50.steps + 1)}
    yes = run_pci(InterventionPlan.insertion(old_pair, grid50, at[0.62], 1), oracle_backend, mock_scorer)
    no = run_pci(InterventionPlan.insertion(old_pair, grid50, at[0.58], 1), oracle_backend, mock_scorer)
    assert yes.outcomes["old"] == "yes"
    assert no.outcomes["old"] == "no"


def test_negative_seed_control_dropped_after_switch(old_pair, grid50):
    plan = InterventionPlan.insertion(old_pair, grid50, 10, 0, negative_seed_control=True)
    assert plan.phase_one.negative_prompt == "old"
    assert plan.phase_two.negative_prompt is None


def test_cds_boundaries(old_pair, oracle_backend, mock_scorer, grid50):
    immediate = run_cds(InterventionPlan.deletion(old_pair, grid50, 0, 3), oracle_backend, mock_scorer)
    assert immediate.outcomes["old"] == "no"  # deletion succeeded
    never = run_cds(InterventionPlan.deletion(old_pair, grid50, grid50.steps, 3), oracle_backend, mock_scorer)
    assert never.outcomes["old"] == "yes"  # concept persisted


def test_cds_requires_deletion_plan(old_pair, oracle_backend, mock_scorer, grid50):
    with pytest.raises(ValueError):
        run_cds(InterventionPlan.insertion(old_pair, grid50, 0, 0), oracle_backend, mock_scorer)


def test_deletion_is_exact_dual_of_insertion(old_pair, oracle_backend, mock_scorer, grid50):
    for switch_k in range(0, grid50.steps + 1, 5):
        ins = run_pci(InterventionPlan.insertion(old_pair, grid50, switch_k, 2), oracle_backend, mock_scorer)
        dele = run_cds(InterventionPlan.deletion(old_pair, grid50, switch_k, 2), oracle_backend, mock_scorer)
        assert {ins.outcomes["old"], dele.outcomes["old"]} == {"yes", "no"}


def test_sweep_counts_and_determinism(old_pair, oracle_backend, mock_scorer, grid50):
    records = sweep(old_pair, grid50, [1, 2], INSERTION, oracle_backend, mock_scorer)
    assert len(records) == 2 * 51
    by_seed = {}
    for r in records:
        by_seed.setdefault(r.seed, []).append(r.outcomes["old"])
    assert by_seed[1] == by_seed[2]  # noiseless scorer: identical outcome vectors


def test_sweep_outcome_matrix_is_step_function(old_pair, oracle_backend, mock_scorer, grid50):
    records = sweep(old_pair, grid50, [1, 2, 3], INSERTION, oracle_backend, mock_scorer)
    curve = estimate_curve(OutcomeMatrix.from_records(records, grid50))
    for point in curve.points:
        assert point.estimate == (1.0 if point.tau >= 0.6 else 0.0)


def test_sweep_worker_count_does_not_change_results(old_pair, oracle_backend, mock_scorer, grid50):
    serial = sweep(old_pair, grid50, [1, 2], INSERTION, oracle_backend, mock_scorer, worker_count=1)
    parallel = sweep(old_pair, grid50, [1, 2], INSERTION, oracle_backend, mock_scorer, worker_count=8)
    assert [r.to_dict() | {"wall_ms": 0} for r in serial] == [r.to_dict() | {"wall_ms": 0} for r in parallel]


class SeedPoisonScorer:
    """Mock wrapper that fails for every image from one seed."""

    def __init__(self, poison_seed):
        self.inner = MockScorer()
        self.poison_seed = poison_seed
        self.scorer_id = "poison/1"

    def answer_text(self, image, question):
        if image.metadata.get("seed") == self.poison_seed:
            raise ScorerError("endpoint down", retryable=False)
        return self.inner.answer_text(image, question)


def test_sweep_flags_failures_and_continues(old_pair, oracle_backend, grid50):
    records = sweep(old_pair, grid50, [1, 2], INSERTION, oracle_backend, SeedPoisonScorer(1))
    summary = sweep_completeness(records)
    assert summary == {"total": 102, "completed": 51, "failed": 51}
    failed = [r for r in records if r.failed]
    assert all(r.seed == 1 for r in failed)
    assert all(not r.outcomes for r in failed)


def test_sweep_fingerprints_are_unique(old_pair, oracle_backend, mock_scorer, grid50):
    records = sweep(old_pair, grid50, [1, 2, 3], INSERTION, oracle_backend, mock_scorer)
    assert len({r.fingerprint for r in records}) == len(records)


def test_multi_concept_independent_locks(taxonomy, grid50, mock_scorer):
    old_entry = taxonomy.entry("Demographics", "Age group", "old")
    teen_entry = taxonomy.entry("Demographics", "Age group", "teenager")
    ctx = old_entry.context_named("city park")
    multi = combine_pairs(build_pair(old_entry, ctx), build_pair(teen_entry, ctx))
    backend = SyntheticBackend(
        SyntheticBackendSpec(grid=grid50, lock_tau={"old": 0.4, "teenager": 0.7})
    )
    at = {grid50.tau_of(k): k for k in range(grid50.steps + 1)}

    mid = run_multi(InterventionPlan.insertion(multi, grid50, at[0.5], 0), backend, mock_scorer)
    assert mid.outcomes == {"old": "yes", "teenager": "no"}

    start = run_multi(InterventionPlan.insertion(multi, grid50, 0, 0), backend, mock_scorer)
    assert start.outcomes == {"old": "yes", "teenager": "yes"}

    never = run_multi(InterventionPlan.insertion(multi, grid50, grid50.steps, 0), backend, mock_scorer)
    assert never.outcomes == {"old": "no", "teenager": "no"}


def test_run_multi_rejects_single_pair(old_pair, oracle_backend, mock_scorer, grid50):
    with pytest.raises(ValueError):
        run_multi(InterventionPlan.insertion(old_pair, grid50, 0, 0), oracle_backend, mock_scorer)
