from __future__ import annotations

import pytest

from switchpoint.backend import PresenceRule, SyntheticBackend, SyntheticBackendSpec
from switchpoint.errors import ScorerError, SeedPoolError
from switchpoint.score import MockScorer
from switchpoint.seedcontrol import (
    CONCEPT_PRESENT,
    FAILED,
    VALID,
    SeedPool,
    candidate_seeds,
    filter_seeds,
    presence_report,
    resample_with_negative_guidance,
    verify_pool,
)
from switchpoint.taxonomy import build_pair


@pytest.fixture
def mountain_pair(taxonomy):
    entry = taxonomy.entry("Objects", "Nature objects", "mountain")
    return build_pair(entry, entry.context_named("landscape"))


def spurious_backend(grid, present=(2, 5), cured=()):
    return SyntheticBackend(
        SyntheticBackendSpec(
            grid=grid,
            lock_tau={"mountain": 0.5},
            base_presence=PresenceRule(seeds={"mountain": frozenset(present)}),
            negative_cure=PresenceRule(seeds={"mountain": frozenset(cured)}, salt="negative-cure"),
        )
    )


def test_candidate_stream_is_deterministic():
    a = candidate_seeds("exp-1", 5)
    b = candidate_seeds("exp-1", 5)
    assert a == b
    assert candidate_seeds("exp-2", 5) != a
    assert candidate_seeds("exp-1", 3, offset=2) == a[2:]


def test_filter_discards_seeds_showing_concept(mountain_pair, grid50):
    backend = spurious_backend(grid50)
    pool = filter_seeds(mountain_pair, range(10), backend, MockScorer(), target_count=8)
    assert pool.valid_seeds() == [0, 1, 3, 4, 6, 7, 8, 9]
    assert pool.seeds_with_status(CONCEPT_PRESENT) == [2, 5]
    assert not pool.negative_guidance_used
    assert not pool.short_of_target


def test_filter_stops_early_at_target(mountain_pair, grid50):
    backend = spurious_backend(grid50, present=())
    pool = filter_seeds(mountain_pair, range(100), backend, MockScorer(), target_count=3)
    assert pool.valid_seeds() == [0, 1, 2]
    assert pool.attempted == 3


def test_filter_all_present_sets_escalation(mountain_pair, grid50):
    backend = spurious_backend(grid50, present=tuple(range(10)))
    pool = filter_seeds(mountain_pair, range(10), backend, MockScorer(), target_count=5)
    assert pool.valid_seeds() == []
    assert pool.short_of_target


def test_filter_neutral_base_scene_accepts_all(mountain_pair, grid50):
    backend = spurious_backend(grid50, present=())
    pool = filter_seeds(mountain_pair, range(10), backend, MockScorer(), target_count=10)
    assert len(pool.valid_seeds()) == 10


class PoisonScorer:
    scorer_id = "poison/1"

    def __init__(self, poison):
        self.poison = poison
        self.inner = MockScorer()

    def answer_text(self, image, question):
        if image.metadata.get("seed") in self.poison:
            raise ScorerError("down", retryable=False)
        return self.inner.answer_text(image, question)


def test_failures_marked_failed_never_valid(mountain_pair, grid50):
    backend = spurious_backend(grid50, present=())
    pool = filter_seeds(mountain_pair, range(6), backend, PoisonScorer({1, 2}), target_count=6)
    assert pool.seeds_with_status(FAILED) == [1, 2]
    assert pool.valid_seeds() == [0, 3, 4, 5]


def test_negative_guidance_recovers_cured_seeds(mountain_pair, grid50):
    backend = spurious_backend(grid50, present=(2, 5), cured=(2,))
    scorer = MockScorer()
    pool = filter_seeds(mountain_pair, range(10), backend, scorer, target_count=9)
    assert pool.short_of_target and len(pool.valid_seeds()) == 8
    rescued = resample_with_negative_guidance(
        mountain_pair, pool, pool.seeds_with_status(CONCEPT_PRESENT), backend, scorer
    )
    assert rescued.negative_guidance_used
    assert rescued.valid_seeds() == [0, 1, 3, 4, 6, 7, 8, 9, 2]
    assert rescued.seeds_with_status(CONCEPT_PRESENT) == []  # 5 never re-examined: target met first


def test_negative_guidance_still_short_raises_with_counts(mountain_pair, grid50):
    backend = spurious_backend(grid50, present=(2, 5), cured=())
    scorer = MockScorer()
    pool = filter_seeds(mountain_pair, range(10), backend, scorer, target_count=10)
    with pytest.raises(SeedPoolError) as err:
        resample_with_negative_guidance(mountain_pair, pool, [2, 5], backend, scorer)
    assert err.value.valid == 8
    assert err.value.target == 10
    assert err.value.attempted == 12


def test_resample_precondition(mountain_pair, grid50):
    backend = spurious_backend(grid50, present=())
    pool = filter_seeds(mountain_pair, range(5), backend, MockScorer(), target_count=5)
    with pytest.raises(ValueError):
        resample_with_negative_guidance(mountain_pair, pool, [9], backend, MockScorer())


def test_verify_pool_finds_no_offenders(mountain_pair, grid50):
    backend = spurious_backend(grid50)
    scorer = MockScorer()
    pool = filter_seeds(mountain_pair, range(10), backend, scorer, target_count=8)
    assert verify_pool(pool, mountain_pair, backend, scorer) == []


def test_pool_round_trips_through_dict(mountain_pair, grid50):
    backend = spurious_backend(grid50)
    pool = filter_seeds(mountain_pair, range(10), backend, MockScorer(), target_count=8)
    assert SeedPool.from_dict(pool.to_dict()) == pool


def test_presence_report_fractions():
    rows = presence_report({"mountain": [True] * 300 + [False] * 700, "river": [False] * 1000})
    assert rows[0] == {"concept": "mountain", "fraction": 0.3, "n": 1000}
    assert rows[1]["fraction"] == 0.0


def test_presence_report_sorted_descending():
    rows = presence_report({"a": [True, False], "b": [True, True], "c": [False, False]})
    assert [r["concept"] for r in rows] == ["b", "a", "c"]


def test_presence_report_empty():
    assert presence_report({}) == []
    assert presence_report({"x": []}) == []
