from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from switchpoint.intervene import DELETION, INSERTION
from switchpoint.stats import (
    CisCurve,
    CrossingSummary,
    CurvePoint,
    OutcomeMatrix,
    aggregate,
    bootstrap_seed_budget,
    cds_curve,
    crossing_time,
    estimate_curve,
    read_curve_csv,
    rows_to_curve,
    curve_to_rows,
    wilson_interval,
    write_curve_csv,
)
from switchpoint.trajectory import build_grid


def wilson_oracle(successes: int, trials: int, z: str = "1.96"):
    """Independent high-precision bounds: 50-digit roots of the score equation
    (phat - p)^2 = z^2 p (1 - p) / n, solved as a quadratic in p."""
    import mpmath as mp

    with mp.workdps(50):
        zz = mp.mpf(z)
        phat = mp.mpf(successes) / trials
        a = 1 + zz**2 / trials
        b = -(2 * phat + zz**2 / trials)
        c = phat**2
        disc = mp.sqrt(b * b - 4 * a * c)
        return float((-b - disc) / (2 * a)), float((-b + disc) / (2 * a))


def make_matrix(cells, T=None, direction=INSERTION):
    cells = np.asarray(cells, dtype=np.int8)
    T = cells.shape[1] - 1 if T is None else T
    return OutcomeMatrix(
        seeds=list(range(cells.shape[0])),
        grid=build_grid(T),
        cells=cells,
        pair_key="test|pair|x|ctx",
        direction=direction,
    )


# ---------------------------------------------------------------------------
# Wilson interval
# ---------------------------------------------------------------------------

def test_wilson_frozen_values():
    lo, hi = wilson_interval(50, 100)
    assert (lo, hi) == pytest.approx((0.40382982859014716, 0.5961701714098528), abs=1e-12)
    lo, hi = wilson_interval(100, 100)
    assert lo == pytest.approx(0.9630051925239981, abs=1e-12)
    assert hi == 1.0
    lo, hi = wilson_interval(0, 1)
    assert lo == 0.0
    assert hi == pytest.approx(0.7934567085261071, abs=1e-12)


def test_wilson_matches_high_precision_oracle():
    for k, n in [(0, 1), (50, 100), (100, 100), (3, 7), (1, 1000), (999, 1000)]:
        got = wilson_interval(k, n)
        want = wilson_oracle(k, n)
        assert got == pytest.approx(want, abs=1e-6)


def test_wilson_boundaries_exact():
    assert wilson_interval(0, 10)[0] == 0.0
    assert wilson_interval(10, 10)[1] == 1.0


def test_wilson_rejects_bad_arguments():
    with pytest.raises(ValueError):
        wilson_interval(0, 0)
    with pytest.raises(ValueError):
        wilson_interval(5, 3)


def test_wilson_width_decreases_in_n():
    widths = []
    for n in (10, 100, 1000):
        lo, hi = wilson_interval(n // 2, n)
        widths.append(hi - lo)
    assert widths[0] > widths[1] > widths[2]


@given(st.integers(min_value=1, max_value=500), st.data())
def test_wilson_bounds_inside_unit_interval_and_ordered(n, data):
    k = data.draw(st.integers(min_value=0, max_value=n))
    lo, hi = wilson_interval(k, n)
    assert 0.0 <= lo <= k / n <= hi <= 1.0


# ---------------------------------------------------------------------------
# Curve estimation
# ---------------------------------------------------------------------------

def test_estimate_all_yes_hits_frozen_wilson():
    matrix = make_matrix(np.ones((100, 3), dtype=np.int8))
    curve = estimate_curve(matrix)
    for point in curve.points:
        assert point.estimate == 1.0
        assert point.wilson_lo == pytest.approx(0.9630051925239981, abs=1e-12)
        assert point.wilson_hi == 1.0


def test_estimate_half_yes():
    cells = np.zeros((100, 2), dtype=np.int8)
    cells[:50, 0] = 1
    point = estimate_curve(make_matrix(cells)).points[0]
    assert point.estimate == 0.5
    assert (point.wilson_lo, point.wilson_hi) == pytest.approx((0.4038, 0.5962), abs=1e-4)


def test_missing_cells_excluded_from_denominator():
    cells = np.array([[1, 0], [0, 0], [-1, 0], [-1, 0]], dtype=np.int8)
    point = estimate_curve(make_matrix(cells)).points[0]
    assert point.n == 2
    assert point.estimate == 0.5


def test_fully_missing_step_is_undefined_not_interpolated():
    cells = np.array([[1, -1, 1], [1, -1, 0]], dtype=np.int8)
    curve = estimate_curve(make_matrix(cells))
    assert not curve.points[1].defined
    assert curve.points[1].estimate is None
    assert [p.defined for p in curve.points] == [True, False, True]


def test_estimate_permutation_invariant_in_seed_order():
    rng = np.random.default_rng(1)
    cells = rng.integers(0, 2, size=(20, 11)).astype(np.int8)
    base = estimate_curve(make_matrix(cells))
    shuffled = estimate_curve(make_matrix(cells[rng.permutation(20)]))
    assert [p.estimate for p in base.points] == [p.estimate for p in shuffled.points]


def test_curve_values_and_intervals_in_unit_interval():
    rng = np.random.default_rng(2)
    cells = rng.integers(0, 2, size=(9, 21)).astype(np.int8)
    for p in estimate_curve(make_matrix(cells)).defined_points():
        assert 0.0 <= p.wilson_lo <= p.estimate <= p.wilson_hi <= 1.0


def test_monotonicity_violations_counted_not_asserted():
    # ascending tau order is reversed step order
    cells = np.array([[1, 0, 1, 0, 1]], dtype=np.int8)
    curve = estimate_curve(make_matrix(cells))
    assert curve.monotonicity_violations() == 2
    step = estimate_curve(make_matrix(np.array([[1, 1, 1, 0, 0]], dtype=np.int8)))
    assert step.monotonicity_violations() == 0


# ---------------------------------------------------------------------------
# Crossing times and aggregation
# ---------------------------------------------------------------------------

def constant_curve(value, T=10):
    cells = np.full((4, T + 1), 1 if value else 0, dtype=np.int8)
    return estimate_curve(make_matrix(cells))


def test_crossing_constant_one_is_zero():
    curve = constant_curve(1)
    for q in (0.1, 0.5, 0.7, 1.0):
        assert crossing_time(curve, q) == 0.0


def test_crossing_constant_zero_is_undefined():
    assert crossing_time(constant_curve(0), 0.5) is None


def test_crossing_step_curve():
    grid = build_grid(50)
    cells = np.zeros((10, 51), dtype=np.int8)
    for k in range(51):
        if grid.tau_of(k) >= 0.6:
            cells[:, k] = 1
    summary = CrossingSummary.from_curve(estimate_curve(make_matrix(cells, T=50)))
    assert summary.tau50 == 0.6
    assert summary.tau70 == 0.6
    assert summary.bandwidth == 0.0


def test_crossing_requires_defined_points():
    empty = CisCurve(points=(CurvePoint(0, 1.0, 0, 0, None, None, None),))
    with pytest.raises(ValueError):
        crossing_time(empty, 0.5)


@settings(max_examples=300)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_crossing_monotone_in_q_and_bandwidth_nonnegative(seed):
    rng = np.random.default_rng(seed)
    T = int(rng.integers(1, 30))
    cells = rng.integers(0, 2, size=(int(rng.integers(1, 8)), T + 1)).astype(np.int8)
    curve = estimate_curve(make_matrix(cells, T=T))
    qs = sorted(rng.uniform(0, 1, size=4))
    taus = [crossing_time(curve, q) for q in qs]
    for lo_q, hi_q in zip(taus, taus[1:]):
        if lo_q is not None and hi_q is not None:
            assert hi_q >= lo_q
    summary = CrossingSummary.from_curve(curve)
    if summary.bandwidth is not None:
        assert summary.bandwidth >= 0.0


def test_aggregate_two_values():
    summaries = [
        CrossingSummary(tau50=0.4, tau70=None, bandwidth=None),
        CrossingSummary(tau50=0.6, tau70=None, bandwidth=None),
    ]
    stats = aggregate(summaries)
    assert stats["tau50"].mean == pytest.approx(0.5)
    assert stats["tau50"].std == pytest.approx(0.14142135623730953)
    assert stats["tau70"] is None


def test_aggregate_single_value_flagged():
    stats = aggregate([CrossingSummary(tau50=0.53, tau70=None, bandwidth=None)])
    assert stats["tau50"].mean == 0.53
    assert stats["tau50"].std == 0.0
    assert stats["tau50"].single_sample


def test_aggregate_counts_undefined():
    summaries = [
        CrossingSummary(tau50=0.5, tau70=0.6, bandwidth=0.1),
        CrossingSummary(tau50=None, tau70=0.7, bandwidth=None),
    ]
    stats = aggregate(summaries)
    assert stats["tau50"].n == 1 and stats["tau50"].undefined == 1
    assert stats["tau70"].n == 2


def test_aggregate_reproduces_reference_row_shape():
    """Mean +/- sample std formatting fixture matching the published
    accessories row (0.53 +/- 0.05, 0.62 +/- 0.03); real-backend values,
    constructed here from symmetric inputs that hit them exactly."""
    summaries = [
        CrossingSummary(tau50=0.48, tau70=0.59, bandwidth=0.11),
        CrossingSummary(tau50=0.53, tau70=0.62, bandwidth=0.09),
        CrossingSummary(tau50=0.58, tau70=0.65, bandwidth=0.07),
    ]
    stats = aggregate(summaries)
    assert stats["tau50"].mean == pytest.approx(0.53)
    assert stats["tau50"].std == pytest.approx(0.05)
    assert stats["tau70"].mean == pytest.approx(0.62)
    assert stats["tau70"].std == pytest.approx(0.03)


# ---------------------------------------------------------------------------
# Deletion persistence curves
# ---------------------------------------------------------------------------

def test_cds_boundary_columns():
    grid = build_grid(10)
    cells = np.zeros((5, 11), dtype=np.int8)
    cells[:, 10] = 1  # never-switched column persists
    curve = cds_curve(make_matrix(cells, T=10, direction=DELETION))
    assert curve.kind == "deletion-persistence"
    assert curve.points[0].estimate == 0.0
    assert curve.points[10].estimate == 1.0


def test_cds_rejects_insertion_matrix():
    with pytest.raises(ValueError):
        cds_curve(make_matrix(np.ones((2, 3), dtype=np.int8), direction=INSERTION))


# ---------------------------------------------------------------------------
# Bootstrap seed budget
# ---------------------------------------------------------------------------

def test_bootstrap_deterministic_outcomes_stable_at_one():
    cells = np.ones((50, 11), dtype=np.int8)
    report = bootstrap_seed_budget(make_matrix(cells), k_values=[1, 5, 10])
    assert report.smallest_stable_k == 1
    assert all(p.stable for p in report.points)
    assert report.threshold_provenance == "toolkit-default"


def test_bootstrap_variance_shrinks_with_k():
    rng = np.random.default_rng(3)
    cells = rng.integers(0, 2, size=(400, 21)).astype(np.int8)
    report = bootstrap_seed_budget(make_matrix(cells), k_values=[10, 100], resamples=200, rng_seed=1)
    by_k = {p.k: p for p in report.points}
    assert by_k[100].mean_step_variance < by_k[10].mean_step_variance


def test_bootstrap_zero_thresholds_on_noisy_data_never_stable():
    rng = np.random.default_rng(4)
    cells = rng.integers(0, 2, size=(60, 11)).astype(np.int8)
    report = bootstrap_seed_budget(
        make_matrix(cells), k_values=[5, 20], variance_threshold=0.0, deviation_threshold=0.0
    )
    assert report.smallest_stable_k is None
    assert report.threshold_provenance == "user"


def test_bootstrap_rejects_oversized_k():
    with pytest.raises(ValueError):
        bootstrap_seed_budget(make_matrix(np.ones((5, 3), dtype=np.int8)), k_values=[6])


def test_bootstrap_reproducible_for_fixed_seed():
    rng = np.random.default_rng(5)
    cells = rng.integers(0, 2, size=(30, 6)).astype(np.int8)
    a = bootstrap_seed_budget(make_matrix(cells), k_values=[3, 10], rng_seed=9)
    b = bootstrap_seed_budget(make_matrix(cells), k_values=[3, 10], rng_seed=9)
    assert a == b


# ---------------------------------------------------------------------------
# Export round-trips
# ---------------------------------------------------------------------------

def test_curve_csv_round_trip(tmp_path):
    cells = np.array([[1, -1, 0, 1], [1, -1, 1, 0], [0, -1, -1, 1]], dtype=np.int8)
    curve = estimate_curve(make_matrix(cells))
    path = tmp_path / "curve.csv"
    write_curve_csv(curve, path)
    back = read_curve_csv(path, pair_key=curve.pair_key, direction=curve.direction)
    assert back == curve


def test_curve_rows_round_trip_preserves_floats_exactly():
    cells = np.array([[1, 0, 1]] * 7, dtype=np.int8)
    curve = estimate_curve(make_matrix(cells))
    back = rows_to_curve(curve_to_rows(curve), pair_key=curve.pair_key, direction=curve.direction)
    assert back == curve
