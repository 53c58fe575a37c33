"""Estimators over binary intervention outcomes.

Success curves are per-step binomial proportions over seeds, each with a
Wilson score interval; crossing times and bandwidths summarize a curve;
aggregation pools summaries across concept-prompt pairs; the bootstrap
analysis answers "how many seeds are enough". Missing cells are excluded
from denominators, never imputed, and curves are never smoothed.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .intervene import DELETION, INSERTION, RunRecord
from .trajectory import TimestepGrid

DEFAULT_Z = 1.96  # two-sided 95%

# Stability thresholds for the seed-budget analysis. These defaults are this
# toolkit's own calibration, not published values; reports carry the
# provenance flag so downstream readers can tell.
DEFAULT_VARIANCE_THRESHOLD = 1e-3
DEFAULT_DEVIATION_THRESHOLD = 0.05

_YES, _NO, _MISSING = 1, 0, -1


# ---------------------------------------------------------------------------
# Outcome matrices
# ---------------------------------------------------------------------------

class OutcomeMatrix:
    """Seed x switch-step grid of yes/no/missing outcomes for one pair."""

    def __init__(
        self,
        seeds: Sequence[int],
        grid: TimestepGrid,
        cells: np.ndarray,
        pair_key: str = "",
        direction: str = INSERTION,
        concept: str = "",
        scorer_id: str = "",
    ):
        cells = np.asarray(cells, dtype=np.int8)
        if cells.shape != (len(seeds), grid.steps + 1):
            raise ValueError(
                f"cells shape {cells.shape} does not match {len(seeds)} seeds x {grid.steps + 1} steps"
            )
        self.seeds = tuple(seeds)
        self.grid = grid
        self.cells = cells
        self.pair_key = pair_key
        self.direction = direction
        self.concept = concept
        self.scorer_id = scorer_id

    @classmethod
    def from_records(
        cls,
        records: Sequence[RunRecord],
        grid: TimestepGrid,
        concept: str | None = None,
    ) -> "OutcomeMatrix":
        """Assemble a matrix from sweep records; failed cells become missing."""
        if not records:
            raise ValueError("no records to build a matrix from")
        if concept is None:
            keys = {k for r in records if not r.failed for k in r.outcomes}
            if len(keys) != 1:
                raise ValueError(f"records score {sorted(keys)}; pass concept= explicitly")
            concept = keys.pop()
        seeds = sorted({r.seed for r in records})
        index = {seed: i for i, seed in enumerate(seeds)}
        cells = np.full((len(seeds), grid.steps + 1), _MISSING, dtype=np.int8)
        for record in records:
            if record.failed or concept not in record.outcomes:
                continue
            cells[index[record.seed], record.switch_k] = _YES if record.outcomes[concept] == "yes" else _NO
        scorer_ids = {r.scorer_id for r in records if r.scorer_id}
        return cls(
            seeds=seeds,
            grid=grid,
            cells=cells,
            pair_key=records[0].pair_key,
            direction=records[0].direction,
            concept=concept,
            scorer_id=scorer_ids.pop() if len(scorer_ids) == 1 else "",
        )

    def counts_at(self, step_k: int) -> tuple[int, int]:
        """(yes count, non-missing count) at one switch step."""
        column = self.cells[:, step_k]
        return int(np.sum(column == _YES)), int(np.sum(column != _MISSING))

    def subset(self, row_indices: Sequence[int]) -> "OutcomeMatrix":
        return OutcomeMatrix(
            seeds=[self.seeds[i] for i in row_indices],
            grid=self.grid,
            cells=self.cells[list(row_indices), :],
            pair_key=self.pair_key,
            direction=self.direction,
            concept=self.concept,
        )


# ---------------------------------------------------------------------------
# Wilson score interval
# ---------------------------------------------------------------------------

def _wilson_from_phat(p_hat: float, trials: int, z: float) -> tuple[float, float]:
    denom = 1.0 + z * z / trials
    center = (p_hat + z * z / (2.0 * trials)) / denom
    half = (z / denom) * math.sqrt(p_hat * (1.0 - p_hat) / trials + z * z / (4.0 * trials * trials))
    lo, hi = center - half, center + half
    # The bounds are analytically 0 and 1 at the extremes; snap instead of
    # leaving float cancellation residue like -5.6e-17.
    lo = 0.0 if p_hat == 0.0 else max(0.0, lo)
    hi = 1.0 if p_hat == 1.0 else min(1.0, hi)
    return lo, hi


def wilson_interval(successes: int, trials: int, z: float = DEFAULT_Z) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if not 0 <= successes <= trials:
        raise ValueError(f"successes {successes} outside 0..{trials}")
    return _wilson_from_phat(successes / trials, trials, z)


# ---------------------------------------------------------------------------
# Success curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CurvePoint:
    step_k: int
    tau: float
    n: int
    yes: int
    estimate: float | None
    wilson_lo: float | None
    wilson_hi: float | None

    @property
    def defined(self) -> bool:
        return self.n > 0


@dataclass(frozen=True)
class CisCurve:
    """Per-step success estimate with Wilson intervals, ordered by step index.

    ``direction`` gives the semantics: insertion curves estimate insertion
    success, deletion curves estimate persistence (the probability removal
    failed).
    """

    points: tuple[CurvePoint, ...]
    pair_key: str = ""
    direction: str = INSERTION
    scorer_id: str = ""

    @property
    def kind(self) -> str:
        return "insertion-success" if self.direction == INSERTION else "deletion-persistence"

    def defined_points(self) -> tuple[CurvePoint, ...]:
        return tuple(p for p in self.points if p.defined)

    def by_ascending_tau(self) -> tuple[CurvePoint, ...]:
        return tuple(sorted(self.defined_points(), key=lambda p: p.tau))

    def monotonicity_violations(self) -> int:
        """Adjacent defined pairs where the estimate drops as tau increases.

        Nondecreasing curves are an empirical report, not an assumption, so
        this is counted and surfaced rather than asserted anywhere.
        """
        ordered = self.by_ascending_tau()
        return sum(
            1
            for prev, nxt in zip(ordered, ordered[1:])
            if nxt.estimate < prev.estimate - 1e-12
        )


def estimate_curve(matrix: OutcomeMatrix, z: float = DEFAULT_Z) -> CisCurve:
    """Seed-averaged success curve; steps with no usable cells stay undefined."""
    points = []
    for k in range(matrix.grid.steps + 1):
        yes, n = matrix.counts_at(k)
        if n == 0:
            point = CurvePoint(k, matrix.grid.tau_of(k), 0, 0, None, None, None)
        else:
            lo, hi = wilson_interval(yes, n, z)
            point = CurvePoint(k, matrix.grid.tau_of(k), n, yes, yes / n, lo, hi)
        points.append(point)
    return CisCurve(
        points=tuple(points),
        pair_key=matrix.pair_key,
        direction=matrix.direction,
        scorer_id=matrix.scorer_id,
    )


def cds_curve(matrix: OutcomeMatrix, z: float = DEFAULT_Z) -> CisCurve:
    """Persistence curve from deletion sweeps: the estimate at each step is
    the probability the concept survived the switch back to the base prompt."""
    if matrix.direction != DELETION:
        raise ValueError("cds_curve expects a deletion-direction matrix")
    return estimate_curve(matrix, z)


def crossing_time(curve: CisCurve, q: float) -> float | None:
    """Smallest grid tau whose estimate reaches level q; None if never reached."""
    defined = curve.defined_points()
    if not defined:
        raise ValueError("curve has no defined points")
    reached = [p.tau for p in defined if p.estimate >= q]
    return min(reached) if reached else None


@dataclass(frozen=True)
class CrossingSummary:
    """Crossing times at the standard levels plus the transition bandwidth."""

    tau50: float | None
    tau70: float | None
    bandwidth: float | None
    pair_key: str = ""

    @classmethod
    def from_curve(cls, curve: CisCurve) -> "CrossingSummary":
        tau50 = crossing_time(curve, 0.5)
        tau70 = crossing_time(curve, 0.7)
        bandwidth = (tau70 - tau50) if (tau50 is not None and tau70 is not None) else None
        return cls(tau50=tau50, tau70=tau70, bandwidth=bandwidth, pair_key=curve.pair_key)

    def to_dict(self) -> dict:
        return {
            "pair": self.pair_key,
            "tau50": self.tau50,
            "tau70": self.tau70,
            "bandwidth": self.bandwidth,
            "tau50_defined": self.tau50 is not None,
            "tau70_defined": self.tau70 is not None,
        }


# ---------------------------------------------------------------------------
# Cross-pair aggregation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AggregateStat:
    mean: float
    std: float
    n: int
    undefined: int
    single_sample: bool

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "n": self.n,
            "undefined": self.undefined,
            "single_sample": self.single_sample,
        }


def _aggregate_values(values: list[float], undefined: int) -> AggregateStat | None:
    if not values:
        return None
    mean = float(np.mean(values))
    std = 0.0 if len(values) == 1 else float(np.std(values, ddof=1))
    return AggregateStat(
        mean=mean,
        std=std,
        n=len(values),
        undefined=undefined,
        single_sample=len(values) == 1,
    )


def aggregate(summaries: Sequence[CrossingSummary]) -> dict[str, AggregateStat | None]:
    """Mean and sample std of each crossing statistic across pairs.

    Undefined entries are excluded and counted; a statistic undefined for
    every pair is reported as None. Single-sample stds are 0 and flagged.
    """
    if not summaries:
        raise ValueError("nothing to aggregate")
    out: dict[str, AggregateStat | None] = {}
    for name in ("tau50", "tau70", "bandwidth"):
        values = [getattr(s, name) for s in summaries]
        present = [v for v in values if v is not None]
        out[name] = _aggregate_values(present, undefined=len(values) - len(present))
    return out


# ---------------------------------------------------------------------------
# Bootstrap seed-budget analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BootstrapPoint:
    k: int
    mean_step_variance: float
    max_step_variance: float
    max_mean_abs_deviation: float
    stable: bool


@dataclass(frozen=True)
class BootstrapReport:
    points: tuple[BootstrapPoint, ...]
    resamples: int
    variance_threshold: float
    deviation_threshold: float
    threshold_provenance: str
    smallest_stable_k: int | None

    def to_dict(self) -> dict:
        return {
            "resamples": self.resamples,
            "variance_threshold": self.variance_threshold,
            "deviation_threshold": self.deviation_threshold,
            "threshold_provenance": self.threshold_provenance,
            "smallest_stable_k": self.smallest_stable_k,
            "points": [vars(p) for p in self.points],
        }


def bootstrap_seed_budget(
    matrix: OutcomeMatrix,
    k_values: Sequence[int],
    resamples: int = 100,
    variance_threshold: float | None = None,
    deviation_threshold: float | None = None,
    rng_seed: int = 0,
) -> BootstrapReport:
    """How many seeds a stable curve needs, by subsampling without replacement.

    For each k: draw ``resamples`` subsets of k distinct seeds, compute the
    mean curve per subset, then (i) the across-subset variance of each step's
    estimate and (ii) each step's mean absolute deviation from the full-seed
    curve. A k is stable when the worst-step variance and worst-step
    deviation are both at or under their thresholds.
    """
    n_seeds = len(matrix.seeds)
    if resamples < 2:
        raise ValueError("resamples must be >= 2")
    for k in k_values:
        if not 1 <= k <= n_seeds:
            raise ValueError(f"subsample size {k} outside 1..{n_seeds}")

    provenance = "user"
    if variance_threshold is None and deviation_threshold is None:
        provenance = "toolkit-default"
    variance_threshold = DEFAULT_VARIANCE_THRESHOLD if variance_threshold is None else variance_threshold
    deviation_threshold = DEFAULT_DEVIATION_THRESHOLD if deviation_threshold is None else deviation_threshold

    values = np.where(matrix.cells == _MISSING, np.nan, matrix.cells.astype(np.float64))
    with np.errstate(invalid="ignore"):
        full_curve = np.nanmean(values, axis=0)
    rng = np.random.default_rng(rng_seed)

    points = []
    for k in sorted(set(k_values)):
        sub_curves = np.empty((resamples, values.shape[1]))
        for r in range(resamples):
            rows = rng.choice(n_seeds, size=k, replace=False)
            with np.errstate(invalid="ignore"):
                sub_curves[r] = np.nanmean(values[rows, :], axis=0)
        usable = ~np.isnan(sub_curves).any(axis=0) & ~np.isnan(full_curve)
        step_variance = np.var(sub_curves[:, usable], axis=0, ddof=1)
        step_deviation = np.mean(np.abs(sub_curves[:, usable] - full_curve[usable]), axis=0)
        max_var = float(step_variance.max())
        stable = max_var <= variance_threshold and float(step_deviation.max()) <= deviation_threshold
        points.append(
            BootstrapPoint(
                k=k,
                mean_step_variance=float(step_variance.mean()),
                max_step_variance=max_var,
                max_mean_abs_deviation=float(step_deviation.max()),
                stable=stable,
            )
        )
    stable_ks = [p.k for p in points if p.stable]
    return BootstrapReport(
        points=tuple(points),
        resamples=resamples,
        variance_threshold=variance_threshold,
        deviation_threshold=deviation_threshold,
        threshold_provenance=provenance,
        smallest_stable_k=min(stable_ks) if stable_ks else None,
    )


# ---------------------------------------------------------------------------
# Tabular export / import
# ---------------------------------------------------------------------------

CURVE_COLUMNS = ("step_k", "tau", "n", "yes", "estimate", "wilson_lo", "wilson_hi")


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(value)


def curve_to_rows(curve: CisCurve) -> list[dict[str, str]]:
    return [
        {
            "step_k": str(p.step_k),
            "tau": repr(p.tau),
            "n": str(p.n),
            "yes": str(p.yes),
            "estimate": _fmt(p.estimate),
            "wilson_lo": _fmt(p.wilson_lo),
            "wilson_hi": _fmt(p.wilson_hi),
        }
        for p in curve.points
    ]


def rows_to_curve(
    rows: Iterable[Mapping[str, str]],
    pair_key: str = "",
    direction: str = INSERTION,
    scorer_id: str = "",
) -> CisCurve:
    points = []
    for row in rows:
        estimate = row["estimate"]
        points.append(
            CurvePoint(
                step_k=int(row["step_k"]),
                tau=float(row["tau"]),
                n=int(row["n"]),
                yes=int(row["yes"]),
                estimate=float(estimate) if estimate else None,
                wilson_lo=float(row["wilson_lo"]) if row["wilson_lo"] else None,
                wilson_hi=float(row["wilson_hi"]) if row["wilson_hi"] else None,
            )
        )
    points.sort(key=lambda p: p.step_k)
    return CisCurve(points=tuple(points), pair_key=pair_key, direction=direction, scorer_id=scorer_id)


def write_curve_csv(curve: CisCurve, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CURVE_COLUMNS)
        writer.writeheader()
        writer.writerows(curve_to_rows(curve))


def read_curve_csv(
    path: str | Path,
    pair_key: str = "",
    direction: str = INSERTION,
    scorer_id: str = "",
) -> CisCurve:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return rows_to_curve(csv.DictReader(fh), pair_key=pair_key, direction=direction, scorer_id=scorer_id)
