"""Discrete denoising schedules and their normalization to tau in [0, 1].

Every model traverses raw timesteps t in [0, 1000] from noisy (t=1000) to
clean (t=0) on a uniform grid t_k = 1000 - k*dt with dt = 1000/T. Normalized
time tau = t/1000 makes grids with different step counts comparable.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import GridError

RAW_MAX = 1000.0


@dataclass(frozen=True)
class TimestepGrid:
    """Inclusive grid of T+1 raw timesteps, descending from 1000 to 0.

    Index k=0 is the fully-noisy end; k=T is the clean end. As a switch
    index, k=0 means "second prompt from the very start" and k=T means
    "never switched", so both trivial baselines live on the grid.
    """

    steps: int
    raw_timesteps: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if self.steps < 1:
            raise GridError(f"step count must be >= 1, got {self.steps}")
        # (T-k)/T instead of 1000 - k*dt: the endpoints land on exactly
        # 1000 and 0 for every T, not just divisors of 1000.
        object.__setattr__(
            self,
            "raw_timesteps",
            tuple(RAW_MAX * (self.steps - k) / self.steps for k in range(self.steps + 1)),
        )

    @property
    def delta(self) -> float:
        return RAW_MAX / self.steps

    @property
    def delta_tau(self) -> float:
        return 1.0 / self.steps

    def tau_of(self, k: int) -> float:
        """Normalized time of grid index k."""
        if not 0 <= k <= self.steps:
            raise GridError(f"step index {k} outside 0..{self.steps}")
        return (self.steps - k) / self.steps

    def taus(self) -> tuple[float, ...]:
        return tuple(normalize(t) for t in self.raw_timesteps)

    def __len__(self) -> int:
        return self.steps + 1


def build_grid(steps: int) -> TimestepGrid:
    """Build the uniform grid for a model with ``steps`` inference steps."""
    return TimestepGrid(steps)


def normalize(t: float) -> float:
    """Map a raw timestep t in [0, 1000] to tau = t/1000."""
    if not 0.0 <= t <= RAW_MAX:
        raise GridError(f"raw timestep {t} outside [0, {RAW_MAX:g}]")
    return t / RAW_MAX


def nearest_step(grid: TimestepGrid, tau: float) -> int:
    """Grid index whose normalized time is closest to ``tau``.

    Ties go to the smaller index (the earlier, noisier step).
    """
    if not 0.0 <= tau <= 1.0:
        raise GridError(f"tau {tau} outside [0, 1]")
    best_k = 0
    best_dist = abs(grid.tau_of(0) - tau)
    for k in range(1, grid.steps + 1):
        dist = abs(grid.tau_of(k) - tau)
        if dist < best_dist:
            best_k, best_dist = k, dist
    return best_k
