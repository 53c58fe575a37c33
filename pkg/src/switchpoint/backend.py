"""Generative-backend contract plus the synthetic oracle backend.

The contract is deliberately small: initialize a latent from a seed, denoise
a contiguous step range under one text condition, decode at the clean end.
Real models are out-of-process adapters speaking the wire contract at the
bottom of this module; the synthetic backend implements the same contract
with closed-form semantics so every statistical claim in the toolkit can be
verified against an exact oracle.

Synthetic oracle rule: each declared concept has a lock time tau* in [0, 1].
The concept appears in the final image iff the condition that was active at
the last denoise step starting at tau >= tau* mentions the concept. For a
switch at grid index k_s this reduces to "present iff tau_s >= tau*" on
insertion runs and its exact complement on deletion runs.
"""
from __future__ import annotations

import base64
import io
import threading
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np

from .errors import BackendError
from .hashing import stable_digest, stable_u64, stable_unit
from .taxonomy import contains_word
from .trajectory import TimestepGrid

LATENT_DIM = 8
_DECAY = 0.9


# ---------------------------------------------------------------------------
# Conditioning and schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Condition:
    """Text conditioning for a denoise segment."""

    prompt: str
    negative_prompt: str | None = None
    guidance_scale: float = 5.0

    def __post_init__(self):
        if self.guidance_scale < 0:
            raise ValueError(f"guidance scale must be >= 0, got {self.guidance_scale}")

    def key(self) -> str:
        return stable_digest("cond", self.prompt, self.negative_prompt or "", self.guidance_scale)

    def to_dict(self) -> dict:
        return {
            "prompt": self.prompt,
            "negative_prompt": self.negative_prompt,
            "omega": self.guidance_scale,
        }


class NoiseSchedule:
    """Variance schedule: betas, retention factors, and their running product."""

    def __init__(self, betas: Sequence[float]):
        betas_arr = np.asarray(betas, dtype=np.float64)
        if betas_arr.ndim != 1 or betas_arr.size == 0:
            raise ValueError("betas must be a non-empty 1-D sequence")
        if np.any(betas_arr <= 0) or np.any(betas_arr >= 1):
            raise ValueError("every beta must lie strictly inside (0, 1)")
        self.betas = betas_arr
        self.alphas = 1.0 - betas_arr
        self.alpha_bars = np.cumprod(self.alphas)

    @classmethod
    def linear(cls, steps: int, beta_start: float = 1e-4, beta_end: float = 2e-2) -> "NoiseSchedule":
        return cls(np.linspace(beta_start, beta_end, steps))

    @classmethod
    def from_alpha_bars(cls, alpha_bars: Sequence[float]) -> "NoiseSchedule":
        """Build directly from cumulative retention factors in (0, 1]."""
        bars = np.asarray(alpha_bars, dtype=np.float64)
        if np.any(bars <= 0) or np.any(bars > 1):
            raise ValueError("alpha_bar values must lie in (0, 1]")
        if np.any(np.diff(bars) >= 0):
            raise ValueError("alpha_bar must be strictly decreasing")
        schedule = cls.__new__(cls)
        schedule.alpha_bars = bars
        schedule.alphas = bars / np.concatenate(([1.0], bars[:-1]))
        schedule.betas = 1.0 - schedule.alphas
        return schedule

    def alpha_bar(self, t_index: int) -> float:
        if not 0 <= t_index < self.alpha_bars.size:
            raise ValueError(f"t index {t_index} outside schedule of length {self.alpha_bars.size}")
        return float(self.alpha_bars[t_index])


def forward_diffuse(x0: np.ndarray, t_index: int, schedule: NoiseSchedule, epsilon: np.ndarray) -> np.ndarray:
    """Closed-form noising: x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps."""
    x0 = np.asarray(x0, dtype=np.float64)
    epsilon = np.asarray(epsilon, dtype=np.float64)
    if x0.shape != epsilon.shape:
        raise ValueError(f"shape mismatch: x0 {x0.shape} vs epsilon {epsilon.shape}")
    abar = schedule.alpha_bar(t_index)
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * epsilon


def invert_to_x0(x_t: np.ndarray, predicted_eps: np.ndarray, t_index: int, schedule: NoiseSchedule) -> np.ndarray:
    """Invert the closed form: x0* = (x_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t)."""
    x_t = np.asarray(x_t, dtype=np.float64)
    predicted_eps = np.asarray(predicted_eps, dtype=np.float64)
    if x_t.shape != predicted_eps.shape:
        raise ValueError(f"shape mismatch: x_t {x_t.shape} vs eps {predicted_eps.shape}")
    abar = schedule.alpha_bar(t_index)
    if abar == 0.0:
        raise ZeroDivisionError("alpha_bar is 0; reconstruction is singular")
    return (x_t - np.sqrt(1.0 - abar) * predicted_eps) / np.sqrt(abar)


def cfg_combine(eps_cond: np.ndarray, eps_uncond: np.ndarray, omega: float) -> np.ndarray:
    """Classifier-free guidance: (1 + omega) eps_cond - omega eps_uncond."""
    eps_cond = np.asarray(eps_cond, dtype=np.float64)
    eps_uncond = np.asarray(eps_uncond, dtype=np.float64)
    if eps_cond.shape != eps_uncond.shape:
        raise ValueError(f"shape mismatch: {eps_cond.shape} vs {eps_uncond.shape}")
    return (1.0 + omega) * eps_cond - omega * eps_uncond


def negative_guidance_combine(eps_away: np.ndarray, eps_base: np.ndarray, omega: float) -> np.ndarray:
    """Inverted guidance that steers away from the ``eps_away`` prediction.

    The avoided concept's prediction takes the slot the unconditional branch
    normally occupies, so omega=0 degenerates to the plain base prediction.
    """
    return cfg_combine(eps_base, eps_away, omega)


# ---------------------------------------------------------------------------
# Latents and images
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    from_k: int
    to_k: int
    condition: Condition

    def to_dict(self) -> dict:
        return {"from_k": self.from_k, "to_k": self.to_k, **self.condition.to_dict()}


@dataclass(frozen=True)
class LatentState:
    """Latent tensor at grid position k, with the conditioning history so far."""

    values: np.ndarray
    k: int
    grid: TimestepGrid
    seed: int
    history: tuple[Segment, ...] = ()

    def history_key(self) -> str:
        parts = [f"{s.from_k}:{s.to_k}:{s.condition.key()}" for s in self.history]
        return stable_digest("history", *parts)


class GeneratedImage:
    """Decoded output: deterministic pixels plus symbolic concept metadata.

    Pixel content is decorative; presence of a concept is recorded in
    ``metadata["concepts"]`` so the paired mock scorer is exact.
    """

    def __init__(self, pixels: np.ndarray | None, metadata: dict, ref: str, png: bytes | None = None):
        self.pixels = pixels
        self.metadata = metadata
        self.ref = ref
        self._png = png

    @property
    def png_bytes(self) -> bytes:
        if self._png is None:
            from PIL import Image

            buf = io.BytesIO()
            Image.fromarray(self.pixels, mode="RGB").save(buf, format="PNG")
            self._png = buf.getvalue()
        return self._png

    def concepts(self) -> frozenset[str]:
        return frozenset(self.metadata.get("concepts", ()))


class GenerativeBackend(Protocol):
    backend_id: str
    grid: TimestepGrid

    def session(self) -> "GenerativeBackend": ...

    def init_state(self, seed: int) -> LatentState: ...

    def denoise_range(self, state: LatentState, condition: Condition, from_k: int, to_k: int) -> LatentState: ...

    def decode(self, state: LatentState) -> GeneratedImage: ...


# ---------------------------------------------------------------------------
# Synthetic oracle backend
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PresenceRule:
    """Deterministic per-(concept, seed) predicate for spurious base presence."""

    seeds: Mapping[str, frozenset[int]] = field(default_factory=dict)
    rates: Mapping[str, float] = field(default_factory=dict)
    salt: str = "base-presence"

    def holds(self, concept: str, seed: int) -> bool:
        if seed in self.seeds.get(concept, frozenset()):
            return True
        rate = self.rates.get(concept, 0.0)
        return rate > 0.0 and stable_unit(self.salt, concept, seed) < rate


@dataclass(frozen=True)
class SyntheticBackendSpec:
    """Closed-form world the synthetic backend generates.

    ``lock_tau`` maps concept surfaces to their lock-in time tau*.
    ``base_presence`` injects concepts into base generations (what seed
    filtering exists to catch); ``negative_cure`` marks the seeds whose
    spurious presence negative guidance removes. ``flip_probability`` is
    consumed by the paired mock scorer, not by the backend itself.
    """

    grid: TimestepGrid
    lock_tau: Mapping[str, float] = field(default_factory=dict)
    base_presence: PresenceRule = field(default_factory=PresenceRule)
    negative_cure: PresenceRule = field(default_factory=lambda: PresenceRule(salt="negative-cure"))
    flip_probability: float = 0.0
    backend_id: str = "synthetic-oracle/1"

    def __post_init__(self):
        for concept, tau in self.lock_tau.items():
            if not 0.0 <= tau <= 1.0:
                raise ValueError(f"lock tau for {concept!r} must be in [0, 1], got {tau}")
        if not 0.0 <= self.flip_probability < 0.5:
            raise ValueError("flip probability must be in [0, 0.5)")

    def declared_concepts(self) -> tuple[str, ...]:
        names = set(self.lock_tau) | set(self.base_presence.seeds) | set(self.base_presence.rates)
        return tuple(sorted(names))


class SyntheticBackend:
    """Stateless, exactly reproducible backend over a :class:`SyntheticBackendSpec`."""

    def __init__(self, spec: SyntheticBackendSpec):
        self.spec = spec
        self.grid = spec.grid
        self.backend_id = spec.backend_id
        self._increment_cache: dict[tuple[str, int], np.ndarray] = {}
        self._deciding_cache: dict[float, int] = {}
        self._lock = threading.Lock()

    def session(self) -> "SyntheticBackend":
        return self

    def init_state(self, seed: int) -> LatentState:
        rng = np.random.default_rng(stable_u64("init", self.backend_id, seed))
        return LatentState(values=rng.standard_normal(LATENT_DIM), k=0, grid=self.grid, seed=seed)

    def _increment(self, cond_key: str, k: int) -> np.ndarray:
        key = (cond_key, k)
        inc = self._increment_cache.get(key)
        if inc is None:
            rng = np.random.default_rng(stable_u64("step", self.backend_id, cond_key, k))
            inc = 0.1 * rng.standard_normal(LATENT_DIM)
            with self._lock:
                self._increment_cache[key] = inc
        return inc

    def denoise_range(self, state: LatentState, condition: Condition, from_k: int, to_k: int) -> LatentState:
        if from_k > to_k:
            raise BackendError(f"inverted step range {from_k}..{to_k}", step_k=from_k)
        if to_k > self.grid.steps:
            raise BackendError(f"range end {to_k} beyond grid T={self.grid.steps}", step_k=to_k)
        if state.k != from_k:
            raise BackendError(f"state is at step {state.k}, not {from_k}", step_k=from_k)
        if from_k == to_k:
            return state
        values = state.values.copy()
        cond_key = condition.key()
        for k in range(from_k, to_k):
            values = _DECAY * values + self._increment(cond_key, k)
        return LatentState(
            values=values,
            k=to_k,
            grid=state.grid,
            seed=state.seed,
            history=state.history + (Segment(from_k, to_k, condition),),
        )

    def _deciding_step(self, tau_star: float) -> int:
        """Last denoise step whose starting time is at or above ``tau_star``."""
        cached = self._deciding_cache.get(tau_star)
        if cached is not None:
            return cached
        k_star = 0
        for k in range(self.grid.steps):
            if self.grid.tau_of(k) + 1e-12 >= tau_star:
                k_star = k
        self._deciding_cache[tau_star] = k_star
        return k_star

    def _condition_at(self, state: LatentState, k: int) -> Condition:
        for segment in state.history:
            if segment.from_k <= k < segment.to_k:
                return segment.condition
        raise BackendError(f"no condition recorded for step {k}", step_k=k)

    def _present_concepts(self, state: LatentState) -> list[str]:
        present = []
        for concept in self.spec.declared_concepts():
            tau_star = self.spec.lock_tau.get(concept, 0.0)
            cond = self._condition_at(state, self._deciding_step(tau_star))
            if contains_word(cond.prompt, concept):
                present.append(concept)
                continue
            if self.spec.base_presence.holds(concept, state.seed):
                suppressed = (
                    cond.negative_prompt is not None
                    and contains_word(cond.negative_prompt, concept)
                    and cond.guidance_scale > 0
                    and self.spec.negative_cure.holds(concept, state.seed)
                )
                if not suppressed:
                    present.append(concept)
        return present

    def decode(self, state: LatentState) -> GeneratedImage:
        if state.k != self.grid.steps:
            raise BackendError(
                f"decode requires a fully denoised state (k={state.k}, T={self.grid.steps})",
                step_k=state.k,
            )
        concepts = self._present_concepts(state)
        identity = stable_digest("image", self.backend_id, state.seed, state.history_key(), *concepts)
        rng = np.random.default_rng(int(identity[:16], 16))
        pixels = rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8)
        metadata = {
            "concepts": concepts,
            "seed": state.seed,
            "backend_id": self.backend_id,
            "history": [s.to_dict() for s in state.history],
        }
        return GeneratedImage(pixels=pixels, metadata=metadata, ref=identity)


# ---------------------------------------------------------------------------
# Remote adapter wire contract
# ---------------------------------------------------------------------------

WIRE_SCHEMA_VERSION = 1

Transport = Callable[[dict], dict]


def build_generation_request(grid: TimestepGrid, seed: int, segments: Sequence[Segment]) -> dict:
    """Normative request payload for out-of-process generative adapters."""
    if not segments:
        raise BackendError("request needs at least one denoise segment")
    covered = 0
    for seg in segments:
        if seg.from_k != covered:
            raise BackendError(f"segments must tile 0..T contiguously, gap at {covered}", step_k=covered)
        covered = seg.to_k
    if covered != grid.steps:
        raise BackendError(f"segments end at {covered}, grid T={grid.steps}", step_k=covered)
    return {
        "schema_version": WIRE_SCHEMA_VERSION,
        "grid_T": grid.steps,
        "seed": seed,
        "segments": [seg.to_dict() for seg in segments],
    }


def parse_generation_response(payload: dict, expected_segments: int) -> tuple[bytes | str, list[str]]:
    """Validate a response payload; returns (image bytes or handle, trace)."""
    if payload.get("schema_version") != WIRE_SCHEMA_VERSION:
        raise BackendError(f"unsupported response schema_version {payload.get('schema_version')!r}")
    trace = payload.get("trace")
    if not isinstance(trace, list) or len(trace) != expected_segments or not all(isinstance(c, str) for c in trace):
        raise BackendError("response trace must list one checksum per segment")
    if "image" in payload:
        return base64.b64decode(payload["image"]), trace
    if "handle" in payload:
        return payload["handle"], trace
    raise BackendError("response carries neither image bytes nor a handle")


class RemoteBackend:
    """Adapter that accumulates segments locally and generates on decode.

    ``transport`` maps a request payload to a response payload; by default
    it POSTs to ``endpoint`` over HTTP. Latent values never cross the wire.
    """

    def __init__(
        self,
        grid: TimestepGrid,
        backend_id: str,
        transport: Transport | None = None,
        endpoint: str | None = None,
    ):
        if transport is None and endpoint is None:
            raise ValueError("RemoteBackend needs a transport callable or an endpoint URL")
        self.grid = grid
        self.backend_id = backend_id
        self._transport = transport or _http_transport(endpoint)

    def session(self) -> "RemoteBackend":
        return RemoteBackend(self.grid, self.backend_id, transport=self._transport)

    def init_state(self, seed: int) -> LatentState:
        return LatentState(values=np.zeros(0), k=0, grid=self.grid, seed=seed)

    def denoise_range(self, state: LatentState, condition: Condition, from_k: int, to_k: int) -> LatentState:
        if from_k > to_k:
            raise BackendError(f"inverted step range {from_k}..{to_k}", step_k=from_k)
        if state.k != from_k:
            raise BackendError(f"state is at step {state.k}, not {from_k}", step_k=from_k)
        if from_k == to_k:
            return state
        return LatentState(
            values=state.values,
            k=to_k,
            grid=state.grid,
            seed=state.seed,
            history=state.history + (Segment(from_k, to_k, condition),),
        )

    def decode(self, state: LatentState) -> GeneratedImage:
        if state.k != self.grid.steps:
            raise BackendError(f"decode requires k={self.grid.steps}, state is at {state.k}", step_k=state.k)
        request = build_generation_request(self.grid, state.seed, state.history)
        response = self._transport(request)
        image, trace = parse_generation_response(response, len(state.history))
        metadata = {
            "seed": state.seed,
            "backend_id": self.backend_id,
            "trace": trace,
            "history": [s.to_dict() for s in state.history],
        }
        if isinstance(image, bytes):
            ref = stable_digest("remote-image", self.backend_id, state.seed, state.history_key())
            return GeneratedImage(pixels=None, metadata=metadata, ref=ref, png=image)
        metadata["handle"] = image
        return GeneratedImage(pixels=None, metadata=metadata, ref=image, png=None)


def _http_transport(endpoint: str) -> Transport:
    def post(payload: dict) -> dict:
        import httpx

        reply = httpx.post(endpoint, json=payload, timeout=120.0)
        reply.raise_for_status()
        return reply.json()

    return post
