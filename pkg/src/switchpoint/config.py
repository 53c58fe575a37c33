"""Declarative stack configuration: backend, scorer, and embedding adapters.

Manifests embed these configs so a stored experiment can rebuild exactly the
stack that produced it.
"""
from __future__ import annotations

from typing import Mapping

from .backend import GenerativeBackend, PresenceRule, RemoteBackend, SyntheticBackend, SyntheticBackendSpec
from .editeval import EmbeddingBackend, SyntheticEmbeddingBackend
from .errors import ManifestError
from .score import HttpScorer, MockScorer, MockScript, Scorer
from .trajectory import build_grid


def _presence_rule(raw: Mapping | None, salt: str) -> PresenceRule:
    if not raw:
        return PresenceRule(salt=salt)
    seeds = {c: frozenset(int(s) for s in vals) for c, vals in raw.get("seeds", {}).items()}
    rates = {c: float(r) for c, r in raw.get("rates", {}).items()}
    return PresenceRule(seeds=seeds, rates=rates, salt=salt)


def build_backend(config: Mapping) -> GenerativeBackend:
    kind = config.get("type")
    if kind == "synthetic":
        spec = SyntheticBackendSpec(
            grid=build_grid(int(config.get("T", 50))),
            lock_tau={c: float(t) for c, t in config.get("lock_tau", {}).items()},
            base_presence=_presence_rule(config.get("base_presence"), "base-presence"),
            negative_cure=_presence_rule(config.get("negative_cure"), "negative-cure"),
            flip_probability=float(config.get("flip_probability", 0.0)),
            backend_id=config.get("backend_id", "synthetic-oracle/1"),
        )
        return SyntheticBackend(spec)
    if kind == "remote":
        return RemoteBackend(
            grid=build_grid(int(config["T"])),
            backend_id=config.get("backend_id", "remote/unknown"),
            endpoint=config["endpoint"],
        )
    raise ManifestError(f"unknown backend type {kind!r}")


def build_scorer(config: Mapping, backend: GenerativeBackend | None = None) -> Scorer:
    kind = config.get("type")
    if kind == "mock":
        if config.get("paired") and isinstance(backend, SyntheticBackend):
            return MockScorer.for_backend(backend.spec, seed=int(config.get("seed", 0)))
        return MockScorer(
            MockScript(
                flip_probability=float(config.get("flip_probability", 0.0)),
                seed=int(config.get("seed", 0)),
            )
        )
    if kind == "http":
        # production default is a Qwen-class 3B VQA endpoint; override per config
        return HttpScorer(
            endpoint=config["endpoint"],
            scorer_id=config.get("scorer_id", "qwen-vl-3b"),
            timeout=float(config.get("timeout", 60.0)),
        )
    raise ManifestError(f"unknown scorer type {kind!r}")


def build_embeddings(config: Mapping | None) -> EmbeddingBackend:
    if not config or config.get("type") == "synthetic":
        dim = int(config.get("dim", 16)) if config else 16
        return SyntheticEmbeddingBackend(dim=dim)
    raise ManifestError(f"unknown embedding type {config.get('type')!r}")
