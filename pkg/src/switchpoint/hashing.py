"""Stable content hashing shared by backends, scorers, manifests, and stores.

Everything that must be reproducible across processes hashes through here;
Python's builtin ``hash`` is salted per process and must never be used for
anything persisted or replayed.
"""
from __future__ import annotations

import hashlib
import json
from typing import Any

_SEP = b"\x1f"


def stable_digest(*parts: object) -> str:
    """Hex SHA-256 over the string forms of ``parts``, order-sensitive."""
    h = hashlib.sha256()
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(_SEP)
    return h.hexdigest()


def stable_u64(*parts: object) -> int:
    """First 8 bytes of the stable digest as an unsigned integer."""
    return int(stable_digest(*parts)[:16], 16)


def stable_unit(*parts: object) -> float:
    """Deterministic float in [0, 1) derived from ``parts``.

    53 bits of the digest, so the value is exactly representable and the
    comparison ``stable_unit(...) < p`` behaves like a fixed Bernoulli draw.
    """
    return (stable_u64(*parts) >> 11) / float(1 << 53)


def canonical_json(obj: Any) -> str:
    """Deterministic JSON text: sorted keys, no whitespace variance."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def content_address(obj: Any) -> str:
    """Hex SHA-256 of the canonical JSON form of ``obj``."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()
