"""Exception types raised across the toolkit."""
from __future__ import annotations


class SwitchpointError(Exception):
    """Base class for all toolkit errors."""


class TaxonomyError(SwitchpointError):
    """Taxonomy document violates the schema; ``path`` names the offending node."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{message} (at {path})" if path else message)


class GridError(SwitchpointError, ValueError):
    """Invalid timestep-grid argument."""


class BackendError(SwitchpointError):
    """Generative backend failure; carries the step index where it occurred."""

    def __init__(self, message: str, step_k: int | None = None):
        self.step_k = step_k
        suffix = f" (step {step_k})" if step_k is not None else ""
        super().__init__(message + suffix)


class ScorerError(SwitchpointError):
    """Scorer adapter failure; carries retry metadata for the orchestrator."""

    def __init__(self, message: str, attempts: int = 1, retryable: bool = True):
        self.attempts = attempts
        self.retryable = retryable
        super().__init__(message)


class AnswerParseError(ScorerError):
    """Scorer answer text could not be normalized to yes/no."""

    def __init__(self, raw_text: str):
        self.raw_text = raw_text
        super().__init__(f"unparseable scorer answer: {raw_text!r}", retryable=False)


class SeedPoolError(SwitchpointError):
    """Seed filtering could not reach the requested pool size."""

    def __init__(self, message: str, attempted: int = 0, valid: int = 0, target: int = 0):
        self.attempted = attempted
        self.valid = valid
        self.target = target
        super().__init__(message)


class ManifestError(SwitchpointError):
    """Experiment manifest draft failed validation."""


class StoreError(SwitchpointError):
    """Results store is missing or inconsistent."""
