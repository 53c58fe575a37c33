"""Concept-presence scoring: yes/no verdicts from images and questions.

Two scorer families implement one contract: an HTTP adapter for external
vision-language models, and a scriptable mock scorer paired with the
synthetic backend. Answers are normalized by a strict parse rule; anything
ambiguous fails loudly rather than biasing the success estimates.
"""
from __future__ import annotations

import base64
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

from .backend import GeneratedImage, SyntheticBackendSpec
from .errors import AnswerParseError, ScorerError
from .hashing import stable_unit
from .taxonomy import contains_word

Answer = str  # "yes" | "no"


@dataclass(frozen=True)
class ScorerVerdict:
    answer: Answer
    raw_text: str
    scorer_id: str


@dataclass(frozen=True)
class BatchFailure:
    """Terminal failure for one batch slot; other slots are unaffected."""

    index: int
    error: str
    attempts: int


class Scorer(Protocol):
    scorer_id: str

    def answer_text(self, image: GeneratedImage, question: str) -> str: ...


def parse_answer(raw_text: str) -> Answer:
    """Normalize scorer output to "yes"/"no".

    Case-insensitive; leading whitespace and punctuation are stripped; the
    first word must be yes or no. Anything else raises, never coerces.
    """
    stripped = raw_text.lstrip().lstrip("\"'.,;:!?()[]*-").lstrip()
    first = ""
    for ch in stripped:
        if ch.isalpha():
            first += ch
        else:
            break
    first = first.lower()
    if first == "yes":
        return "yes"
    if first == "no":
        return "no"
    raise AnswerParseError(raw_text)


def metadata_rule(image: GeneratedImage, question: str) -> bool:
    """Default mock rule: some concept tagged on the image occurs in the question."""
    return any(contains_word(question, concept) for concept in image.concepts())


@dataclass(frozen=True)
class MockScript:
    """Deterministic scoring script with an optional Bernoulli answer flip.

    The flip decision is a pure function of (seed, image ref, question), so a
    given scorer configuration always returns the same verdict for the same
    input; across distinct inputs flips occur at rate ``flip_probability``.
    """

    rule: Callable[[GeneratedImage, str], bool] = metadata_rule
    flip_probability: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.flip_probability < 0.5:
            raise ValueError("flip probability must be in [0, 0.5)")

    def decide(self, image: GeneratedImage, question: str) -> bool:
        truthful = self.rule(image, question)
        if self.flip_probability > 0.0:
            draw = stable_unit("mock-flip", self.seed, image.ref, question)
            if draw < self.flip_probability:
                return not truthful
        return truthful


class MockScorer:
    """Scorer over a :class:`MockScript`; exact when the flip probability is 0."""

    def __init__(self, script: MockScript | None = None):
        self.script = script or MockScript()
        eps = self.script.flip_probability
        self.scorer_id = f"mock/1?eps={eps:g}&seed={self.script.seed}"

    @classmethod
    def for_backend(cls, spec: SyntheticBackendSpec, seed: int = 0) -> "MockScorer":
        """Mock scorer paired with a synthetic backend's configured noise."""
        return cls(MockScript(flip_probability=spec.flip_probability, seed=seed))

    def answer_text(self, image: GeneratedImage, question: str) -> str:
        return "yes" if self.script.decide(image, question) else "no"


class HttpScorer:
    """Adapter for an external VQA endpoint.

    Wire contract: request {"image": base64 PNG, "question": str}, response
    {"text": str}. Interchangeable across Qwen-class, LLaVA-class, and
    similar endpoints; the configured ``scorer_id`` rides along on every
    verdict for provenance. ``client`` accepts any httpx-compatible client,
    which also makes the contract testable without a network.
    """

    def __init__(self, endpoint: str, scorer_id: str, timeout: float = 60.0, client=None):
        self.endpoint = endpoint
        self.scorer_id = scorer_id
        self.timeout = timeout
        self._client = client

    def _http(self):
        if self._client is None:
            import httpx

            self._client = httpx.Client(timeout=self.timeout)
        return self._client

    def answer_text(self, image: GeneratedImage, question: str) -> str:
        payload = {
            "image": base64.b64encode(image.png_bytes).decode("ascii"),
            "question": question,
        }
        try:
            reply = self._http().post(self.endpoint, json=payload)
            reply.raise_for_status()
        except Exception as exc:
            raise ScorerError(f"scorer endpoint {self.endpoint} failed: {exc}") from exc
        body = reply.json()
        if "text" not in body:
            raise ScorerError(f"scorer response missing 'text': {body!r}", retryable=False)
        return str(body["text"])


def assess(image: GeneratedImage, question: str, scorer: Scorer) -> ScorerVerdict:
    """One yes/no verdict for one image and question."""
    if not question.strip():
        raise ValueError("question must be non-empty")
    raw = scorer.answer_text(image, question)
    return ScorerVerdict(answer=parse_answer(raw), raw_text=raw, scorer_id=scorer.scorer_id)


def batch_assess(
    items: Sequence[tuple[GeneratedImage, str]],
    scorer: Scorer,
    concurrency_limit: int = 4,
    max_retries: int = 2,
    backoff_base: float = 0.25,
) -> list[ScorerVerdict | BatchFailure]:
    """Assess many (image, question) pairs; results stay in input order.

    Retryable scorer errors back off exponentially up to ``max_retries``;
    a slot that exhausts its retries is returned as a :class:`BatchFailure`
    without disturbing the rest of the batch.
    """
    if concurrency_limit < 1:
        raise ValueError("concurrency limit must be >= 1")

    def one(index: int) -> ScorerVerdict | BatchFailure:
        image, question = items[index]
        attempts = 0
        while True:
            attempts += 1
            try:
                return assess(image, question, scorer)
            except ScorerError as exc:
                if not exc.retryable or attempts > max_retries:
                    return BatchFailure(index=index, error=str(exc), attempts=attempts)
                time.sleep(backoff_base * (2 ** (attempts - 1)))

    with ThreadPoolExecutor(max_workers=concurrency_limit) as pool:
        return list(pool.map(one, range(len(items))))


def agreement_verdicts(
    items: Sequence[tuple[GeneratedImage, str]],
    scorers: Sequence[Scorer],
    concurrency_limit: int = 4,
) -> dict[str, list[ScorerVerdict | BatchFailure]]:
    """Score one run set with several scorers for cross-scorer comparison.

    Each scorer sees the identical items in the identical order, so the
    resulting per-scorer curves are comparable point-wise.
    """
    return {
        scorer.scorer_id: batch_assess(items, scorer, concurrency_limit=concurrency_limit)
        for scorer in scorers
    }
