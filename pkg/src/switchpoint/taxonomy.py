"""Hierarchical concept dataset: categories, subcategories, concepts, contexts.

A taxonomy document is a versioned JSON file (see ``data/taxonomy.json``).
Each subcategory carries one yes/no question template with a single
``<concept>`` placeholder; each context carries a base-prompt template and a
concept-prompt template (the same scene with the ``<concept>`` slot filled).
Loaded taxonomies are immutable and safe to share across workers.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

from .errors import TaxonomyError
from .hashing import canonical_json, content_address

PLACEHOLDER = "<concept>"
PAIR_KEY_SEP = "|"


def contains_word(text: str, surface: str) -> bool:
    """Case-insensitive whole-word (or whole-phrase) containment check."""
    pattern = rf"(?<!\w){re.escape(surface)}(?!\w)"
    return re.search(pattern, text, re.IGNORECASE) is not None


def count_word(text: str, surface: str) -> int:
    pattern = rf"(?<!\w){re.escape(surface)}(?!\w)"
    return len(re.findall(pattern, text, re.IGNORECASE))


def fill_template(template: str, surface: str) -> str:
    """Substitute the placeholder, fixing an immediately preceding a/an.

    Only the article directly before the slot is touched, so template text
    elsewhere is reproduced verbatim.
    """

    def _fix_article(match: re.Match[str]) -> str:
        article = "an" if surface[:1].lower() in "aeiou" else "a"
        if match.group(1)[0].isupper():
            article = article.capitalize()
        return f"{article} {surface}"

    out = re.sub(rf"\b([Aa]n?) {re.escape(PLACEHOLDER)}", _fix_article, template)
    return out.replace(PLACEHOLDER, surface)


@dataclass(frozen=True)
class ContextPhrasing:
    """One wording of a context: base-prompt template + concept-prompt template."""

    base_template: str
    concept_template: str


@dataclass(frozen=True)
class Context:
    """A scene the concept is inserted into, with optional paraphrase variants.

    ``phrasings[0]`` is the canonical wording; the rest are semantically
    equivalent paraphrases stored statically for robustness studies.
    """

    name: str
    phrasings: tuple[ContextPhrasing, ...]

    @property
    def canonical(self) -> ContextPhrasing:
        return self.phrasings[0]


@dataclass(frozen=True)
class ConceptEntry:
    """A single fine-grained concept with its subcategory's question template."""

    category: str
    subcategory: str
    concept: str
    question_template: str
    contexts: tuple[Context, ...]

    def context_named(self, name: str) -> Context:
        for ctx in self.contexts:
            if ctx.name == name:
                return ctx
        raise KeyError(f"unknown context {name!r} for concept {self.concept!r}")


@dataclass(frozen=True)
class PromptPair:
    """Base prompt (concept absent) and concept prompt (concept present).

    ``variant`` is the phrasing index within the context: 0 is the canonical
    wording, higher values are the stored paraphrases.
    """

    base_prompt: str
    concept_prompt: str
    concept: ConceptEntry
    context: str
    variant: int = 0

    def __post_init__(self):
        surface = self.concept.concept
        if contains_word(self.base_prompt, surface):
            raise TaxonomyError(
                f"base prompt {self.base_prompt!r} already contains {surface!r}",
                path=self.key,
            )
        if not contains_word(self.concept_prompt, surface):
            raise TaxonomyError(
                f"concept prompt {self.concept_prompt!r} does not contain {surface!r}",
                path=self.key,
            )

    @property
    def key(self) -> str:
        base = PAIR_KEY_SEP.join(
            (
                self.concept.category,
                self.concept.subcategory,
                self.concept.concept,
                self.context,
            )
        )
        return f"{base}~v{self.variant}" if self.variant else base

    @property
    def question(self) -> str:
        return render_question(self.concept)


@dataclass(frozen=True)
class MultiPromptPair:
    """A prompt switch that introduces several target concepts at once.

    Success is always judged per target concept, each with its own question.
    """

    base_prompt: str
    concept_prompt: str
    targets: tuple[ConceptEntry, ...]
    context: str

    def __post_init__(self):
        if len(self.targets) < 2:
            raise TaxonomyError("multi-concept pair needs at least two targets")
        for entry in self.targets:
            if contains_word(self.base_prompt, entry.concept):
                raise TaxonomyError(
                    f"base prompt already contains {entry.concept!r}", path=self.key
                )
            if not contains_word(self.concept_prompt, entry.concept):
                raise TaxonomyError(
                    f"combined prompt does not render {entry.concept!r}", path=self.key
                )

    @property
    def key(self) -> str:
        names = "+".join(t.concept for t in self.targets)
        first = self.targets[0]
        return PAIR_KEY_SEP.join((first.category, first.subcategory, names, self.context))


@dataclass(frozen=True)
class PromptVariantSet:
    """Canonical pair plus paraphrased variants of the same concept/context."""

    canonical: PromptPair
    variants: tuple[PromptPair, ...]

    def __post_init__(self):
        for v in self.variants:
            if v.concept != self.canonical.concept:
                raise TaxonomyError("variant pairs must share the concept entry")

    def all_pairs(self) -> tuple[PromptPair, ...]:
        return (self.canonical, *self.variants)


class Taxonomy:
    """Immutable, indexed view over a validated taxonomy document."""

    def __init__(self, document: Mapping, entries: Sequence[ConceptEntry]):
        self._document = json.loads(canonical_json(document))
        self._entries = tuple(entries)
        self._by_triple = {
            (e.category, e.subcategory, e.concept): e for e in self._entries
        }

    @property
    def version(self) -> str:
        return self._document["version"]

    @property
    def document_hash(self) -> str:
        return content_address(self._document)

    def serialize(self) -> dict:
        return json.loads(canonical_json(self._document))

    def entries(self) -> Iterator[ConceptEntry]:
        return iter(self._entries)

    def entry(self, category: str, subcategory: str, concept: str) -> ConceptEntry:
        try:
            return self._by_triple[(category, subcategory, concept)]
        except KeyError:
            raise KeyError(
                f"no concept ({category!r}, {subcategory!r}, {concept!r}) in taxonomy"
            ) from None

    def find_concept(self, concept: str) -> ConceptEntry:
        """Look up a concept by surface string alone; must be unambiguous."""
        matches = [e for e in self._entries if e.concept == concept]
        if not matches:
            raise KeyError(f"no concept {concept!r} in taxonomy")
        if len(matches) > 1:
            where = ", ".join(f"{e.category}/{e.subcategory}" for e in matches)
            raise KeyError(f"concept {concept!r} is ambiguous ({where})")
        return matches[0]

    def categories(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for e in self._entries:
            seen.setdefault(e.category, None)
        return tuple(seen)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Taxonomy) and other._document == self._document

    def __len__(self) -> int:
        return len(self._entries)


def _require(condition: bool, message: str, path: str) -> None:
    if not condition:
        raise TaxonomyError(message, path=path)


def _parse_phrasing(raw: Mapping, path: str) -> ContextPhrasing:
    _require(isinstance(raw, Mapping), "context phrasing must be an object", path)
    base = raw.get("base")
    concept_form = raw.get("concept_form")
    _require(isinstance(base, str) and base.strip() != "", "missing base template", path)
    _require(
        isinstance(concept_form, str) and concept_form.count(PLACEHOLDER) == 1,
        f"concept_form must contain exactly one {PLACEHOLDER}",
        path,
    )
    _require(PLACEHOLDER not in base, f"base template must not contain {PLACEHOLDER}", path)
    return ContextPhrasing(base_template=base, concept_template=concept_form)


def load_taxonomy(source: str | Path | Mapping) -> Taxonomy:
    """Parse and validate a taxonomy document (path, JSON text, or mapping).

    Raises :class:`TaxonomyError` naming the offending path on any schema
    violation, including duplicate (category, subcategory, concept) triples.
    """
    if isinstance(source, Mapping):
        document = source
    else:
        text = Path(source).read_text(encoding="utf-8") if _looks_like_path(source) else str(source)
        try:
            document = json.loads(text)
        except json.JSONDecodeError as exc:
            raise TaxonomyError(f"invalid JSON: {exc}", path=str(source)) from exc

    _require(isinstance(document, Mapping), "document must be a JSON object", "$")
    _require(isinstance(document.get("version"), str), "missing string 'version'", "$.version")
    categories = document.get("categories")
    _require(isinstance(categories, list) and categories, "missing non-empty 'categories'", "$.categories")

    entries: list[ConceptEntry] = []
    seen_triples: set[tuple[str, str, str]] = set()
    for ci, cat in enumerate(categories):
        cpath = f"$.categories[{ci}]"
        _require(isinstance(cat, Mapping), "category must be an object", cpath)
        cname = cat.get("name")
        _require(isinstance(cname, str) and cname.strip() != "", "missing category name", cpath)
        subs = cat.get("subcategories")
        _require(isinstance(subs, list) and subs, "missing non-empty 'subcategories'", cpath)
        for si, sub in enumerate(subs):
            spath = f"{cpath}.subcategories[{si}]"
            _require(isinstance(sub, Mapping), "subcategory must be an object", spath)
            sname = sub.get("name")
            _require(isinstance(sname, str) and sname.strip() != "", "missing subcategory name", spath)
            template = sub.get("question_template")
            _require(
                isinstance(template, str) and template.count(PLACEHOLDER) == 1,
                f"question_template must contain exactly one {PLACEHOLDER}",
                f"{spath}.question_template",
            )
            concepts = sub.get("concepts")
            _require(
                isinstance(concepts, list) and len(concepts) > 0,
                "subcategory must list at least one concept",
                f"{spath}.concepts",
            )
            raw_contexts = sub.get("contexts")
            _require(
                isinstance(raw_contexts, list) and len(raw_contexts) > 0,
                "subcategory must list at least one context",
                f"{spath}.contexts",
            )
            contexts: list[Context] = []
            seen_ctx: set[str] = set()
            for xi, raw_ctx in enumerate(raw_contexts):
                xpath = f"{spath}.contexts[{xi}]"
                _require(isinstance(raw_ctx, Mapping), "context must be an object", xpath)
                xname = raw_ctx.get("name")
                _require(isinstance(xname, str) and xname.strip() != "", "missing context name", xpath)
                _require(xname not in seen_ctx, f"duplicate context name {xname!r}", xpath)
                seen_ctx.add(xname)
                phrasings = [_parse_phrasing(raw_ctx, xpath)]
                for vi, raw_variant in enumerate(raw_ctx.get("variants", ())):
                    phrasings.append(_parse_phrasing(raw_variant, f"{xpath}.variants[{vi}]"))
                contexts.append(Context(name=xname, phrasings=tuple(phrasings)))
            for ki, concept in enumerate(concepts):
                kpath = f"{spath}.concepts[{ki}]"
                _require(isinstance(concept, str) and concept.strip() != "", "concept must be a non-empty string", kpath)
                triple = (cname, sname, concept)
                _require(triple not in seen_triples, f"duplicate concept triple {triple}", kpath)
                seen_triples.add(triple)
                entries.append(
                    ConceptEntry(
                        category=cname,
                        subcategory=sname,
                        concept=concept,
                        question_template=template,
                        contexts=tuple(contexts),
                    )
                )
    return Taxonomy(document, entries)


def _looks_like_path(source: str | Path) -> bool:
    if isinstance(source, Path):
        return True
    stripped = source.lstrip()
    return not stripped.startswith("{")


def render_question(entry: ConceptEntry) -> str:
    """Instantiate the subcategory's question template for one concept."""
    question = fill_template(entry.question_template, entry.concept)
    if PLACEHOLDER in question or count_word(question, entry.concept) != 1:
        raise TaxonomyError(
            f"rendered question {question!r} malformed for {entry.concept!r}"
        )
    return question


def build_pair(entry: ConceptEntry, context: Context, phrasing_index: int = 0) -> PromptPair:
    phrasing = context.phrasings[phrasing_index]
    return PromptPair(
        base_prompt=phrasing.base_template,
        concept_prompt=fill_template(phrasing.concept_template, entry.concept),
        concept=entry,
        context=context.name,
        variant=phrasing_index,
    )


def strip_variant(pair_key: str) -> tuple[str, int]:
    """Split a pair key into its canonical part and variant index."""
    if "~v" in pair_key:
        head, _, tail = pair_key.rpartition("~v")
        if tail.isdigit():
            return head, int(tail)
    return pair_key, 0


def pair_from_key(taxonomy: Taxonomy, pair_key: str) -> PromptPair:
    """Rebuild the exact prompt pair a stored key refers to."""
    canonical, variant = strip_variant(pair_key)
    parts = canonical.split(PAIR_KEY_SEP)
    if len(parts) != 4:
        raise KeyError(f"malformed pair key {pair_key!r}")
    category, subcategory, concept, context = parts
    entry = taxonomy.entry(category, subcategory, concept)
    ctx = entry.context_named(context)
    if variant >= len(ctx.phrasings):
        raise KeyError(f"pair key {pair_key!r} names a missing phrasing variant")
    return build_pair(entry, ctx, variant)


def enumerate_pairs(
    taxonomy: Taxonomy,
    category: str | None = None,
    subcategory: str | None = None,
    concept: str | None = None,
    context: str | None = None,
) -> list[PromptPair]:
    """All canonical (base, concept) prompt pairs under the given selectors.

    Order is lexicographic by (category, subcategory, concept, context) and is
    a pure function of the taxonomy and filter. Unknown selector names raise
    ``KeyError``; selectors that match nothing yield an empty list.
    """
    _check_selector(taxonomy, category, subcategory, concept, context)
    selected: list[PromptPair] = []
    for entry in taxonomy.entries():
        if category is not None and entry.category != category:
            continue
        if subcategory is not None and entry.subcategory != subcategory:
            continue
        if concept is not None and entry.concept != concept:
            continue
        for ctx in entry.contexts:
            if context is not None and ctx.name != context:
                continue
            selected.append(build_pair(entry, ctx))
    selected.sort(key=lambda p: (p.concept.category, p.concept.subcategory, p.concept.concept, p.context))
    return selected


def _check_selector(
    taxonomy: Taxonomy,
    category: str | None,
    subcategory: str | None,
    concept: str | None,
    context: str | None,
) -> None:
    entries = list(taxonomy.entries())
    if category is not None and all(e.category != category for e in entries):
        raise KeyError(f"unknown category {category!r}")
    if subcategory is not None and all(e.subcategory != subcategory for e in entries):
        raise KeyError(f"unknown subcategory {subcategory!r}")
    if concept is not None and all(e.concept != concept for e in entries):
        raise KeyError(f"unknown concept {concept!r}")
    if context is not None and all(
        ctx.name != context for e in entries for ctx in e.contexts
    ):
        raise KeyError(f"unknown context {context!r}")


def variant_set(taxonomy: Taxonomy, category: str, subcategory: str, concept: str, context: str) -> PromptVariantSet:
    """The canonical pair plus all stored paraphrase-variant pairs."""
    entry = taxonomy.entry(category, subcategory, concept)
    ctx = entry.context_named(context)
    canonical = build_pair(entry, ctx, 0)
    variants = tuple(build_pair(entry, ctx, i) for i in range(1, len(ctx.phrasings)))
    return PromptVariantSet(canonical=canonical, variants=variants)


def combine_pairs(first: PromptPair, second: PromptPair) -> MultiPromptPair:
    """Merge two same-context pairs into one combined-concept prompt.

    Both concepts are rendered adjacently in the shared concept slot, e.g.
    "a photo of an old Asian person". Pairs from different contexts need an
    explicitly authored :class:`MultiPromptPair` instead.
    """
    if first.base_prompt != second.base_prompt:
        raise TaxonomyError("combine_pairs requires a shared context phrasing")
    ctx = first.concept.context_named(first.context)
    merged_surface = f"{first.concept.concept} {second.concept.concept}"
    combined = fill_template(ctx.canonical.concept_template, merged_surface)
    return MultiPromptPair(
        base_prompt=first.base_prompt,
        concept_prompt=combined,
        targets=(first.concept, second.concept),
        context=first.context,
    )
