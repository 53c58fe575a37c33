from __future__ import annotations

import json

import pytest

from switchpoint.errors import TaxonomyError
from switchpoint.taxonomy import (
    build_pair,
    combine_pairs,
    count_word,
    enumerate_pairs,
    load_taxonomy,
    pair_from_key,
    render_question,
    variant_set,
)

MINIMAL = {
    "version": "test",
    "categories": [
        {
            "name": "Objects",
            "subcategories": [
                {
                    "name": "Animals",
                    "question_template": "Is there a <concept> in the image?",
                    "concepts": ["horse"],
                    "contexts": [
                        {
                            "name": "park",
                            "base": "an image of a park",
                            "concept_form": "an image of a park with a <concept>",
                        }
                    ],
                }
            ],
        }
    ],
}


def test_load_minimal_document():
    tax = load_taxonomy(MINIMAL)
    entry = tax.entry("Objects", "Animals", "horse")
    assert entry.question_template == "Is there a <concept> in the image?"


def test_age_group_has_five_concepts(taxonomy):
    pairs = enumerate_pairs(taxonomy, subcategory="Age group", context="playground")
    assert sorted(p.concept.concept for p in pairs) == ["adult", "baby", "child", "old", "teenager"]


def test_animals_context_count_is_eight(taxonomy):
    pairs = enumerate_pairs(taxonomy, subcategory="Animals", concept="horse")
    assert len(pairs) == 8


def test_empty_concepts_rejected():
    doc = json.loads(json.dumps(MINIMAL))
    doc["categories"][0]["subcategories"][0]["concepts"] = []
    with pytest.raises(TaxonomyError) as err:
        load_taxonomy(doc)
    assert "concepts" in str(err.value)


def test_duplicate_triple_rejected():
    doc = json.loads(json.dumps(MINIMAL))
    doc["categories"][0]["subcategories"][0]["concepts"] = ["horse", "horse"]
    with pytest.raises(TaxonomyError):
        load_taxonomy(doc)


def test_template_without_placeholder_rejected():
    doc = json.loads(json.dumps(MINIMAL))
    doc["categories"][0]["subcategories"][0]["question_template"] = "Is there an animal?"
    with pytest.raises(TaxonomyError) as err:
        load_taxonomy(doc)
    assert "question_template" in str(err.value)


def test_parse_error_names_offending_path():
    doc = json.loads(json.dumps(MINIMAL))
    doc["categories"][0]["subcategories"][0]["contexts"][0]["concept_form"] = "no slot here"
    with pytest.raises(TaxonomyError) as err:
        load_taxonomy(doc)
    assert "$.categories[0].subcategories[0].contexts[0]" in str(err.value)


def test_serialize_round_trip(taxonomy):
    assert load_taxonomy(taxonomy.serialize()) == taxonomy


def test_render_question_examples(taxonomy):
    assert render_question(taxonomy.entry("Objects", "Animals", "horse")) == "Is there a horse in the image?"
    assert render_question(taxonomy.entry("Demographics", "Age group", "baby")) == "Is the person in the image a baby?"


def test_rendered_question_contains_concept_exactly_once(taxonomy):
    for entry in taxonomy.entries():
        question = render_question(entry)
        assert "<concept>" not in question
        assert count_word(question, entry.concept) == 1


def test_pair_invariants_hold_for_all_shipped_pairs(taxonomy):
    pairs = enumerate_pairs(taxonomy)
    assert pairs  # construction already validates base/concept containment
    for pair in pairs:
        assert count_word(pair.base_prompt, pair.concept.concept) == 0
        assert count_word(pair.concept_prompt, pair.concept.concept) >= 1


def test_enumerate_is_deterministic_and_lexicographic(taxonomy):
    once = enumerate_pairs(taxonomy, category="Demographics")
    twice = enumerate_pairs(taxonomy, category="Demographics")
    assert once == twice
    keys = [(p.concept.category, p.concept.subcategory, p.concept.concept, p.context) for p in once]
    assert keys == sorted(keys)


def test_enumerate_counts_concepts_times_contexts(taxonomy):
    pairs = enumerate_pairs(taxonomy, subcategory="Age group")
    assert len(pairs) == 5 * 8


def test_unknown_selector_raises_lookup_error(taxonomy):
    with pytest.raises(KeyError):
        enumerate_pairs(taxonomy, subcategory="Spaceships")


def test_selector_matching_nothing_is_empty(taxonomy):
    # valid names that never co-occur
    assert enumerate_pairs(taxonomy, category="Style", concept="horse") == []


def test_variant_set_shares_concept(taxonomy):
    vs = variant_set(taxonomy, "Objects", "Animals", "horse", "park")
    assert len(vs.variants) == 4
    assert all(v.concept == vs.canonical.concept for v in vs.variants)
    assert vs.variants[0].base_prompt == "a photo of a park"
    assert {v.key for v in vs.all_pairs()} == {
        "Objects|Animals|horse|park",
        "Objects|Animals|horse|park~v1",
        "Objects|Animals|horse|park~v2",
        "Objects|Animals|horse|park~v3",
        "Objects|Animals|horse|park~v4",
    }


def test_pair_from_key_round_trip(taxonomy):
    for pair in enumerate_pairs(taxonomy, subcategory="Animals", concept="cat"):
        assert pair_from_key(taxonomy, pair.key) == pair
    vs = variant_set(taxonomy, "Objects", "Animals", "horse", "park")
    for pair in vs.all_pairs():
        assert pair_from_key(taxonomy, pair.key) == pair


def test_combine_pairs_renders_both_surfaces(taxonomy):
    old = build_pair(
        taxonomy.entry("Demographics", "Age group", "old"),
        taxonomy.entry("Demographics", "Age group", "old").context_named("city park"),
    )
    # same context phrasing required, so combine within one subcategory's context
    teen = build_pair(
        taxonomy.entry("Demographics", "Age group", "teenager"),
        taxonomy.entry("Demographics", "Age group", "teenager").context_named("city park"),
    )
    multi = combine_pairs(old, teen)
    assert "old" in multi.concept_prompt and "teenager" in multi.concept_prompt
    assert len(multi.targets) == 2


def test_article_agreement_in_prompts(taxonomy):
    old = enumerate_pairs(taxonomy, concept="old", context="city park")[0]
    assert "an old person" in old.concept_prompt
    baby = enumerate_pairs(taxonomy, concept="baby", context="city park")[0]
    assert "a baby person" in baby.concept_prompt
