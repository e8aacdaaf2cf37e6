"""Masked-LM next-item prediction.

The pipeline per context: build one prompt per mask count, expand the mask
slots greedily through a fill-mask backend, pool the per-mask-count
candidate groups (rescaled by relative corpus frequency, max across
groups), then filter to usable nouns and renormalize.

Multi-token expansion follows a left-to-right beam: the first mask keeps a
wide front, every later mask keeps the top 15 continuations per beam, each
kept slice is renormalized to sum one before chaining by multiplication,
and each level is pruned to the mask count's candidate budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .backends import MaskBackend
from .cleaning import NounMorphology, lemmatize_noun
from .corpus import FrequencyTable
from .errors import ConfigurationError, ValidationError
from .predictors import (
    Approach,
    FunctionSpec,
    PredictionContext,
    PredictionDistribution,
)

MASK_COUNTS: tuple[int, ...] = (1, 2, 3, 4)

# Final candidate budget per mask count; the budget also caps each beam level.
CANDIDATE_BUDGETS: dict[int, int] = {1: 3000, 2: 1500, 3: 400, 4: 100}

FIRST_MASK_WIDTH = 100
NEXT_MASK_WIDTH = 15

TEMPLATE_IDS: tuple[int, ...] = (1, 2, 3, 4)


def _filled_phrase(context_items: Sequence[str], slot: str) -> str:
    """"the apple, the banana, and the <slot>" (commas only with 2+ items)."""
    pieces = [f"the {item}" for item in context_items]
    if not pieces:
        return f"the {slot}"
    if len(pieces) == 1:
        return f"{pieces[0]} and the {slot}"
    return ", ".join(pieces) + f", and the {slot}"


def build_prompt(
    category: str,
    context_items: Sequence[str],
    mask_count: int,
    mask_token: str,
    template_id: int,
) -> str:
    """Render one of the four prompt templates.

    The mask slot is mask_count copies of the mask token, back to back, so
    the model fills one word in as many pieces. With no context items the
    enumeration collapses to a single "the <slot>".
    """
    if template_id not in TEMPLATE_IDS:
        raise ConfigurationError(f"template_id must be in {TEMPLATE_IDS}, got {template_id}")
    if mask_count not in MASK_COUNTS:
        raise ValidationError(f"mask_count must be in {MASK_COUNTS}, got {mask_count}")
    slot = mask_token * mask_count
    phrase = _filled_phrase(context_items, slot)
    leading = "T" + phrase[1:]  # "the ..." -> "The ..." at sentence start
    if template_id == 1:
        return f"{leading} are examples of {category}."
    if template_id == 2:
        return f"Examples of {category} are {phrase}."
    if template_id == 3:
        return f"{leading} are the first {category} that come to my mind."
    return f"The first {category} that come to my mind are {phrase}."


def _decode_piece(token: str) -> tuple[str, bool]:
    """Surface text of a sub-word token and whether it starts a new word."""
    if token.startswith("##"):
        return token[2:], False
    if token.startswith("Ġ"):  # byte-level BPE word boundary
        return token[1:], True
    if token.startswith("▁"):  # sentencepiece word boundary
        return token[1:], True
    return token, False


@dataclass(frozen=True)
class _Beam:
    prompt: str
    word: str
    prob: float


def fill_masks_greedy(
    backend: MaskBackend,
    prompt: str,
    mask_count: int,
    budget: int | None = None,
) -> list[tuple[str, float]]:
    """Expand a prompt's mask slot into whole-word candidates.

    Returns (word, probability) pairs sorted by probability descending,
    ties alphabetical. Words are lowercased; identical surface forms from
    different expansion paths have their probabilities summed.
    """
    if mask_count not in MASK_COUNTS:
        raise ValidationError(f"mask_count must be in {MASK_COUNTS}, got {mask_count}")
    if budget is None:
        budget = CANDIDATE_BUDGETS[mask_count]
    if budget < 1:
        raise ValidationError(f"budget must be at least 1, got {budget}")

    beams = [_Beam(prompt=prompt, word="", prob=1.0)]
    for step in range(mask_count):
        width = (budget if mask_count == 1 else FIRST_MASK_WIDTH) if step == 0 else NEXT_MASK_WIDTH
        grown: list[_Beam] = []
        for beam in beams:
            masks = backend.fill(beam.prompt, top_n=width)
            options = masks[0][:width] if masks else []
            if options:
                # the kept slice is rescaled to a proper distribution at
                # every step, so a beam's continuations always sum to one
                total = sum(p for _, p in options)
                if total <= 0:
                    options = []
                else:
                    options = [(tok, p / total) for tok, p in options]
            for token, prob in options:
                surface, boundary = _decode_piece(token)
                if not surface.strip():
                    continue
                insert = (" " if boundary and beam.word else "") + surface
                grown.append(
                    _Beam(
                        prompt=beam.prompt.replace(backend.mask_token, insert, 1),
                        word=beam.word + insert,
                        prob=beam.prob * prob,
                    )
                )
        grown.sort(key=lambda b: (-b.prob, b.word))
        beams = grown[:budget]
        if not beams:
            return []

    totals: dict[str, float] = {}
    for beam in beams:
        word = beam.word.strip().lower()
        if word:
            totals[word] = totals.get(word, 0.0) + beam.prob
    return sorted(totals.items(), key=lambda e: (-e[1], e[0]))


def assemble_prediction_set(
    backend: MaskBackend,
    category: str,
    context_items: Sequence[str],
    template_id: int,
    frequency: FrequencyTable,
    mask_counts: Sequence[int] = MASK_COUNTS,
) -> list[tuple[str, float]]:
    """Pool candidates across mask counts into one weighted set.

    Each group's chained probabilities are rescaled by relative corpus
    frequency (words missing from the table get the smallest observed
    relative frequency), groups are merged by taking the maximum weight per
    word, and the result is renormalized to sum one.
    """
    total_count = frequency.total
    counts = list(frequency.unigrams.values()) + list(frequency.bigrams.values())
    if not counts or total_count <= 0:
        raise ValidationError("frequency table is empty")
    floor_rel = min(counts) / total_count

    merged: dict[str, float] = {}
    for mask_count in mask_counts:
        prompt = build_prompt(category, context_items, mask_count, backend.mask_token, template_id)
        for word, prob in fill_masks_greedy(backend, prompt, mask_count):
            count = frequency.count(word)
            rel = count / total_count if count > 0 else floor_rel
            weight = prob * rel
            if weight > merged.get(word, 0.0):
                merged[word] = weight

    total = sum(merged.values())
    if total <= 0:
        return []
    return sorted(
        ((word, weight / total) for word, weight in merged.items()),
        key=lambda e: (-e[1], e[0]),
    )


def _is_noun(word: str, nouns: frozenset[str], morphology: NounMorphology | None) -> bool:
    if word in nouns:
        return True
    last = word.rsplit(" ", 1)[-1]
    if last in nouns:
        return True
    lemma = lemmatize_noun(word, morphology).rsplit(" ", 1)[-1]
    return lemma in nouns


def drop_and_merge(
    weighted: Iterable[tuple[str, float]],
    stopwords: frozenset[str] = frozenset(),
    nouns: frozenset[str] | None = None,
    morphology: NounMorphology | None = None,
) -> dict[str, float]:
    """The context-independent filter steps: stopword drop, noun check,
    lemmatize, merge duplicate lemmas by summing. No renormalization."""
    merged: dict[str, float] = {}
    for word, weight in weighted:
        if weight <= 0:
            continue
        lemma = lemmatize_noun(word, morphology)
        if word in stopwords or lemma in stopwords:
            continue
        if nouns is not None and not _is_noun(word, nouns, morphology):
            continue
        merged[lemma] = merged.get(lemma, 0.0) + weight
    return merged


def filter_predictions(
    weighted: Iterable[tuple[str, float]],
    stopwords: frozenset[str] = frozenset(),
    nouns: frozenset[str] | None = None,
    used: frozenset[str] = frozenset(),
    morphology: NounMorphology | None = None,
) -> list[tuple[str, float]]:
    """Keep usable noun lemmas and renormalize.

    Drops stopwords, non-nouns and already-used words (checked both on the
    surface form and on the lemma), merges duplicate lemmas by summing,
    renormalizes to sum one, and sorts by probability descending with
    alphabetical ties. Idempotent: filtering a filtered list is a no-op.
    """
    pruned = ((word, weight) for word, weight in weighted if word not in used)
    merged = drop_and_merge(pruned, stopwords=stopwords, nouns=nouns, morphology=morphology)
    kept = {word: weight for word, weight in merged.items() if word not in used}
    total = sum(kept.values())
    if not kept or total <= 0:
        return []
    return sorted(
        ((word, weight / total) for word, weight in kept.items()),
        key=lambda e: (-e[1], e[0]),
    )


def predict_mlm(
    spec: FunctionSpec,
    context: PredictionContext,
    backend: MaskBackend,
    frequency: FrequencyTable,
    nouns: frozenset[str],
    stopwords: frozenset[str],
    morphology: NounMorphology | None = None,
    limit: int | None = None,
) -> PredictionDistribution:
    """Full masked-LM prediction for one context.

    The coverage vocabulary is per context: the lemmatized decoded nouns
    that survive filtering, before any truncation.
    """
    if spec.approach is not Approach.MLM:
        raise ConfigurationError(f"predict_mlm called with approach {spec.approach.value!r}")
    assert spec.context_size is not None and spec.prompt_id is not None
    window = context.preceding_items[-spec.context_size:] if spec.context_size else ()
    pooled = assemble_prediction_set(
        backend, context.category, window, spec.prompt_id, frequency
    )
    filtered = filter_predictions(
        pooled,
        stopwords=stopwords,
        nouns=nouns if nouns else None,
        used=context.used_items,
        morphology=morphology,
    )
    coverage = frozenset(word for word, _ in filtered)
    candidates = tuple(filtered[:limit] if limit is not None else filtered)
    return PredictionDistribution(candidates=candidates, coverage_vocabulary=coverage)
