"""Next-item prediction functions over fluency-list contexts.

A prediction function takes the category plus the items produced so far and
returns a ranked probability distribution over candidate next items. The
non-LM families live here:

* random baseline: corpus-frequency weights over a unigram/bigram table;
* norms walk: association strengths from the category cue;
* embedding: mean cosine similarity to the category and the last few items,
  turned into probabilities with a softmax over the kept candidates.

Masked-LM prediction has its own module (mlm); build_predictor wires all
families behind one interface.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping, Sequence

import numpy as np

from .cleaning import NounMorphology, lemmatize_noun
from .corpus import AssociationNorms, EmbeddingTable, FluencyList, FrequencyTable
from .errors import ConfigurationError, ValidationError

CONTEXT_SIZES: tuple[int, ...] = (0, 1, 3, 5)
PROMPT_IDS: tuple[int, ...] = (1, 2, 3, 4)

_PROB_SLACK = 1e-6


class Approach(str, Enum):
    RANDOM_BASELINE = "random_baseline"
    NORMS_USF = "norms_usf"
    NORMS_SWOW = "norms_swow"
    EMBEDDING_W2V = "embedding_w2v"
    EMBEDDING_GLOVE = "embedding_glove"
    MLM = "mlm"


_NEEDS_CONTEXT = {Approach.EMBEDDING_W2V, Approach.EMBEDDING_GLOVE, Approach.MLM}

_SHORT_NAMES = {
    Approach.RANDOM_BASELINE: "random",
    Approach.NORMS_USF: "usf",
    Approach.NORMS_SWOW: "swow",
    Approach.EMBEDDING_W2V: "w2v",
    Approach.EMBEDDING_GLOVE: "glove",
    Approach.MLM: "mlm",
}


@dataclass(frozen=True)
class FunctionSpec:
    """One concrete prediction function: approach plus its knobs.

    context_size is required for embedding and masked-LM functions and must
    be one of CONTEXT_SIZES; prompt_id is required for masked-LM functions.
    The label defaults to a readable unique name and is what score matrices
    and traces refer to.
    """

    approach: Approach
    context_size: int | None = None
    prompt_id: int | None = None
    label: str = ""

    def __post_init__(self) -> None:
        approach = Approach(self.approach)
        object.__setattr__(self, "approach", approach)
        if approach in _NEEDS_CONTEXT:
            if self.context_size not in CONTEXT_SIZES:
                raise ConfigurationError(
                    f"{approach.value} needs context_size in {CONTEXT_SIZES}, "
                    f"got {self.context_size!r}"
                )
        elif self.context_size is not None:
            raise ConfigurationError(f"{approach.value} does not take a context_size")
        if approach is Approach.MLM:
            if self.prompt_id not in PROMPT_IDS:
                raise ConfigurationError(
                    f"mlm needs prompt_id in {PROMPT_IDS}, got {self.prompt_id!r}"
                )
        elif self.prompt_id is not None:
            raise ConfigurationError(f"{approach.value} does not take a prompt_id")
        if not self.label:
            object.__setattr__(self, "label", self._default_label())

    def _default_label(self) -> str:
        short = _SHORT_NAMES[self.approach]
        if self.approach is Approach.MLM:
            return f"mlm_p{self.prompt_id}_ct{self.context_size}"
        if self.approach in _NEEDS_CONTEXT:
            return f"{short}_ct{self.context_size}"
        return short


class FunctionRegistry:
    """Ordered collection of FunctionSpecs with unique labels.

    Registry order is the tie-break order everywhere downstream, so it is
    part of an experiment's definition.
    """

    def __init__(self, specs: Sequence[FunctionSpec]):
        if not specs:
            raise ConfigurationError("a function registry needs at least one function")
        labels = [spec.label for spec in specs]
        dupes = {lbl for lbl in labels if labels.count(lbl) > 1}
        if dupes:
            raise ConfigurationError(f"duplicate function labels: {sorted(dupes)}")
        self.specs: tuple[FunctionSpec, ...] = tuple(specs)
        self._index = {spec.label: i for i, spec in enumerate(self.specs)}

    def __iter__(self) -> Iterator[FunctionSpec]:
        return iter(self.specs)

    def __len__(self) -> int:
        return len(self.specs)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(spec.label for spec in self.specs)

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"unknown function label {label!r}") from None

    def get(self, label: str) -> FunctionSpec:
        return self.specs[self.index(label)]


@dataclass(frozen=True)
class PredictionContext:
    """What a prediction function may look at before position n.

    preceding_items is the (possibly windowed) recent-item suffix used to
    build queries and prompts; used_items is every item produced so far and
    is what gets censored from candidate sets.
    """

    category: str
    preceding_items: tuple[str, ...] = ()
    used_items: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not self.category:
            raise ValidationError("prediction context has an empty category")
        for item in self.preceding_items:
            if item not in self.used_items:
                raise ValidationError(
                    f"context window item {item!r} is missing from used_items"
                )

    @classmethod
    def for_position(
        cls, fluency_list: FluencyList, position: int, context_size: int | None = None
    ) -> "PredictionContext":
        """Context for predicting item `position` (1-based) of a list."""
        if not 1 <= position <= len(fluency_list):
            raise ValidationError(
                f"position {position} out of range for list of {len(fluency_list)}"
            )
        prior = fluency_list.items[: position - 1]
        window = prior if context_size is None else (prior[-context_size:] if context_size else ())
        return cls(
            category=fluency_list.category,
            preceding_items=tuple(window),
            used_items=frozenset(prior),
        )


@dataclass(frozen=True)
class PredictionDistribution:
    """Ranked candidates with probabilities, plus the coverage vocabulary.

    Candidates are sorted by probability descending, ties alphabetical, and
    always sum to at most one (truncation may leave mass unaccounted for).
    coverage_vocabulary is every word the function could in principle
    produce; candidates are a subset of it.
    """

    candidates: tuple[tuple[str, float], ...]
    coverage_vocabulary: frozenset[str]

    def __post_init__(self) -> None:
        total = 0.0
        previous: tuple[float, str] | None = None
        seen: set[str] = set()
        for word, prob in self.candidates:
            if not word:
                raise ValidationError("prediction distribution contains an empty word")
            if word in seen:
                raise ValidationError(f"duplicate candidate {word!r}")
            seen.add(word)
            if not 0.0 < prob <= 1.0 + _PROB_SLACK:
                raise ValidationError(f"candidate {word!r} has probability {prob}")
            key = (-prob, word)
            if previous is not None and key < previous:
                raise ValidationError(
                    f"candidates out of order at {word!r} (sort by prob desc, then word)"
                )
            previous = key
            total += prob
            if word not in self.coverage_vocabulary:
                raise ValidationError(f"candidate {word!r} missing from coverage vocabulary")
        if total > 1.0 + _PROB_SLACK:
            raise ValidationError(f"candidate probabilities sum to {total}")

    def __len__(self) -> int:
        return len(self.candidates)

    @property
    def _lookup(self) -> dict[str, tuple[int, float]]:
        cached = getattr(self, "_lookup_cache", None)
        if cached is None:
            cached = {
                word: (rank, prob)
                for rank, (word, prob) in enumerate(self.candidates, start=1)
            }
            object.__setattr__(self, "_lookup_cache", cached)
        return cached

    def probability(self, word: str) -> float | None:
        entry = self._lookup.get(word)
        return entry[1] if entry else None

    def rank(self, word: str) -> int | None:
        """1-based rank of word among the candidates, None if absent."""
        entry = self._lookup.get(word)
        return entry[0] if entry else None

    def top(self, k: int) -> tuple[str, ...]:
        return tuple(word for word, _ in self.candidates[:k])


def build_distribution(
    weights: Mapping[str, float],
    coverage: frozenset[str],
    used: frozenset[str] = frozenset(),
    limit: int | None = None,
) -> PredictionDistribution:
    """Censor used words, renormalize, rank, and truncate.

    Truncation happens after renormalization, so the kept candidates retain
    their exact post-censoring probabilities.
    """
    kept = [(word, w) for word, w in weights.items() if w > 0 and word not in used]
    total = sum(w for _, w in kept)
    if not kept or total <= 0:
        return PredictionDistribution(candidates=(), coverage_vocabulary=coverage)
    ranked = sorted(((word, w / total) for word, w in kept), key=lambda e: (-e[1], e[0]))
    if limit is not None:
        ranked = ranked[:limit]
    return PredictionDistribution(candidates=tuple(ranked), coverage_vocabulary=coverage)


def predict_random_baseline(
    context: PredictionContext, frequency: FrequencyTable, limit: int | None = None
) -> PredictionDistribution:
    """Corpus-frequency probability over the table's terms minus used items.

    With nothing used, p(t) = count(t) / total; censoring renormalizes the
    surviving counts. The context words themselves never matter.
    """
    weights = {term: float(frequency.count(term)) for term in frequency.terms}
    return build_distribution(weights, frequency.terms, context.used_items, limit)


def predict_norms_walk(
    context: PredictionContext, norms: AssociationNorms, limit: int | None = None
) -> PredictionDistribution:
    """Association strength from the category cue, censored and renormalized.

    A category absent from the norms yields an empty distribution with an
    empty coverage vocabulary.
    """
    responses = norms.entries.get(context.category, {})
    coverage = frozenset(responses)
    return build_distribution(dict(responses), coverage, context.used_items, limit)


class _EmbeddingIndex:
    """Unit-normalized matrix view of an EmbeddingTable, built once."""

    def __init__(self, table: EmbeddingTable):
        self.words: list[str] = sorted(table.vectors)
        matrix = np.stack([table.vectors[w] for w in self.words]).astype(np.float64)
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        self.matrix = matrix / norms
        self.row = {w: i for i, w in enumerate(self.words)}


_EMBEDDING_INDEXES: "weakref.WeakKeyDictionary[EmbeddingTable, _EmbeddingIndex]"
_EMBEDDING_INDEXES = weakref.WeakKeyDictionary()


def _embedding_index(table: EmbeddingTable) -> _EmbeddingIndex:
    index = _EMBEDDING_INDEXES.get(table)
    if index is None:
        index = _EmbeddingIndex(table)
        _EMBEDDING_INDEXES[table] = index
    return index


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def predict_embedding(
    context: PredictionContext,
    table: EmbeddingTable,
    context_size: int,
    limit: int | None = None,
) -> PredictionDistribution:
    """Mean cosine similarity to the query, softmaxed over the kept top.

    The query is the category plus the last min(context_size, available)
    items, restricted to words in the table. Query words and used words are
    excluded from the candidates. With no query word in the table the
    distribution is empty; the coverage vocabulary is always the table's.
    """
    if context_size not in CONTEXT_SIZES:
        raise ConfigurationError(f"context_size must be in {CONTEXT_SIZES}, got {context_size}")
    window = context.preceding_items[-context_size:] if context_size else ()
    query: list[str] = []
    for word in (context.category, *window):
        if word in table and word not in query:
            query.append(word)
    coverage = table.words
    if not query:
        return PredictionDistribution(candidates=(), coverage_vocabulary=coverage)

    index = _embedding_index(table)
    query_mean = np.mean([index.matrix[index.row[w]] for w in query], axis=0)
    scores = index.matrix @ query_mean
    excluded = context.used_items | set(query)
    scored = [
        (word, scores[i]) for i, word in enumerate(index.words) if word not in excluded
    ]
    if not scored:
        return PredictionDistribution(candidates=(), coverage_vocabulary=coverage)
    scored.sort(key=lambda e: (-e[1], e[0]))
    if limit is not None:
        scored = scored[:limit]
    values = np.array([s for _, s in scored], dtype=np.float64)
    exps = np.exp(values - values.max())
    probs = exps / exps.sum()
    candidates = tuple((word, float(p)) for (word, _), p in zip(scored, probs))
    return PredictionDistribution(candidates=candidates, coverage_vocabulary=coverage)


@dataclass
class ResourceBundle:
    """Everything prediction functions may need, all optional.

    Filtering (stopword removal, noun check, lemma merge) kicks in for every
    approach as soon as nouns or stopwords are configured; the masked-LM
    family additionally requires the frequency table and a backend.
    """

    frequency: FrequencyTable | None = None
    usf: AssociationNorms | None = None
    swow: AssociationNorms | None = None
    w2v: EmbeddingTable | None = None
    glove: EmbeddingTable | None = None
    nouns: frozenset[str] | None = None
    stopwords: frozenset[str] | None = None
    backend: object | None = None
    morphology: NounMorphology | None = None

    @property
    def filtering_active(self) -> bool:
        return self.nouns is not None or self.stopwords is not None


class Predictor:
    """A FunctionSpec bound to its resources, with per-resource precompute.

    For the random baseline and the norms walk the stopword/noun drop and
    the lemma merge are context independent, so they are applied to the
    weight table once; each call then only censors used items, renormalizes
    and truncates. Embedding and masked-LM functions filter per call.
    """

    def __init__(self, spec: FunctionSpec, resources: ResourceBundle):
        self.spec = spec
        self.resources = resources
        self._check_resources()
        self._base: tuple[dict[str, float], frozenset[str]] | None = None
        self._norms_cache: dict[str, tuple[dict[str, float], frozenset[str]]] = {}

    @property
    def label(self) -> str:
        return self.spec.label

    @property
    def context_size(self) -> int | None:
        return self.spec.context_size

    def _check_resources(self) -> None:
        approach = self.spec.approach
        missing: list[str] = []
        if approach is Approach.RANDOM_BASELINE and self.resources.frequency is None:
            missing.append("frequency")
        if approach is Approach.NORMS_USF and self.resources.usf is None:
            missing.append("usf")
        if approach is Approach.NORMS_SWOW and self.resources.swow is None:
            missing.append("swow")
        if approach is Approach.EMBEDDING_W2V and self.resources.w2v is None:
            missing.append("w2v")
        if approach is Approach.EMBEDDING_GLOVE and self.resources.glove is None:
            missing.append("glove")
        if approach is Approach.MLM:
            if self.resources.backend is None:
                missing.append("backend")
            if self.resources.frequency is None:
                missing.append("frequency")
            if self.resources.nouns is None:
                missing.append("nouns")
            if self.resources.stopwords is None:
                missing.append("stopwords")
        if missing:
            raise ConfigurationError(
                f"function {self.spec.label!r} is missing resource(s): {', '.join(missing)}"
            )

    def _filter_table(
        self, weights: Mapping[str, float], raw_vocabulary: frozenset[str]
    ) -> tuple[dict[str, float], frozenset[str]]:
        """Apply the context-independent filter steps to a weight table."""
        if not self.resources.filtering_active:
            return dict(weights), raw_vocabulary
        from .mlm import drop_and_merge

        merged = drop_and_merge(
            weights.items(),
            stopwords=self.resources.stopwords or frozenset(),
            nouns=self.resources.nouns,
            morphology=self.resources.morphology,
        )
        coverage = raw_vocabulary | frozenset(merged)
        return merged, coverage

    def _base_table(self) -> tuple[dict[str, float], frozenset[str]]:
        if self._base is None:
            frequency = self.resources.frequency
            assert frequency is not None
            weights = {term: float(frequency.count(term)) for term in frequency.terms}
            self._base = self._filter_table(weights, frequency.terms)
        return self._base

    def _norms_table(self, category: str) -> tuple[dict[str, float], frozenset[str]]:
        if category not in self._norms_cache:
            norms = self.resources.usf
            if self.spec.approach is Approach.NORMS_SWOW:
                norms = self.resources.swow
            assert norms is not None
            responses = norms.entries.get(category, {})
            self._norms_cache[category] = self._filter_table(
                dict(responses), frozenset(responses)
            )
        return self._norms_cache[category]

    def predict(
        self, context: PredictionContext, limit: int | None = None
    ) -> PredictionDistribution:
        approach = self.spec.approach
        if approach is Approach.RANDOM_BASELINE:
            weights, coverage = self._base_table()
            return build_distribution(weights, coverage, context.used_items, limit)
        if approach in (Approach.NORMS_USF, Approach.NORMS_SWOW):
            weights, coverage = self._norms_table(context.category)
            return build_distribution(weights, coverage, context.used_items, limit)
        if approach in (Approach.EMBEDDING_W2V, Approach.EMBEDDING_GLOVE):
            return self._predict_embedding(context, limit)
        return self._predict_mlm(context, limit)

    def _predict_embedding(
        self, context: PredictionContext, limit: int | None
    ) -> PredictionDistribution:
        table = (
            self.resources.w2v
            if self.spec.approach is Approach.EMBEDDING_W2V
            else self.resources.glove
        )
        assert table is not None and self.spec.context_size is not None
        raw = predict_embedding(context, table, self.spec.context_size, limit)
        if not self.resources.filtering_active:
            return raw
        from .mlm import filter_predictions

        filtered = filter_predictions(
            raw.candidates,
            stopwords=self.resources.stopwords or frozenset(),
            nouns=self.resources.nouns,
            used=context.used_items,
            morphology=self.resources.morphology,
        )
        coverage = raw.coverage_vocabulary | frozenset(w for w, _ in filtered)
        return PredictionDistribution(candidates=tuple(filtered), coverage_vocabulary=coverage)

    def _predict_mlm(
        self, context: PredictionContext, limit: int | None
    ) -> PredictionDistribution:
        from .mlm import predict_mlm

        assert self.resources.backend is not None
        assert self.resources.frequency is not None
        return predict_mlm(
            self.spec,
            context,
            backend=self.resources.backend,
            frequency=self.resources.frequency,
            nouns=self.resources.nouns or frozenset(),
            stopwords=self.resources.stopwords or frozenset(),
            morphology=self.resources.morphology,
            limit=limit,
        )


def build_predictor(spec: FunctionSpec, resources: ResourceBundle) -> Predictor:
    return Predictor(spec, resources)


def build_predictors(
    registry: FunctionRegistry, resources: ResourceBundle
) -> dict[str, Predictor]:
    return {spec.label: Predictor(spec, resources) for spec in registry}


def predict(
    spec: FunctionSpec,
    context: PredictionContext,
    resources: ResourceBundle,
    limit: int | None = None,
) -> PredictionDistribution:
    """One-shot dispatch; for repeated use build a Predictor once instead."""
    if limit is not None and limit < 1:
        raise ConfigurationError(f"limit must be at least 1, got {limit}")
    return Predictor(spec, resources).predict(context, limit)
