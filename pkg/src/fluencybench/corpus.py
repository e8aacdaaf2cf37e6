"""Core data types and file loaders.

Everything downstream works in terms of these types: fluency lists read from
delimited exports, free-association norms, embedding tables, unigram/bigram
frequency tables, and per-category lexicons. Loaders normalize text to
lowercase and report problems with file and line numbers; savers are exact
inverses so load(save(x)) == x.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._io import atomic_write_text
from .errors import EmptyDatasetError, ParseError, SchemaError, ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ColumnMap:
    """Names of the four required columns in a fluency-list export."""

    participant: str = "id"
    list_index: str = "listnum"
    category: str = "category"
    item: str = "item"

    def required(self) -> tuple[str, str, str, str]:
        return (self.participant, self.list_index, self.category, self.item)


@dataclass(frozen=True)
class FluencyList:
    """One participant's ordered responses for one category.

    Items are kept in production order. Raw loads may still contain
    duplicates or underscores; call check_clean() after the cleaning
    pipeline to enforce the post-cleaning invariants.
    """

    participant: str
    category: str
    list_index: int
    items: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.participant:
            raise ValidationError("fluency list has an empty participant id")
        if not self.category:
            raise ValidationError("fluency list has an empty category")
        if not self.items:
            raise ValidationError(
                f"fluency list {self.participant}/{self.category}/{self.list_index} has no items"
            )
        for item in self.items:
            if not item or not item.strip():
                raise ValidationError(
                    f"fluency list {self.participant}/{self.category}/{self.list_index} "
                    "contains an empty item"
                )

    def __len__(self) -> int:
        return len(self.items)

    @property
    def list_id(self) -> str:
        return f"{self.participant}|{self.category}|{self.list_index}"

    def check_clean(self) -> None:
        """Enforce the invariants that hold after cleaning."""
        if len(set(self.items)) != len(self.items):
            raise ValidationError(f"list {self.list_id} contains duplicate items")
        for item in self.items:
            if "_" in item:
                raise ValidationError(f"list {self.list_id} contains an underscore in {item!r}")
            if item != item.lower() or item != item.strip():
                raise ValidationError(f"list {self.list_id} contains unnormalized item {item!r}")


@dataclass(frozen=True)
class AssociationNorms:
    """Cue -> response strength table from free-association norms.

    entries maps a cue to {response: strength}; duplicate (cue, response)
    rows are summed at load time. Strengths are positive but a cue's
    strengths need not sum to one.
    """

    entries: Mapping[str, Mapping[str, float]]

    def __post_init__(self) -> None:
        for cue, responses in self.entries.items():
            if not cue:
                raise ValidationError("association norms contain an empty cue")
            for response, strength in responses.items():
                if not response:
                    raise ValidationError(f"cue {cue!r} has an empty response")
                if not strength > 0:
                    raise ValidationError(
                        f"cue {cue!r} response {response!r} has non-positive strength {strength}"
                    )

    def total(self, cue: str) -> float:
        return sum(self.entries.get(cue, {}).values())


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Word -> dense vector table, all vectors the same dimension.

    Equality compares contents; hashing stays identity-based so tables can
    key caches.
    """

    vectors: Mapping[str, np.ndarray]
    dimension: int

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        if self.dimension != other.dimension or set(self.vectors) != set(other.vectors):
            return False
        return all(np.array_equal(vec, other.vectors[word]) for word, vec in self.vectors.items())

    __hash__ = object.__hash__

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValidationError(f"embedding dimension must be positive, got {self.dimension}")
        for word, vec in self.vectors.items():
            if vec.shape != (self.dimension,):
                raise ValidationError(
                    f"vector for {word!r} has shape {vec.shape}, expected ({self.dimension},)"
                )
            if not np.any(vec):
                raise ValidationError(f"vector for {word!r} is all-zero")

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    @property
    def words(self) -> frozenset[str]:
        cached = getattr(self, "_words", None)
        if cached is None:
            cached = frozenset(self.vectors)
            object.__setattr__(self, "_words", cached)
        return cached


@dataclass(frozen=True)
class FrequencyTable:
    """Unigram and bigram corpus counts.

    Bigram keys are (first, second) token pairs. terms exposes the combined
    vocabulary with bigrams joined by a single space.
    """

    unigrams: Mapping[str, int]
    bigrams: Mapping[tuple[str, str], int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for term, count in self.unigrams.items():
            if not term or " " in term:
                raise ValidationError(f"bad unigram key {term!r}")
            if count <= 0:
                raise ValidationError(f"unigram {term!r} has non-positive count {count}")
        for pair, count in self.bigrams.items():
            if len(pair) != 2 or not all(tok and " " not in tok for tok in pair):
                raise ValidationError(f"bad bigram key {pair!r}")
            if count <= 0:
                raise ValidationError(f"bigram {pair!r} has non-positive count {count}")

    @property
    def total(self) -> int:
        return sum(self.unigrams.values()) + sum(self.bigrams.values())

    @property
    def terms(self) -> frozenset[str]:
        cached = getattr(self, "_terms", None)
        if cached is None:
            cached = frozenset(self.unigrams) | frozenset(" ".join(p) for p in self.bigrams)
            object.__setattr__(self, "_terms", cached)
        return cached

    def count(self, term: str) -> int:
        if " " in term:
            first, _, second = term.partition(" ")
            return self.bigrams.get((first, second), 0)
        return self.unigrams.get(term, 0)


@dataclass(frozen=True)
class CategoryLexicon:
    """Known instances of one category, used for spell correction."""

    category: str
    instances: frozenset[str]
    source_relations: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.category:
            raise ValidationError("category lexicon has an empty category name")
        for instance in self.instances:
            if not instance or instance != instance.lower().strip():
                raise ValidationError(
                    f"lexicon for {self.category!r} has unnormalized instance {instance!r}"
                )

    def sorted_instances(self) -> list[str]:
        return sorted(self.instances)


def _norm(text: str) -> str:
    return text.strip().lower()


def load_fluency_dataset(
    path: str | Path,
    columns: ColumnMap | None = None,
    delimiter: str = ",",
) -> list[FluencyList]:
    """Read a delimited fluency-list export into FluencyList objects.

    Rows are grouped by (participant, list, category) in order of first
    appearance, and item order within a group follows file order. Item text
    is lowercased and stripped; rows with a blank item cell are skipped with
    a warning.
    """
    columns = columns or ColumnMap()
    path = Path(path)
    groups: dict[tuple[str, str, int], list[str]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        header = reader.fieldnames or []
        missing = [name for name in columns.required() if name not in header]
        if missing:
            raise SchemaError(f"{path}: missing required column(s): {', '.join(missing)}")
        for row in reader:
            lineno = reader.line_num
            participant = _norm(row[columns.participant] or "")
            category = _norm(row[columns.category] or "")
            raw_index = (row[columns.list_index] or "").strip()
            item = _norm(row[columns.item] or "")
            if not item:
                log.warning("%s:%d: blank item cell skipped", path, lineno)
                continue
            if not participant or not category:
                raise ParseError(
                    "row has an empty participant or category", path=str(path), line=lineno
                )
            try:
                list_index = int(raw_index)
            except ValueError:
                raise ParseError(
                    f"list column value {raw_index!r} is not an integer",
                    path=str(path),
                    line=lineno,
                ) from None
            groups.setdefault((participant, category, list_index), []).append(item)
    if not groups:
        raise EmptyDatasetError(f"{path}: no usable rows")
    return [
        FluencyList(participant=p, category=c, list_index=i, items=tuple(items))
        for (p, c, i), items in groups.items()
    ]


def save_fluency_dataset(
    lists: Sequence[FluencyList],
    path: str | Path,
    columns: ColumnMap | None = None,
    delimiter: str = ",",
) -> None:
    columns = columns or ColumnMap()
    rows = [list(columns.required())]
    for fl in lists:
        for item in fl.items:
            rows.append([fl.participant, str(fl.list_index), fl.category, item])
    _write_delimited(path, rows, delimiter)


def _write_delimited(path: str | Path, rows: Iterable[Sequence[str]], delimiter: str) -> None:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def _detect_delimiter(path: Path) -> str:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    return "\t" if "\t" in first else ","


def load_association_norms(path: str | Path, delimiter: str | None = None) -> AssociationNorms:
    """Read cue,response,strength rows (CSV or TSV) into AssociationNorms.

    Duplicate (cue, response) rows have their strengths summed. Cues and
    responses are lowercased.
    """
    path = Path(path)
    if delimiter is None:
        delimiter = _detect_delimiter(path)
    entries: dict[str, dict[str, float]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None:
            raise EmptyDatasetError(f"{path}: file is empty")
        if len(header) < 3:
            raise SchemaError(f"{path}: expected cue, response, strength columns")
        for row in reader:
            lineno = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 3:
                raise ParseError("row has fewer than 3 fields", path=str(path), line=lineno)
            cue, response = _norm(row[0]), _norm(row[1])
            try:
                strength = float(row[2])
            except ValueError:
                raise ParseError(
                    f"strength {row[2]!r} is not a number", path=str(path), line=lineno
                ) from None
            if strength <= 0:
                raise ValidationError(
                    f"{path}:{lineno}: non-positive strength {strength} for ({cue!r}, {response!r})"
                )
            if not cue or not response:
                raise ParseError("empty cue or response", path=str(path), line=lineno)
            entries.setdefault(cue, {})
            entries[cue][response] = entries[cue].get(response, 0.0) + strength
    if not entries:
        raise EmptyDatasetError(f"{path}: no norm rows")
    return AssociationNorms(entries=entries)


def save_association_norms(
    norms: AssociationNorms, path: str | Path, delimiter: str = ","
) -> None:
    rows: list[list[str]] = [["cue", "response", "strength"]]
    for cue in sorted(norms.entries):
        for response in sorted(norms.entries[cue]):
            rows.append([cue, response, repr(norms.entries[cue][response])])
    _write_delimited(path, rows, delimiter)


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Read whitespace-delimited word vectors.

    A first line of exactly two integer tokens is treated as a count/dim
    header and skipped. The dimension is fixed by the first vector; a later
    mismatch is a parse error naming the line. Duplicate words keep the last
    occurrence with a warning.
    """
    path = Path(path)
    vectors: dict[str, np.ndarray] = {}
    dimension: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and _all_ints(parts):
                continue
            word = parts[0].lower()
            try:
                values = np.array([float(tok) for tok in parts[1:]], dtype=np.float64)
            except ValueError:
                raise ParseError(
                    f"non-numeric vector component for {word!r}", path=str(path), line=lineno
                ) from None
            if values.size == 0:
                raise ParseError(f"no vector components for {word!r}", path=str(path), line=lineno)
            if dimension is None:
                dimension = int(values.size)
            elif values.size != dimension:
                raise ParseError(
                    f"vector for {word!r} has {values.size} components, expected {dimension}",
                    path=str(path),
                    line=lineno,
                )
            if word in vectors:
                log.warning("%s:%d: duplicate vector for %r, keeping the last", path, lineno, word)
            vectors[word] = values
    if dimension is None or not vectors:
        raise EmptyDatasetError(f"{path}: no vectors")
    return EmbeddingTable(vectors=vectors, dimension=dimension)


def _all_ints(tokens: Sequence[str]) -> bool:
    try:
        for tok in tokens:
            int(tok)
    except ValueError:
        return False
    return True


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    lines = []
    for word in sorted(table.vectors):
        comps = " ".join(repr(float(v)) for v in table.vectors[word])
        lines.append(f"{word} {comps}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_frequency_table(path: str | Path, delimiter: str = ",") -> FrequencyTable:
    """Read term,count rows. One space in a term marks a bigram; terms with
    more spaces are skipped with a warning. Duplicate terms are summed."""
    path = Path(path)
    unigrams: dict[str, int] = {}
    bigrams: dict[tuple[str, str], int] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None:
            raise EmptyDatasetError(f"{path}: file is empty")
        if len(header) < 2:
            raise SchemaError(f"{path}: expected term, count columns")
        for row in reader:
            lineno = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise ParseError("row has fewer than 2 fields", path=str(path), line=lineno)
            term = _norm(row[0])
            try:
                count = int(row[1])
            except ValueError:
                raise ParseError(
                    f"count {row[1]!r} is not an integer", path=str(path), line=lineno
                ) from None
            if count <= 0:
                raise ValidationError(f"{path}:{lineno}: non-positive count for {term!r}")
            if not term:
                raise ParseError("empty term", path=str(path), line=lineno)
            tokens = term.split(" ")
            if len(tokens) == 1:
                unigrams[term] = unigrams.get(term, 0) + count
            elif len(tokens) == 2:
                key = (tokens[0], tokens[1])
                bigrams[key] = bigrams.get(key, 0) + count
            else:
                log.warning("%s:%d: term %r has %d tokens, skipped", path, lineno, term, len(tokens))
    if not unigrams and not bigrams:
        raise EmptyDatasetError(f"{path}: no frequency rows")
    return FrequencyTable(unigrams=unigrams, bigrams=bigrams)


def save_frequency_table(table: FrequencyTable, path: str | Path, delimiter: str = ",") -> None:
    rows: list[list[str]] = [["term", "count"]]
    for term in sorted(table.unigrams):
        rows.append([term, str(table.unigrams[term])])
    for pair in sorted(table.bigrams):
        rows.append([" ".join(pair), str(table.bigrams[pair])])
    _write_delimited(path, rows, delimiter)
