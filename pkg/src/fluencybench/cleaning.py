"""Response cleaning: normalization, spell correction, and lemmatization.

A raw response goes through four steps, in order:

1. lowercase, strip, replace underscores with spaces, collapse runs of
   whitespace;
2. if the normalized form is not in the category lexicon, replace it with
   the lexicon entry at minimum edit distance (lexicographic order breaks
   distance ties);
3. lemmatize to singular; multi-word items are lemmatized on the final
   token only;
4. drop the item if the result already appeared earlier in the same list.

Every item that changed in any way (or was dropped) gets a CleaningReport.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from ._io import atomic_write_text
from .corpus import CategoryLexicon, FluencyList
from .errors import ValidationError

_MAX_LEMMA_PASSES = 10


def levenshtein(a: str, b: str) -> int:
    """Plain edit distance: unit-cost insert, delete, substitute."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ch_a in enumerate(a, start=1):
        current = [i]
        for j, ch_b in enumerate(b, start=1):
            cost = 0 if ch_a == ch_b else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[-1]


def _load_wordlist(name: str) -> list[str]:
    text = resources.files("fluencybench.data").joinpath(name).read_text(encoding="utf-8")
    lines = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            lines.append(line)
    return lines


class NounMorphology:
    """Singularization rules: irregular table, uninflected set, suffix rules.

    The default tables ship with the package; extra entries can be layered
    on top for domain-specific vocabularies.
    """

    def __init__(
        self,
        irregular: Mapping[str, str] | None = None,
        uninflected: Sequence[str] | None = None,
    ):
        self.irregular: dict[str, str] = {}
        for line in _load_wordlist("irregular_nouns.txt"):
            plural, _, singular = line.partition("\t")
            self.irregular[plural.strip()] = singular.strip()
        self.uninflected: set[str] = set(_load_wordlist("uninflected_nouns.txt"))
        if irregular:
            self.irregular.update(irregular)
        if uninflected:
            self.uninflected.update(uninflected)

    def singularize_token(self, token: str) -> str:
        if token in self.irregular:
            return self.irregular[token]
        if token in self.uninflected:
            return token
        if len(token) < 3 or not token.endswith("s"):
            return token
        if token.endswith(("ss", "us", "is")):
            return token
        if token.endswith("ies") and len(token) > 4:
            return token[:-3] + "y"
        if token.endswith(("sses", "ches", "shes", "xes", "zzes")):
            return token[:-2]
        if token.endswith("oes") and len(token) > 4:
            return token[:-2]
        return token[:-1]


_DEFAULT_MORPHOLOGY: NounMorphology | None = None


def default_morphology() -> NounMorphology:
    global _DEFAULT_MORPHOLOGY
    if _DEFAULT_MORPHOLOGY is None:
        _DEFAULT_MORPHOLOGY = NounMorphology()
    return _DEFAULT_MORPHOLOGY


def lemmatize_noun(word: str, morphology: NounMorphology | None = None) -> str:
    """Singularize a noun phrase; only the final token is touched.

    The token rule is applied to a fixpoint (bounded) so chained forms like
    "mens" -> "men" -> "man" resolve in one call and the function is
    idempotent.
    """
    morphology = morphology or default_morphology()
    head, sep, last = word.rpartition(" ")
    for _ in range(_MAX_LEMMA_PASSES):
        reduced = morphology.singularize_token(last)
        if reduced == last:
            break
        last = reduced
    return head + sep + last


@dataclass(frozen=True)
class CleaningReport:
    """What happened to one raw response during cleaning."""

    original: str
    cleaned: str
    correction_applied: bool
    edit_distance: int
    lemma_changed: bool
    lexicon_missing: bool = False
    dropped_duplicate: bool = False
    participant: str | None = None
    category: str | None = None
    list_index: int | None = None
    position: int | None = None

    def __post_init__(self) -> None:
        if not self.correction_applied and self.edit_distance != 0:
            raise ValidationError(
                f"report for {self.original!r} has edit_distance "
                f"{self.edit_distance} without a correction"
            )
        if "_" in self.cleaned:
            raise ValidationError(f"cleaned form {self.cleaned!r} still contains an underscore")


def clean_item(
    raw: str,
    lexicon: CategoryLexicon | None,
    morphology: NounMorphology | None = None,
    max_distance: int | None = None,
) -> CleaningReport:
    """Run one response through normalize, correct, lemmatize.

    With no lexicon (or an empty one) the correction step is skipped and the
    report is flagged lexicon_missing when the lexicon is absent entirely.
    max_distance, when set, leaves items farther than that from every
    lexicon entry uncorrected.
    """
    if not raw or not raw.strip():
        raise ValidationError("cannot clean an empty response")
    text = " ".join(raw.strip().lower().replace("_", " ").split())

    corrected = False
    distance = 0
    if lexicon is not None and lexicon.instances and text not in lexicon.instances:
        best_term, best_distance = None, None
        for candidate in lexicon.sorted_instances():
            d = levenshtein(text, candidate)
            if best_distance is None or d < best_distance:
                best_term, best_distance = candidate, d
        assert best_term is not None and best_distance is not None
        if max_distance is None or best_distance <= max_distance:
            text, corrected, distance = best_term, True, best_distance

    lemma = lemmatize_noun(text, morphology)
    return CleaningReport(
        original=raw,
        cleaned=lemma,
        correction_applied=corrected,
        edit_distance=distance,
        lemma_changed=lemma != text,
        lexicon_missing=lexicon is None,
    )


def clean_dataset(
    lists: Sequence[FluencyList],
    lexicons: Mapping[str, CategoryLexicon],
    morphology: NounMorphology | None = None,
    max_distance: int | None = None,
) -> tuple[list[FluencyList], list[CleaningReport]]:
    """Clean every list and collect a report for every item that changed.

    Lists keep their input order and items their production order. A
    category with no lexicon falls back to normalize + lemmatize only, with
    lexicon_missing set on its reports.
    """
    morphology = morphology or default_morphology()
    cleaned_lists: list[FluencyList] = []
    reports: list[CleaningReport] = []
    for fl in lists:
        lexicon = lexicons.get(fl.category)
        kept: list[str] = []
        seen: set[str] = set()
        for position, raw in enumerate(fl.items, start=1):
            report = clean_item(raw, lexicon, morphology, max_distance)
            dropped = report.cleaned in seen
            if not dropped:
                seen.add(report.cleaned)
                kept.append(report.cleaned)
            if dropped or report.cleaned != raw:
                reports.append(
                    replace(
                        report,
                        dropped_duplicate=dropped,
                        participant=fl.participant,
                        category=fl.category,
                        list_index=fl.list_index,
                        position=position,
                    )
                )
        if not kept:
            raise ValidationError(f"list {fl.list_id} has no items left after cleaning")
        result = FluencyList(
            participant=fl.participant,
            category=fl.category,
            list_index=fl.list_index,
            items=tuple(kept),
        )
        result.check_clean()
        cleaned_lists.append(result)
    return cleaned_lists, reports


_REPORT_COLUMNS = (
    "participant",
    "category",
    "list_index",
    "position",
    "original",
    "cleaned",
    "correction_applied",
    "edit_distance",
    "lemma_changed",
    "lexicon_missing",
    "dropped_duplicate",
)


def write_reports_csv(reports: Sequence[CleaningReport], path: str | Path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_REPORT_COLUMNS)
    for r in reports:
        writer.writerow(
            [
                r.participant or "",
                r.category or "",
                "" if r.list_index is None else str(r.list_index),
                "" if r.position is None else str(r.position),
                r.original,
                r.cleaned,
                _flag(r.correction_applied),
                str(r.edit_distance),
                _flag(r.lemma_changed),
                _flag(r.lexicon_missing),
                _flag(r.dropped_duplicate),
            ]
        )
    atomic_write_text(path, buf.getvalue())


def _flag(value: bool) -> str:
    return "true" if value else "false"
