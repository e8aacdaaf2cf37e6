"""Per-list scoring and cross-function aggregation.

For one function and one list we record, per position: whether the produced
item is in the function's coverage vocabulary, and its probability and rank
when predicted. From those come the three list-level metrics:

* coverage: fraction of items in the coverage vocabulary;
* scaled log-likelihood: mean natural log probability over in-coverage
  items, with probabilities floored at 1e-12;
* top-k accuracy: fraction of items ranked within the first k predictions.

A ScoreMatrix holds one metric for every (function, list) pair; aggregate()
reduces a matrix three ways: the grand mean (Avg), the best single function
(BO), and the per-list best (BI). Avg <= BO <= BI always.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from ._io import atomic_write_text, fmt_float
from .corpus import FluencyList
from .errors import DataError, ValidationError
from .predictors import PredictionContext, Predictor

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ItemOutcome:
    """What one prediction attempt produced for one list position."""

    position: int
    item: str
    in_coverage: bool
    probability: float | None
    rank: int | None

    def log_probability(self) -> float:
        """Floored natural log of the item's probability."""
        prob = self.probability if self.probability is not None else 0.0
        return math.log(max(prob, PROB_FLOOR))

    def hit(self, k: int) -> bool:
        return self.rank is not None and self.rank <= k


@dataclass(frozen=True)
class ListScore:
    """One function's metrics on one list, with per-position outcomes."""

    list_id: str
    function_label: str
    outcomes: tuple[ItemOutcome, ...]
    coverage: float
    scaled_ll: float
    top_k: Mapping[int, float]

    def metric(self, name: str, k: int | None = None) -> float:
        if name == "coverage":
            return self.coverage
        if name == "scaled_ll":
            return self.scaled_ll
        if name == "top_k":
            if k is None or k not in self.top_k:
                raise ValidationError(f"no top-{k} accuracy on this score")
            return self.top_k[k]
        raise ValidationError(f"unknown metric {name!r}")


def score_outcomes(
    predictor: Predictor, fluency_list: FluencyList, limit: int | None = None
) -> tuple[ItemOutcome, ...]:
    """Run a predictor over every position of a list."""
    outcomes = []
    for position in range(1, len(fluency_list) + 1):
        context = PredictionContext.for_position(
            fluency_list, position, predictor.context_size
        )
        distribution = predictor.predict(context, limit)
        item = fluency_list.items[position - 1]
        outcomes.append(
            ItemOutcome(
                position=position,
                item=item,
                in_coverage=item in distribution.coverage_vocabulary,
                probability=distribution.probability(item),
                rank=distribution.rank(item),
            )
        )
    return tuple(outcomes)


def summarize_outcomes(
    list_id: str,
    function_label: str,
    outcomes: Sequence[ItemOutcome],
    k_values: Sequence[int],
) -> ListScore:
    """Reduce per-position outcomes to the three list-level metrics.

    A list with no in-coverage items gets the floor log-likelihood so the
    score matrix stays dense.
    """
    if not outcomes:
        raise ValidationError(f"no outcomes for list {list_id}")
    n = len(outcomes)
    covered = [o for o in outcomes if o.in_coverage]
    coverage = len(covered) / n
    if covered:
        scaled_ll = sum(o.log_probability() for o in covered) / len(covered)
    else:
        scaled_ll = math.log(PROB_FLOOR)
    top_k = {k: sum(1 for o in outcomes if o.hit(k)) / n for k in k_values}
    return ListScore(
        list_id=list_id,
        function_label=function_label,
        outcomes=tuple(outcomes),
        coverage=coverage,
        scaled_ll=scaled_ll,
        top_k=top_k,
    )


def score_list(
    predictor: Predictor,
    fluency_list: FluencyList,
    k_values: Sequence[int] = (1, 5),
    limit: int | None = None,
) -> ListScore:
    outcomes = score_outcomes(predictor, fluency_list, limit)
    return summarize_outcomes(fluency_list.list_id, predictor.label, outcomes, k_values)


@dataclass(frozen=True)
class ScoreMatrix:
    """One metric's value for every (function, list) pair.

    Rows follow registry order, columns dataset order; both orders are part
    of the artifact and survive the CSV round trip.
    """

    metric: str
    k: int | None
    function_labels: tuple[str, ...]
    list_ids: tuple[str, ...]
    values: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        if not self.function_labels or not self.list_ids:
            raise ValidationError("a score matrix needs at least one function and one list")
        if len(set(self.function_labels)) != len(self.function_labels):
            raise ValidationError("duplicate function labels in score matrix")
        if len(set(self.list_ids)) != len(self.list_ids):
            raise ValidationError("duplicate list ids in score matrix")
        if len(self.values) != len(self.function_labels):
            raise ValidationError("score matrix row count does not match function count")
        for row in self.values:
            if len(row) != len(self.list_ids):
                raise ValidationError("score matrix row width does not match list count")

    def value(self, function_label: str, list_id: str) -> float:
        return self.values[self.function_labels.index(function_label)][
            self.list_ids.index(list_id)
        ]

    def row(self, function_label: str) -> tuple[float, ...]:
        return self.values[self.function_labels.index(function_label)]


def matrices_from_scores(
    function_labels: Sequence[str],
    list_ids: Sequence[str],
    scores: Mapping[str, Mapping[str, ListScore]],
    k_values: Sequence[int],
) -> dict[str, ScoreMatrix]:
    """Build the coverage, scaled_ll and per-k top_k matrices."""

    def build(metric: str, k: int | None, pick: Callable[[ListScore], float]) -> ScoreMatrix:
        values = tuple(
            tuple(pick(scores[label][list_id]) for list_id in list_ids)
            for label in function_labels
        )
        return ScoreMatrix(
            metric=metric,
            k=k,
            function_labels=tuple(function_labels),
            list_ids=tuple(list_ids),
            values=values,
        )

    matrices = {
        "coverage": build("coverage", None, lambda s: s.coverage),
        "scaled_ll": build("scaled_ll", None, lambda s: s.scaled_ll),
    }
    for k in k_values:
        matrices[f"top_{k}"] = build("top_k", k, lambda s, _k=k: s.top_k[_k])
    return matrices


def write_matrix_csv(matrix: ScoreMatrix, path: str | Path) -> None:
    """CSV with a JSON sidecar (<path>.meta.json) holding the metadata.

    Values are written with six decimals; reading them back reproduces the
    matrix at that precision.
    """
    path = Path(path)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["function", *matrix.list_ids])
    for label, row in zip(matrix.function_labels, matrix.values):
        writer.writerow([label, *(fmt_float(v) for v in row)])
    atomic_write_text(path, buf.getvalue())
    meta = {
        "metric": matrix.metric,
        "k": matrix.k,
        "functions": list(matrix.function_labels),
        "lists": list(matrix.list_ids),
        "decimals": 6,
    }
    atomic_write_text(
        path.with_suffix(path.suffix + ".meta.json"),
        json.dumps(meta, indent=2, sort_keys=True) + "\n",
    )


def read_matrix_csv(path: str | Path) -> ScoreMatrix:
    path = Path(path)
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    if not meta_path.exists():
        raise DataError(f"{path}: missing sidecar {meta_path.name}")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "function":
            raise DataError(f"{path}: not a score matrix CSV")
        list_ids = tuple(header[1:])
        labels: list[str] = []
        values: list[tuple[float, ...]] = []
        for row in reader:
            if not row:
                continue
            labels.append(row[0])
            values.append(tuple(float(cell) for cell in row[1:]))
    matrix = ScoreMatrix(
        metric=meta["metric"],
        k=meta["k"],
        function_labels=tuple(labels),
        list_ids=list_ids,
        values=tuple(values),
    )
    if list(matrix.function_labels) != meta.get("functions") or list(matrix.list_ids) != meta.get(
        "lists"
    ):
        raise DataError(f"{path}: sidecar does not match the CSV contents")
    return matrix


@dataclass(frozen=True)
class AggregateReport:
    """The three reductions of one score matrix.

    bo_function is the best single function's label; bi_functions records,
    per list, which function the per-list best came from (first function in
    registry order on ties).
    """

    metric: str
    k: int | None
    avg: float
    bo: float
    bi: float
    bo_function: str
    bi_functions: tuple[str, ...]


def aggregate(matrix: ScoreMatrix) -> AggregateReport:
    """Grand mean, best-overall function mean, and mean per-list best."""
    n_lists = len(matrix.list_ids)
    function_means = [sum(row) / n_lists for row in matrix.values]
    avg = sum(function_means) / len(function_means)

    bo_index = 0
    for i, mean in enumerate(function_means):
        if mean > function_means[bo_index]:
            bo_index = i
    bo = function_means[bo_index]

    best_per_list: list[float] = []
    bi_functions: list[str] = []
    for column in range(n_lists):
        best_row = 0
        for i in range(len(matrix.values)):
            if matrix.values[i][column] > matrix.values[best_row][column]:
                best_row = i
        best_per_list.append(matrix.values[best_row][column])
        bi_functions.append(matrix.function_labels[best_row])
    bi = sum(best_per_list) / n_lists

    return AggregateReport(
        metric=matrix.metric,
        k=matrix.k,
        avg=avg,
        bo=bo,
        bi=bi,
        bo_function=matrix.function_labels[bo_index],
        bi_functions=tuple(bi_functions),
    )


def category_of_list_id(list_id: str) -> str:
    parts = list_id.split("|")
    if len(parts) != 3 or not parts[1]:
        raise ValidationError(f"list id {list_id!r} is not participant|category|index")
    return parts[1]


def per_category_breakdown(
    matrix: ScoreMatrix, categories: Mapping[str, str] | None = None
) -> dict[str, AggregateReport]:
    """aggregate() restricted to each category's lists.

    Categories come from the given mapping or, by default, from the middle
    field of the list ids. Category order follows column order.
    """
    lookup = (
        categories.__getitem__ if categories is not None else category_of_list_id
    )
    groups: dict[str, list[int]] = {}
    for column, list_id in enumerate(matrix.list_ids):
        groups.setdefault(lookup(list_id), []).append(column)
    result: dict[str, AggregateReport] = {}
    for category, columns in groups.items():
        sub = ScoreMatrix(
            metric=matrix.metric,
            k=matrix.k,
            function_labels=matrix.function_labels,
            list_ids=tuple(matrix.list_ids[c] for c in columns),
            values=tuple(tuple(row[c] for c in columns) for row in matrix.values),
        )
        result[category] = aggregate(sub)
    return result


def crossover_point(
    curve: Mapping[int, float] | Iterable[tuple[int, float]], reference: float
) -> int | None:
    """Smallest x whose curve value reaches the reference, None if none does."""
    pairs = sorted(dict(curve).items()) if not isinstance(curve, Mapping) else sorted(curve.items())
    if not pairs:
        raise ValidationError("crossover needs a non-empty curve")
    for x, score in pairs:
        if score >= reference:
            return x
    return None


class _Decision(Protocol):
    chosen: str


class TraceLike(Protocol):
    """Anything with an ordered .decisions of objects naming a chosen label."""

    decisions: Sequence[_Decision]


def choice_share(
    traces: Iterable[TraceLike],
    group_of: Callable[[str], str] | Mapping[str, str] | None = None,
) -> dict[str, float]:
    """Percentage of adaptive decisions that picked each function (or group).

    group_of, when given, maps a function label to a coarser name (say, its
    approach) before counting.
    """
    if isinstance(group_of, Mapping):
        mapping = group_of
        group_of = lambda label: mapping[label]  # noqa: E731
    counts: dict[str, int] = {}
    total = 0
    for trace in traces:
        for decision in trace.decisions:
            name = group_of(decision.chosen) if group_of else decision.chosen
            counts[name] = counts.get(name, 0) + 1
            total += 1
    if total == 0:
        raise ValidationError("choice_share needs at least one decision")
    return {name: 100.0 * count / total for name, count in sorted(counts.items())}


def switch_rate(traces: Iterable[TraceLike]) -> float:
    """Percentage of decisions that changed function, among those with a
    predecessor in the same trace. Recomputed from the chosen labels, not
    from recorded flags."""
    switches = 0
    eligible = 0
    for trace in traces:
        chosen = [decision.chosen for decision in trace.decisions]
        for previous, current in zip(chosen, chosen[1:]):
            eligible += 1
            if current != previous:
                switches += 1
    if eligible == 0:
        raise ValidationError("switch_rate needs at least one decision with a predecessor")
    return 100.0 * switches / eligible
