"""Adaptive function selection over the course of a list.

Two algorithms, both parameterized by a window size x:

* assess-then-commit (atc): score every function on the first x items,
  commit to the winner, and evaluate it on the rest of the list;
* continuous assessment (ca): before each position past x, re-score every
  function on the previous x items and use the winner for just that
  position.

Selection compares window means of the chosen metric. Continuous assessment
breaks ties by window scaled log-likelihood, then by sticking with the
incumbent, then by registry order; assess-then-commit goes straight to
registry order. The reported score for a run is the mean per-item metric
value over the positions after the window.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

from ._io import atomic_write_text, json_line
from .corpus import FluencyList
from .errors import ValidationError
from .metrics import ItemOutcome, score_outcomes
from .predictors import Predictor

ALGORITHMS = ("atc", "ca")

SELECTION_METRICS = ("top_k", "scaled_ll")


@dataclass(frozen=True)
class AdaptiveConfig:
    """Window size plus the metric used to pick the winner."""

    window_size: int
    selection_metric: str = "top_k"
    k: int = 5

    def __post_init__(self) -> None:
        if self.window_size < 1:
            raise ValidationError(f"window_size must be at least 1, got {self.window_size}")
        if self.selection_metric not in SELECTION_METRICS:
            raise ValidationError(
                f"selection_metric must be one of {SELECTION_METRICS}, "
                f"got {self.selection_metric!r}"
            )
        if self.k < 1:
            raise ValidationError(f"k must be at least 1, got {self.k}")


@dataclass(frozen=True)
class Decision:
    """One adaptive choice: which function predicts this position."""

    position: int
    chosen: str
    switched: bool
    window_scores: Mapping[str, float]


@dataclass(frozen=True)
class AdaptiveTrace:
    list_id: str
    algorithm: str
    window_size: int
    decisions: tuple[Decision, ...]

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(f"unknown algorithm {self.algorithm!r}")


@dataclass(frozen=True)
class AdaptiveRunResult:
    """Outcome of one algorithm on one list at one window size."""

    list_id: str
    algorithm: str
    score: float
    positions: int
    trace: AdaptiveTrace


class OutcomeTable:
    """Per-function item outcomes for one list, shared by both algorithms.

    Function order is registry order and is the tie-break order. Built once
    per list (from predictors or from cached outcomes) and reused across
    window sizes, so sweeps never re-run the predictors.
    """

    def __init__(self, list_id: str, outcomes: Mapping[str, Sequence[ItemOutcome]]):
        if not outcomes:
            raise ValidationError(f"outcome table for {list_id} has no functions")
        lengths = {len(seq) for seq in outcomes.values()}
        if len(lengths) != 1 or 0 in lengths:
            raise ValidationError(
                f"outcome table for {list_id} needs equal-length, non-empty outcome rows"
            )
        self.list_id = list_id
        self.labels: tuple[str, ...] = tuple(outcomes)
        self.outcomes: dict[str, tuple[ItemOutcome, ...]] = {
            label: tuple(seq) for label, seq in outcomes.items()
        }
        self.length: int = lengths.pop()

    @classmethod
    def from_predictors(
        cls,
        predictors: Mapping[str, Predictor],
        fluency_list: FluencyList,
        limit: int | None = None,
    ) -> "OutcomeTable":
        return cls(
            fluency_list.list_id,
            {
                label: score_outcomes(predictor, fluency_list, limit)
                for label, predictor in predictors.items()
            },
        )

    def item_value(self, label: str, position: int, metric: str, k: int) -> float:
        """Per-item metric value at a 1-based position."""
        outcome = self.outcomes[label][position - 1]
        if metric == "top_k":
            return 1.0 if outcome.hit(k) else 0.0
        return outcome.log_probability()

    def window_mean(self, label: str, start: int, end: int, metric: str, k: int) -> float:
        """Mean item value over positions start..end inclusive."""
        return sum(
            self.item_value(label, p, metric, k) for p in range(start, end + 1)
        ) / (end - start + 1)


def _select(
    labels: Sequence[str],
    primary: Mapping[str, float],
    secondary: Mapping[str, float] | None,
    incumbent: str | None,
) -> str:
    best = max(primary.values())
    tied = [label for label in labels if primary[label] == best]
    if len(tied) > 1 and secondary is not None:
        best_secondary = max(secondary[label] for label in tied)
        tied = [label for label in tied if secondary[label] == best_secondary]
    if incumbent is not None and incumbent in tied:
        return incumbent
    return tied[0]


def run_atc(table: OutcomeTable, config: AdaptiveConfig) -> AdaptiveRunResult | None:
    """Assess on the first x items, commit, evaluate on the rest.

    Returns None when the list has no positions after the window; callers
    count such skips.
    """
    x = config.window_size
    if x >= table.length:
        return None
    window_scores = {
        label: table.window_mean(label, 1, x, config.selection_metric, config.k)
        for label in table.labels
    }
    chosen = _select(table.labels, window_scores, None, None)
    rest = range(x + 1, table.length + 1)
    values = [table.item_value(chosen, p, config.selection_metric, config.k) for p in rest]
    decisions = tuple(
        Decision(position=p, chosen=chosen, switched=False, window_scores=window_scores)
        for p in rest
    )
    trace = AdaptiveTrace(
        list_id=table.list_id, algorithm="atc", window_size=x, decisions=decisions
    )
    return AdaptiveRunResult(
        list_id=table.list_id,
        algorithm="atc",
        score=sum(values) / len(values),
        positions=len(values),
        trace=trace,
    )


def run_ca(table: OutcomeTable, config: AdaptiveConfig) -> AdaptiveRunResult | None:
    """Re-pick the function before every position using a sliding window."""
    x = config.window_size
    if x >= table.length:
        return None
    previous: str | None = None
    values: list[float] = []
    decisions: list[Decision] = []
    for position in range(x + 1, table.length + 1):
        start, end = position - x, position - 1
        primary = {
            label: table.window_mean(label, start, end, config.selection_metric, config.k)
            for label in table.labels
        }
        secondary = {
            label: table.window_mean(label, start, end, "scaled_ll", config.k)
            for label in table.labels
        }
        chosen = _select(table.labels, primary, secondary, previous)
        decisions.append(
            Decision(
                position=position,
                chosen=chosen,
                switched=previous is not None and chosen != previous,
                window_scores=primary,
            )
        )
        values.append(table.item_value(chosen, position, config.selection_metric, config.k))
        previous = chosen
    trace = AdaptiveTrace(
        list_id=table.list_id, algorithm="ca", window_size=x, decisions=tuple(decisions)
    )
    return AdaptiveRunResult(
        list_id=table.list_id,
        algorithm="ca",
        score=sum(values) / len(values),
        positions=len(values),
        trace=trace,
    )


_RUNNERS = {"atc": run_atc, "ca": run_ca}


@dataclass(frozen=True)
class SweepResult:
    """Both algorithms across a range of window sizes.

    Curves map window size to the mean score over evaluated lists; window
    sizes where every list was too short are absent from the curves but
    present in the counts.
    """

    selection_metric: str
    k: int
    window_sizes: tuple[int, ...]
    curves: Mapping[str, Mapping[int, float]]
    scores: Mapping[str, Mapping[int, Mapping[str, float]]]
    traces: Mapping[str, Mapping[int, tuple[AdaptiveTrace, ...]]]
    evaluated: Mapping[int, int]
    skipped: Mapping[int, int]


def sweep_window_sizes(
    tables: Sequence[OutcomeTable],
    window_sizes: Sequence[int],
    config: AdaptiveConfig,
) -> SweepResult:
    """Run atc and ca on every table at every window size."""
    if not tables:
        raise ValidationError("sweep needs at least one outcome table")
    sizes = tuple(window_sizes)
    if not sizes or list(sizes) != sorted(set(sizes)) or sizes[0] < 1:
        raise ValidationError(f"window sizes must be unique, ascending, and >= 1: {sizes!r}")

    curves: dict[str, dict[int, float]] = {name: {} for name in ALGORITHMS}
    scores: dict[str, dict[int, dict[str, float]]] = {name: {} for name in ALGORITHMS}
    traces: dict[str, dict[int, tuple[AdaptiveTrace, ...]]] = {name: {} for name in ALGORITHMS}
    evaluated: dict[int, int] = {}
    skipped: dict[int, int] = {}

    for x in sizes:
        cfg = replace(config, window_size=x)
        evaluated[x] = sum(1 for table in tables if x < table.length)
        skipped[x] = len(tables) - evaluated[x]
        for name, runner in _RUNNERS.items():
            results = [runner(table, cfg) for table in tables]
            kept = [r for r in results if r is not None]
            scores[name][x] = {r.list_id: r.score for r in kept}
            traces[name][x] = tuple(r.trace for r in kept)
            if kept:
                curves[name][x] = sum(r.score for r in kept) / len(kept)

    return SweepResult(
        selection_metric=config.selection_metric,
        k=config.k,
        window_sizes=sizes,
        curves=curves,
        scores=scores,
        traces=traces,
        evaluated=evaluated,
        skipped=skipped,
    )


def write_traces_jsonl(traces: Sequence[AdaptiveTrace], path: str | Path) -> None:
    lines = []
    for trace in traces:
        lines.append(
            json_line(
                {
                    "list_id": trace.list_id,
                    "algorithm": trace.algorithm,
                    "window_size": trace.window_size,
                    "decisions": [
                        {
                            "position": d.position,
                            "chosen": d.chosen,
                            "switched": d.switched,
                            "window_scores": dict(sorted(d.window_scores.items())),
                        }
                        for d in trace.decisions
                    ],
                }
            )
        )
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_traces_jsonl(path: str | Path) -> list[AdaptiveTrace]:
    traces: list[AdaptiveTrace] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            traces.append(
                AdaptiveTrace(
                    list_id=raw["list_id"],
                    algorithm=raw["algorithm"],
                    window_size=raw["window_size"],
                    decisions=tuple(
                        Decision(
                            position=d["position"],
                            chosen=d["chosen"],
                            switched=d["switched"],
                            window_scores=d["window_scores"],
                        )
                        for d in raw["decisions"]
                    ),
                )
            )
    return traces
