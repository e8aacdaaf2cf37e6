"""Command orchestration: clean, evaluate, and adapt.

Each command reads the run config, does its work, and leaves deterministic
artifacts under the output directory:

    cleaned.csv, cleaning_report.csv, clean_summary.json
    matrices/<metric>.csv (+ .meta.json sidecars)
    aggregates/<metric>.json, aggregates/<metric>_by_category.json
    cache/scores/<function>/<list>.json      per-(function, list) outcomes
    adaptive/curve_<metric>.csv, traces, crossovers, switch rates, shares
    evaluate_summary.json, adapt_summary.json

The score cache is the resume point: evaluate with --resume, and adapt
always, reuse any cache entry recorded with the same candidate limit.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Mapping, Sequence

from ._io import atomic_write_json, atomic_write_text, fmt_float
from .adaptive import (
    AdaptiveConfig,
    AdaptiveTrace,
    OutcomeTable,
    SweepResult,
    sweep_window_sizes,
    write_traces_jsonl,
)
from .backends import CachingBackend, FixtureBackend, MaskBackend, ServiceBackend
from .cleaning import clean_dataset, write_reports_csv
from .config import RunConfig
from .conceptnet import load_lexicon_cache
from .corpus import (
    CategoryLexicon,
    FluencyList,
    load_association_norms,
    load_embeddings,
    load_fluency_dataset,
    load_frequency_table,
    save_fluency_dataset,
)
from .errors import DataError, ValidationError
from .metrics import (
    ItemOutcome,
    ListScore,
    ScoreMatrix,
    aggregate,
    choice_share,
    crossover_point,
    matrices_from_scores,
    per_category_breakdown,
    summarize_outcomes,
    switch_rate,
    write_matrix_csv,
)
from .predictors import Predictor, ResourceBundle, build_predictors

log = logging.getLogger(__name__)


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name)


def _load_word_set(path: Path) -> frozenset[str]:
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.strip().lower()
            if word and not word.startswith("#"):
                words.add(word)
    if not words:
        raise DataError(f"{path}: word list is empty")
    return frozenset(words)


def build_backend(config: RunConfig) -> MaskBackend:
    if config.backend.kind == "service":
        assert config.backend.url is not None
        backend: MaskBackend = ServiceBackend(
            config.backend.url,
            timeout=config.backend.timeout,
            retries=config.backend.retries,
        )
    else:
        assert config.backend.fixture is not None
        backend = FixtureBackend(config.backend.fixture)
    if config.backend.cache_dir is not None:
        backend = CachingBackend(backend, config.backend.cache_dir)
    return backend


def load_resources(config: RunConfig, with_backend: bool = True) -> ResourceBundle:
    paths = config.resources
    bundle = ResourceBundle()
    if "frequency" in paths:
        bundle.frequency = load_frequency_table(paths["frequency"])
    if "usf" in paths:
        bundle.usf = load_association_norms(paths["usf"])
    if "swow" in paths:
        bundle.swow = load_association_norms(paths["swow"])
    if "w2v" in paths:
        bundle.w2v = load_embeddings(paths["w2v"])
    if "glove" in paths:
        bundle.glove = load_embeddings(paths["glove"])
    if "nouns" in paths:
        bundle.nouns = _load_word_set(paths["nouns"])
    if "stopwords" in paths:
        bundle.stopwords = _load_word_set(paths["stopwords"])
    if with_backend and config.uses_mlm:
        bundle.backend = build_backend(config)
    return bundle


def load_lexicons(config: RunConfig) -> dict[str, CategoryLexicon]:
    if "lexicons" not in config.resources:
        return {}
    cache = load_lexicon_cache(config.resources["lexicons"])
    return {
        category: CategoryLexicon(category=category, instances=frozenset(instances))
        for category, instances in cache.items()
    }


def run_clean(config: RunConfig) -> dict:
    """Clean the configured dataset and write the audited artifacts."""
    lists = load_fluency_dataset(config.dataset_path, config.columns, config.delimiter)
    lexicons = load_lexicons(config)
    missing = sorted({fl.category for fl in lists} - set(lexicons))
    if missing:
        log.warning("no lexicon for category(ies): %s; correction skipped there", ", ".join(missing))
    cleaned, reports = clean_dataset(
        lists, lexicons, max_distance=config.cleaning_max_distance
    )
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    save_fluency_dataset(cleaned, out / "cleaned.csv", config.columns, config.delimiter)
    write_reports_csv(reports, out / "cleaning_report.csv")
    summary = {
        "lists": len(cleaned),
        "items": sum(len(fl) for fl in cleaned),
        "items_before": sum(len(fl) for fl in lists),
        "changed_items": len(reports),
        "corrections": sum(1 for r in reports if r.correction_applied),
        "lemma_changes": sum(1 for r in reports if r.lemma_changed),
        "dropped_duplicates": sum(1 for r in reports if r.dropped_duplicate),
        "categories_without_lexicon": missing,
    }
    atomic_write_json(out / "clean_summary.json", summary)
    return summary


def _score_cache_path(out_dir: Path, label: str, list_id: str) -> Path:
    return out_dir / "cache" / "scores" / _safe_name(label) / (_safe_name(list_id) + ".json")


def _write_score_cache(
    path: Path, label: str, list_id: str, limit: int | None, outcomes: Sequence[ItemOutcome]
) -> None:
    payload = {
        "function": label,
        "list_id": list_id,
        "limit": limit,
        "outcomes": [
            {
                "position": o.position,
                "item": o.item,
                "in_coverage": o.in_coverage,
                "probability": o.probability,
                "rank": o.rank,
            }
            for o in outcomes
        ],
    }
    atomic_write_text(path, json.dumps(payload, sort_keys=True))


def _read_score_cache(
    path: Path, label: str, list_id: str, limit: int | None
) -> tuple[ItemOutcome, ...] | None:
    if not path.exists():
        return None
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, ValueError):
        log.warning("unreadable score cache entry %s, recomputing", path)
        return None
    if (
        payload.get("function") != label
        or payload.get("list_id") != list_id
        or payload.get("limit") != limit
    ):
        return None
    return tuple(
        ItemOutcome(
            position=o["position"],
            item=o["item"],
            in_coverage=o["in_coverage"],
            probability=o["probability"],
            rank=o["rank"],
        )
        for o in payload["outcomes"]
    )


class _Scorer:
    """Computes (function, list) outcomes through the score cache."""

    def __init__(
        self,
        config: RunConfig,
        lists: Sequence[FluencyList],
        reuse_cache: bool,
    ):
        self.config = config
        self.registry = config.require_functions()
        self.lists = list(lists)
        self.reuse_cache = reuse_cache
        self.labels = self.registry.labels
        self._predictors: Mapping[str, Predictor] | None = None

    def _get_predictors(self) -> Mapping[str, Predictor]:
        if self._predictors is None:
            resources = load_resources(self.config)
            self._predictors = build_predictors(self.registry, resources)
        return self._predictors

    def _outcomes_for(self, label: str, fluency_list: FluencyList) -> tuple[ItemOutcome, ...]:
        from .metrics import score_outcomes

        path = _score_cache_path(self.config.output_dir, label, fluency_list.list_id)
        if self.reuse_cache:
            cached = _read_score_cache(path, label, fluency_list.list_id, self.config.limit)
            if cached is not None:
                return cached
        outcomes = score_outcomes(
            self._get_predictors()[label], fluency_list, self.config.limit
        )
        _write_score_cache(path, label, fluency_list.list_id, self.config.limit, outcomes)
        return outcomes

    def all_outcomes(self) -> dict[str, dict[str, tuple[ItemOutcome, ...]]]:
        """outcomes[label][list_id], computed with the configured jobs."""
        pairs = [(label, fl) for label in self.labels for fl in self.lists]
        if self.config.jobs > 1:
            with ThreadPoolExecutor(max_workers=self.config.jobs) as pool:
                results = list(pool.map(lambda p: self._outcomes_for(*p), pairs))
        else:
            results = [self._outcomes_for(label, fl) for label, fl in pairs]
        table: dict[str, dict[str, tuple[ItemOutcome, ...]]] = {
            label: {} for label in self.labels
        }
        for (label, fl), outcomes in zip(pairs, results):
            table[label][fl.list_id] = outcomes
        return table


def _load_lists(config: RunConfig) -> list[FluencyList]:
    lists = load_fluency_dataset(config.dataset_path, config.columns, config.delimiter)
    for fl in lists:
        try:
            fl.check_clean()
        except ValidationError as exc:
            log.warning("dataset looks uncleaned: %s", exc)
            break
    return lists


def _scores_from_outcomes(
    outcomes: Mapping[str, Mapping[str, tuple[ItemOutcome, ...]]],
    k_values: Sequence[int],
) -> dict[str, dict[str, ListScore]]:
    return {
        label: {
            list_id: summarize_outcomes(list_id, label, outs, k_values)
            for list_id, outs in per_list.items()
        }
        for label, per_list in outcomes.items()
    }


def _aggregate_payload(matrix: ScoreMatrix, config: RunConfig) -> dict:
    groups: dict[str, dict] = {}
    by_approach: dict[str, list[str]] = {}
    for spec in config.require_functions():
        by_approach.setdefault(spec.approach.value, []).append(spec.label)
    selections = {"all": list(matrix.function_labels), **by_approach}
    for name, labels in selections.items():
        sub = ScoreMatrix(
            metric=matrix.metric,
            k=matrix.k,
            function_labels=tuple(labels),
            list_ids=matrix.list_ids,
            values=tuple(matrix.row(label) for label in labels),
        )
        report = aggregate(sub)
        groups[name] = {
            "avg": round(report.avg, 6),
            "bo": round(report.bo, 6),
            "bi": round(report.bi, 6),
            "bo_function": report.bo_function,
            "bi_functions": list(report.bi_functions),
        }
    return {"metric": matrix.metric, "k": matrix.k, "groups": groups}


def run_evaluate(config: RunConfig) -> dict:
    """Score every configured function on every list; write matrices and
    aggregate reports."""
    lists = _load_lists(config)
    scorer = _Scorer(config, lists, reuse_cache=config.resume)
    outcomes = scorer.all_outcomes()
    scores = _scores_from_outcomes(outcomes, config.k_values)
    list_ids = [fl.list_id for fl in lists]
    matrices = matrices_from_scores(scorer.labels, list_ids, scores, config.k_values)

    out = config.output_dir
    (out / "matrices").mkdir(parents=True, exist_ok=True)
    (out / "aggregates").mkdir(parents=True, exist_ok=True)
    for name, matrix in matrices.items():
        write_matrix_csv(matrix, out / "matrices" / f"{name}.csv")
        atomic_write_json(out / "aggregates" / f"{name}.json", _aggregate_payload(matrix, config))
        by_category = {
            category: {
                "avg": round(report.avg, 6),
                "bo": round(report.bo, 6),
                "bi": round(report.bi, 6),
                "bo_function": report.bo_function,
            }
            for category, report in per_category_breakdown(matrix).items()
        }
        atomic_write_json(
            out / "aggregates" / f"{name}_by_category.json",
            {"metric": matrix.metric, "k": matrix.k, "categories": by_category},
        )

    summary = {
        "functions": list(scorer.labels),
        "lists": len(lists),
        "k_values": list(config.k_values),
        "limit": config.limit,
        "matrices": sorted(matrices),
    }
    atomic_write_json(out / "evaluate_summary.json", summary)
    return summary


def _sweep_plan(config: RunConfig) -> list[tuple[str, str, int]]:
    """(file suffix, selection metric, k) for each requested sweep."""
    if config.selection_metric == "scaled_ll":
        return [("scaled_ll", "scaled_ll", max(config.k_values))]
    return [(f"top_{k}", "top_k", k) for k in config.k_values]


def _write_curve_csv(path: Path, sweep: SweepResult) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["window_size", "atc", "ca", "evaluated_lists", "skipped_lists"])
    for x in sweep.window_sizes:
        atc = sweep.curves["atc"].get(x)
        ca = sweep.curves["ca"].get(x)
        writer.writerow(
            [
                str(x),
                "" if atc is None else fmt_float(atc),
                "" if ca is None else fmt_float(ca),
                str(sweep.evaluated[x]),
                str(sweep.skipped[x]),
            ]
        )
    atomic_write_text(path, buf.getvalue())


def _adaptive_aggregates(sweep: SweepResult) -> dict:
    """Window-size reductions per algorithm: mean over x, best x, and the
    per-list best over x."""
    result: dict[str, dict] = {}
    for algorithm in ("atc", "ca"):
        curve = sweep.curves[algorithm]
        entry: dict = {"windows_evaluated": len(curve)}
        if curve:
            entry["avg_over_windows"] = round(sum(curve.values()) / len(curve), 6)
            best_x = max(sorted(curve), key=lambda x: curve[x])
            entry["best_window"] = best_x
            entry["best_window_score"] = round(curve[best_x], 6)
            per_list_best: dict[str, float] = {}
            for x, per_list in sweep.scores[algorithm].items():
                for list_id, score in per_list.items():
                    if list_id not in per_list_best or score > per_list_best[list_id]:
                        per_list_best[list_id] = score
            if per_list_best:
                entry["best_per_list_mean"] = round(
                    sum(per_list_best.values()) / len(per_list_best), 6
                )
        result[algorithm] = entry
    return result


def run_adapt(config: RunConfig) -> dict:
    """Run both adaptive algorithms across the configured window sizes."""
    if not config.window_sizes:
        raise ValidationError("[adaptive] window_sizes is empty; nothing to sweep")
    lists = _load_lists(config)
    scorer = _Scorer(config, lists, reuse_cache=True)
    outcomes = scorer.all_outcomes()
    labels = scorer.labels
    tables = [
        OutcomeTable(fl.list_id, {label: outcomes[label][fl.list_id] for label in labels})
        for fl in lists
    ]
    scores = _scores_from_outcomes(outcomes, config.k_values)
    list_ids = [fl.list_id for fl in lists]
    matrices = matrices_from_scores(labels, list_ids, scores, config.k_values)
    approach_of = {spec.label: spec.approach.value for spec in scorer.registry}

    out = config.output_dir / "adaptive"
    out.mkdir(parents=True, exist_ok=True)

    crossover_rows: list[list[str]] = []
    switch_rows: list[list[str]] = []
    share_rows: list[list[str]] = []
    aggregates: dict[str, dict] = {}
    summary: dict[str, dict] = {}

    for suffix, metric, k in _sweep_plan(config):
        base_config = AdaptiveConfig(
            window_size=config.window_sizes[0], selection_metric=metric, k=k
        )
        sweep = sweep_window_sizes(tables, config.window_sizes, base_config)
        _write_curve_csv(out / f"curve_{suffix}.csv", sweep)
        for algorithm in ("atc", "ca"):
            all_traces: list[AdaptiveTrace] = []
            for x in sweep.window_sizes:
                all_traces.extend(sweep.traces[algorithm][x])
            write_traces_jsonl(all_traces, out / f"traces_{algorithm}_{suffix}.jsonl")

        static_matrix = matrices[suffix if metric == "top_k" else "scaled_ll"]
        static = aggregate(static_matrix)
        for algorithm in ("atc", "ca"):
            curve = sweep.curves[algorithm]
            for ref_name, ref_value in (("bo", static.bo), ("bi", static.bi)):
                x = crossover_point(curve, ref_value) if curve else None
                crossover_rows.append(
                    [
                        suffix,
                        algorithm,
                        ref_name,
                        fmt_float(ref_value),
                        "" if x is None else str(x),
                    ]
                )

        for x in sweep.window_sizes:
            traces = sweep.traces["ca"][x]
            try:
                rate = switch_rate(traces)
            except ValidationError:
                continue
            switch_rows.append([suffix, str(x), fmt_float(rate)])

        for algorithm in ("atc", "ca"):
            for x in sweep.window_sizes:
                traces = sweep.traces[algorithm][x]
                if not traces:
                    continue
                shares = choice_share(traces, approach_of)
                for group, share in shares.items():
                    share_rows.append([suffix, algorithm, str(x), group, fmt_float(share)])

        aggregates[suffix] = _adaptive_aggregates(sweep)
        summary[suffix] = {
            "window_sizes": list(sweep.window_sizes),
            "evaluated": {str(x): n for x, n in sweep.evaluated.items()},
            "skipped": {str(x): n for x, n in sweep.skipped.items()},
        }

    _write_rows(
        out / "crossovers.csv",
        ["metric", "algorithm", "reference", "reference_value", "window_size"],
        crossover_rows,
    )
    _write_rows(out / "switch_rates.csv", ["metric", "window_size", "rate_percent"], switch_rows)
    _write_rows(
        out / "choice_shares.csv",
        ["metric", "algorithm", "window_size", "group", "share_percent"],
        share_rows,
    )
    atomic_write_json(out / "aggregates.json", aggregates)
    atomic_write_json(out / "adapt_summary.json", summary)
    return summary


def _write_rows(path: Path, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())
