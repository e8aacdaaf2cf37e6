"""Render run artifacts into a readable report.

Reads the matrices, aggregate files and (when present) the adaptive-sweep
artifacts from an output directory and writes:

    report/report.md                       the tables
    report/plots/window_curve_<m>.csv      plot-ready curve data
    report/figures/window_curve_<m>.png    accuracy vs window size
    report/figures/switch_rates.png        how often ca changes function

Percentage metrics (coverage, top-k) are shown as percentages with one
decimal; scaled log-likelihood is shown as-is with two decimals.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from ._io import atomic_write_text, fmt_float
from .errors import DataError

log = logging.getLogger(__name__)

_ALGORITHM_TITLES = {"atc": "assess-then-commit", "ca": "continuous assessment"}


def _metric_title(name: str) -> str:
    if name == "coverage":
        return "Coverage"
    if name == "scaled_ll":
        return "Scaled log-likelihood"
    if name.startswith("top_"):
        return f"Top-{name[4:]} accuracy"
    return name


def _is_percent(name: str) -> bool:
    return name == "coverage" or name.startswith("top_")


def _show(value: float, metric: str) -> str:
    if _is_percent(metric):
        return f"{100.0 * value:.1f}"
    return f"{value:.2f}"


def _read_json(path: Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _read_csv_rows(path: Path) -> list[dict[str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _table(header: list[str], rows: list[list[str]]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join(" --- " for _ in header) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    lines.append("")
    return lines


def render_report(output_dir: str | Path) -> Path:
    """Build report.md plus figures from a run's output directory."""
    out = Path(output_dir)
    aggregates_dir = out / "aggregates"
    if not aggregates_dir.is_dir():
        raise DataError(f"{aggregates_dir} is missing; run evaluate first")
    metric_files = sorted(
        p for p in aggregates_dir.glob("*.json") if not p.name.endswith("_by_category.json")
    )
    if not metric_files:
        raise DataError(f"{aggregates_dir} has no aggregate files; run evaluate first")

    report_dir = out / "report"
    plots_dir = report_dir / "plots"
    figures_dir = report_dir / "figures"
    for directory in (report_dir, plots_dir, figures_dir):
        directory.mkdir(parents=True, exist_ok=True)

    metric_order = ["coverage", "scaled_ll"] + sorted(
        (p.stem for p in metric_files if p.stem.startswith("top_")),
        key=lambda name: int(name[4:]),
    )
    aggregates = {p.stem: _read_json(p) for p in metric_files}

    lines: list[str] = ["# Fluency-list prediction results", ""]

    lines += ["## Prediction functions", ""]
    lines += [
        "Avg is the grand mean over functions and lists, BO the best single",
        "function's mean, BI the mean of each list's best function.",
        "",
    ]
    for metric in metric_order:
        if metric not in aggregates:
            continue
        payload = aggregates[metric]
        unit = " (%)" if _is_percent(metric) else ""
        lines += [f"### {_metric_title(metric)}{unit}", ""]
        rows = []
        for group, values in payload["groups"].items():
            rows.append(
                [
                    group,
                    _show(values["avg"], metric),
                    _show(values["bo"], metric),
                    _show(values["bi"], metric),
                    values["bo_function"],
                ]
            )
        lines += _table(["Functions", "Avg", "BO", "BI", "BO function"], rows)

    by_category_files = sorted(aggregates_dir.glob("*_by_category.json"))
    if by_category_files:
        lines += ["## Per-category best overall function", ""]
        categories: dict[str, dict[str, float]] = {}
        for path in by_category_files:
            payload = _read_json(path)
            metric = payload["metric"] if payload["metric"] != "top_k" else f"top_{payload['k']}"
            for category, values in payload["categories"].items():
                categories.setdefault(category, {})[metric] = values["bo"]
        header = ["Category"] + [
            _metric_title(m) + (" (%)" if _is_percent(m) else "") for m in metric_order
        ]
        rows = []
        for category in sorted(categories):
            row = [category]
            for metric in metric_order:
                value = categories[category].get(metric)
                row.append("" if value is None else _show(value, metric))
            rows.append(row)
        lines += _table(header, rows)

    adaptive_dir = out / "adaptive"
    if adaptive_dir.is_dir() and (adaptive_dir / "aggregates.json").exists():
        lines += _render_adaptive(adaptive_dir, aggregates, plots_dir, figures_dir)
    else:
        lines += [
            "## Adaptive selection",
            "",
            "No adaptive artifacts found; run adapt to fill in this section.",
            "",
        ]

    report_path = report_dir / "report.md"
    atomic_write_text(report_path, "\n".join(lines).rstrip() + "\n")
    return report_path


def _curve_points(rows: list[dict[str, str]], column: str) -> list[tuple[int, float]]:
    points = []
    for row in rows:
        if row[column]:
            points.append((int(row["window_size"]), float(row[column])))
    return points


def _render_adaptive(
    adaptive_dir: Path,
    aggregates: dict[str, dict],
    plots_dir: Path,
    figures_dir: Path,
) -> list[str]:
    lines = ["## Adaptive function selection", ""]
    adaptive_aggregates = _read_json(adaptive_dir / "aggregates.json")

    rows = []
    for metric, per_algorithm in adaptive_aggregates.items():
        for algorithm, entry in per_algorithm.items():
            if "avg_over_windows" not in entry:
                continue
            rows.append(
                [
                    _metric_title(metric),
                    _ALGORITHM_TITLES[algorithm],
                    _show(entry["avg_over_windows"], metric),
                    str(entry["best_window"]),
                    _show(entry["best_window_score"], metric),
                    _show(entry.get("best_per_list_mean", entry["best_window_score"]), metric),
                ]
            )
    lines += [
        "Scores over the sweep of window sizes; percentage metrics in percent.",
        "",
    ]
    lines += _table(
        ["Metric", "Algorithm", "Mean over windows", "Best window", "At best window", "Per-list best"],
        rows,
    )

    crossovers_path = adaptive_dir / "crossovers.csv"
    if crossovers_path.exists():
        rows = []
        for row in _read_csv_rows(crossovers_path):
            rows.append(
                [
                    _metric_title(row["metric"]),
                    _ALGORITHM_TITLES[row["algorithm"]],
                    row["reference"].upper(),
                    _show(float(row["reference_value"]), row["metric"]),
                    row["window_size"] or "not reached",
                ]
            )
        lines += ["### Window sizes needed to match the static functions", ""]
        lines += _table(
            ["Metric", "Algorithm", "Reference", "Reference value", "First window"], rows
        )

    shares_path = adaptive_dir / "choice_shares.csv"
    if shares_path.exists():
        share_rows = _read_csv_rows(shares_path)
        pooled: dict[tuple[str, str, str], list[float]] = {}
        for row in share_rows:
            key = (row["metric"], row["algorithm"], row["group"])
            pooled.setdefault(key, []).append(float(row["share_percent"]))
        rows = [
            [
                _metric_title(metric),
                _ALGORITHM_TITLES[algorithm],
                group,
                f"{sum(values) / len(values):.1f}",
            ]
            for (metric, algorithm, group), values in sorted(pooled.items())
        ]
        lines += ["### Which function family gets chosen (% of decisions, mean across windows)", ""]
        lines += _table(["Metric", "Algorithm", "Family", "Share (%)"], rows)

    lines += _render_curve_figures(adaptive_dir, aggregates, plots_dir, figures_dir)
    lines += _render_switch_figure(adaptive_dir, figures_dir)
    return lines


def _render_curve_figures(
    adaptive_dir: Path,
    aggregates: dict[str, dict],
    plots_dir: Path,
    figures_dir: Path,
) -> list[str]:
    lines: list[str] = []
    for curve_path in sorted(adaptive_dir.glob("curve_*.csv")):
        metric = curve_path.stem[len("curve_"):]
        rows = _read_csv_rows(curve_path)
        atc = _curve_points(rows, "atc")
        ca = _curve_points(rows, "ca")
        static = aggregates.get(metric, {}).get("groups", {}).get("all")
        percent = _is_percent(metric)
        scale = 100.0 if percent else 1.0

        plot_path = plots_dir / f"window_curve_{metric}.csv"
        buf = ["window_size,atc,ca,bo,bi"]
        for row in rows:
            buf.append(
                ",".join(
                    [
                        row["window_size"],
                        row["atc"],
                        row["ca"],
                        fmt_float(static["bo"]) if static else "",
                        fmt_float(static["bi"]) if static else "",
                    ]
                )
            )
        atomic_write_text(plot_path, "\n".join(buf) + "\n")

        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        if atc:
            ax.plot(
                [x for x, _ in atc],
                [scale * v for _, v in atc],
                marker="o",
                label="assess-then-commit",
            )
        if ca:
            ax.plot(
                [x for x, _ in ca],
                [scale * v for _, v in ca],
                marker="s",
                label="continuous assessment",
            )
        if static:
            ax.axhline(scale * static["bo"], linestyle="--", color="gray", label="static BO")
            ax.axhline(scale * static["bi"], linestyle=":", color="gray", label="static BI")
        ax.set_xlabel("window size (items)")
        ax.set_ylabel(_metric_title(metric) + (" (%)" if percent else ""))
        ax.grid(alpha=0.3)
        ax.legend()
        fig.tight_layout()
        figure_path = figures_dir / f"window_curve_{metric}.png"
        fig.savefig(figure_path, dpi=150)
        plt.close(fig)
        lines += [f"![{_metric_title(metric)} by window size](figures/{figure_path.name})", ""]
    return lines


def _render_switch_figure(adaptive_dir: Path, figures_dir: Path) -> list[str]:
    switch_path = adaptive_dir / "switch_rates.csv"
    if not switch_path.exists():
        return []
    rows = _read_csv_rows(switch_path)
    if not rows:
        return []
    by_metric: dict[str, list[tuple[int, float]]] = {}
    for row in rows:
        by_metric.setdefault(row["metric"], []).append(
            (int(row["window_size"]), float(row["rate_percent"]))
        )
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for metric, points in sorted(by_metric.items()):
        points.sort()
        ax.plot(
            [x for x, _ in points],
            [rate for _, rate in points],
            marker="o",
            label=_metric_title(metric),
        )
    ax.set_xlabel("window size (items)")
    ax.set_ylabel("function switches (% of decisions)")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    figure_path = figures_dir / "switch_rates.png"
    fig.savefig(figure_path, dpi=150)
    plt.close(fig)
    return [f"![Switch rate by window size](figures/{figure_path.name})", ""]
