"""Behavioral gate for the whole toolkit, one test per guarantee.

Every test here checks the package against something it does not share code
with: brute-force oracles, the textbook edit-distance recursion, committed
golden files, closed-form probabilities, or a second cold run of the same
command. Each test ends with a single PASS line so a run with -s reads as a
checklist; the slow exhaustive sweeps report their elapsed time and assert
the budget they are expected to meet.
"""

import csv
import itertools
import json
import math
import random
import shutil
import time

import pytest

from conftest import FIXTURES
from fluencybench.adaptive import AdaptiveConfig, OutcomeTable, run_atc, run_ca
from fluencybench.cleaning import clean_item, levenshtein
from fluencybench.cli import main
from fluencybench.conceptnet import load_lexicon_cache
from fluencybench.corpus import AssociationNorms, CategoryLexicon, FluencyList
from fluencybench.metrics import (
    ItemOutcome,
    ScoreMatrix,
    aggregate,
    crossover_point,
    score_list,
    summarize_outcomes,
    switch_rate,
)
from fluencybench.mlm import (
    CANDIDATE_BUDGETS,
    FIRST_MASK_WIDTH,
    NEXT_MASK_WIDTH,
    build_prompt,
    fill_masks_greedy,
    predict_mlm,
)
from fluencybench.predictors import (
    Approach,
    FunctionSpec,
    PredictionContext,
    build_distribution,
    predict_norms_walk,
)


def _ok(label: str) -> None:
    print(f"PASS {label}")


def _matrix(values) -> ScoreMatrix:
    return ScoreMatrix(
        metric="coverage",
        k=None,
        function_labels=tuple(f"f{i}" for i in range(len(values))),
        list_ids=tuple(f"p{j}|cat|1" for j in range(len(values[0]))),
        values=tuple(tuple(row) for row in values),
    )


def _tree(root):
    return {
        p.relative_to(root).as_posix(): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


# ---------------------------------------------------------------------------
# aggregation


def _oracle_aggregate(values):
    """Definition-direct: mean of the function means, the best function
    mean, and the mean over lists of the per-list best."""
    function_means = [sum(row) / len(row) for row in values]
    avg = sum(function_means) / len(function_means)
    bo = max(function_means)
    bi = sum(max(column) for column in zip(*values)) / len(values[0])
    return avg, bo, bi


def test_aggregation_matches_a_brute_force_oracle():
    started = time.monotonic()
    entries = (0.0, 0.5, 1.0)
    checked = 0
    for n_functions, n_lists in itertools.product((1, 2, 3), repeat=2):
        for cells in itertools.product(entries, repeat=n_functions * n_lists):
            values = tuple(
                cells[i * n_lists : (i + 1) * n_lists] for i in range(n_functions)
            )
            report = aggregate(_matrix(values))
            avg, bo, bi = _oracle_aggregate(values)
            assert (report.avg, report.bo, report.bi) == (avg, bo, bi), values
            checked += 1
    assert checked == 21297

    rng = random.Random(160816)
    for _ in range(10_000):
        values = tuple(
            tuple(rng.random() for _ in range(rng.randint(1, 6)))
            for _ in range(rng.randint(1, 5))
        )
        widest = max(len(row) for row in values)
        values = tuple(row + (0.0,) * (widest - len(row)) for row in values)
        report = aggregate(_matrix(values))
        assert report.avg <= report.bo <= report.bi

    elapsed = time.monotonic() - started
    assert elapsed < 10.0, f"aggregation sweep took {elapsed:.1f}s"
    _ok(
        f"aggregation: {checked} exhaustive + 10000 random matrices "
        f"against the oracle in {elapsed:.1f}s"
    )


def test_aggregation_worked_examples_are_exact():
    first = aggregate(_matrix(((1.0, 2.0), (3.0, 4.0))))
    assert (first.avg, first.bo, first.bi) == (2.5, 3.5, 3.5)
    second = aggregate(_matrix(((5.0, 0.0), (0.0, 5.0))))
    assert (second.avg, second.bo, second.bi) == (2.5, 2.5, 5.0)
    _ok("aggregation worked examples: (2.5, 3.5, 3.5) and (2.5, 2.5, 5.0)")


# ---------------------------------------------------------------------------
# prompt rendering


def test_prompt_rendering_matches_the_worked_example():
    rendered = build_prompt("fruits", ["strawberry"], 2, "[MASK]", 2)
    assert rendered == "Examples of fruits are the strawberry and the [MASK][MASK]."
    _ok("prompt template 2 with one context item renders the exact sentence")


# ---------------------------------------------------------------------------
# association norms


def test_norms_probabilities_are_strength_ratios_and_censoring_keeps_order():
    rng = random.Random(8121)
    entries = {
        f"category{c}": {
            f"response{c}_{r}": rng.uniform(0.05, 4.0)
            for r in range(rng.randint(4, 12))
        }
        for c in range(10)
    }
    norms = AssociationNorms(entries=entries)

    for cue, strengths in entries.items():
        full = predict_norms_walk(PredictionContext(category=cue), norms)
        total = sum(strengths.values())
        for word, strength in strengths.items():
            assert full.probability(word) == pytest.approx(strength / total, abs=1e-12)

        used = frozenset(rng.sample(sorted(strengths), k=len(strengths) // 3))
        censored = predict_norms_walk(
            PredictionContext(category=cue, used_items=used), norms
        )
        survivors = [w for w, _ in full.candidates if w not in used]
        assert [w for w, _ in censored.candidates] == survivors
        remaining = sum(strengths[w] for w in survivors)
        for word in survivors:
            assert censored.probability(word) == pytest.approx(
                strengths[word] / remaining, abs=1e-12
            )
    _ok("norms walk: p = strength/total to 1e-12, censoring keeps relative order")


# ---------------------------------------------------------------------------
# masked-LM expansion


def _enumerate_fills(backend, prompt, mask_count, budget):
    """Depth-first enumeration with the same widths, kept-slice rescaling
    and prompt splicing as the production beam, but no queue. Pruning to
    the budget happens once at the end, so agreement with the production
    output also shows the per-step pruning never bit on this input."""
    paths = []

    def expand(current_prompt, word, prob, step):
        if step == mask_count:
            paths.append((word, prob))
            return
        if step == 0:
            width = budget if mask_count == 1 else FIRST_MASK_WIDTH
        else:
            width = NEXT_MASK_WIDTH
        masks = backend.fill(current_prompt, top_n=width)
        options = masks[0][:width] if masks else []
        total = sum(p for _, p in options)
        if total <= 0:
            return
        for token, p in options:
            if token.startswith("##"):
                surface, boundary = token[2:], False
            elif token[:1] in ("Ġ", "▁"):
                surface, boundary = token[1:], True
            else:
                surface, boundary = token, False
            if not surface.strip():
                continue
            insert = (" " if boundary and word else "") + surface
            expand(
                current_prompt.replace(backend.mask_token, insert, 1),
                word + insert,
                prob * (p / total),
                step + 1,
            )

    expand(prompt, "", 1.0, 0)
    paths.sort(key=lambda e: (-e[1], e[0]))
    totals = {}
    for word, prob in paths[:budget]:
        lowered = word.strip().lower()
        if lowered:
            totals[lowered] = totals.get(lowered, 0.0) + prob
    return sorted(totals.items(), key=lambda e: (-e[1], e[0]))


def test_greedy_fill_matches_full_enumeration_on_the_fixture(mlm_backend):
    for mask_count in (1, 2, 3, 4):
        budget = CANDIDATE_BUDGETS[mask_count]
        prompt = build_prompt("fruits", [], mask_count, mlm_backend.mask_token, 2)
        produced = fill_masks_greedy(mlm_backend, prompt, mask_count)
        expected = _enumerate_fills(mlm_backend, prompt, mask_count, budget)
        assert produced == expected, f"mask_count={mask_count}"
        assert len(produced) <= budget
        if produced:
            assert sum(p for _, p in produced) == pytest.approx(1.0, abs=1e-6)
    _ok("greedy fill equals full enumeration, mass 1 per group, budgets respected")


class _Scripted:
    """Inline backend over an exact prompt -> options table."""

    mask_token = "[MASK]"
    model_name = "inline"

    def __init__(self, table):
        self._table = table
        self.calls = []

    def fill(self, prompt, top_n):
        self.calls.append(prompt)
        return [list(self._table[prompt])[:top_n]]


def test_beam_pruning_enforces_the_budget_at_every_step():
    # Budget 3 with five single-mask options: only the top three survive.
    single = _Scripted(
        {
            "A [MASK].": [
                ("v", 0.3),
                ("w", 0.25),
                ("x", 0.2),
                ("y", 0.15),
                ("z", 0.1),
            ]
        }
    )
    kept = fill_masks_greedy(single, "A [MASK].", 1, budget=3)
    assert [w for w, _ in kept] == ["v", "w", "x"]
    assert sum(p for _, p in kept) == pytest.approx(1.0, abs=1e-12)

    # Budget 3 with four first-step options: the fourth beam must die before
    # the second step, so its continuation prompt is never requested.
    double = _Scripted(
        {
            "A [MASK][MASK].": [("w", 0.4), ("x", 0.3), ("y", 0.2), ("z", 0.1)],
            "A w[MASK].": [("##1", 1.0)],
            "A x[MASK].": [("##1", 1.0)],
            "A y[MASK].": [("##1", 1.0)],
        }
    )
    result = fill_masks_greedy(double, "A [MASK][MASK].", 2, budget=3)
    assert [w for w, _ in result] == ["w1", "x1", "y1"]
    assert len(double.calls) == 4
    assert "A z[MASK]." not in double.calls
    _ok("beam pruning caps every step at the budget, pruned beams never expand")


def test_masked_lm_prediction_matches_the_committed_golden(
    mlm_backend, freq_table, noun_set, stopword_set
):
    spec = FunctionSpec(approach=Approach.MLM, context_size=0, prompt_id=2)
    entries = []
    for category in ("fruits", "animals"):
        distribution = predict_mlm(
            spec,
            PredictionContext(category=category),
            mlm_backend,
            freq_table,
            noun_set,
            stopword_set,
        )
        entries.append(
            {
                "category": category,
                "candidates": [[w, repr(p)] for w, p in distribution.candidates],
                "coverage": sorted(distribution.coverage_vocabulary),
            }
        )
    rendered = json.dumps(entries, sort_keys=True, indent=2) + "\n"
    golden = (FIXTURES / "golden_mlm_prediction.json").read_bytes()
    assert rendered.encode("utf-8") == golden
    _ok("masked-LM prediction byte-identical to the committed golden")


# ---------------------------------------------------------------------------
# cleaning


def test_cleaning_reproduces_goldens_and_is_idempotent(tmp_path):
    config = str(FIXTURES / "run_clean.toml")
    assert main(["clean", "--config", config, "--output", str(tmp_path)]) == 0
    for produced, golden in (
        ("cleaned.csv", "golden_cleaned.csv"),
        ("cleaning_report.csv", "golden_cleaning_report.csv"),
    ):
        assert (tmp_path / produced).read_bytes() == (FIXTURES / golden).read_bytes()

    cache = load_lexicon_cache(FIXTURES / "lexicons.json")
    lexicons = {
        category: CategoryLexicon(category=category, instances=frozenset(instances))
        for category, instances in cache.items()
    }
    with open(FIXTURES / "dirty_dataset.csv", newline="", encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    assert rows
    for row in rows:
        lexicon = lexicons.get(row["category"])
        once = clean_item(row["item"], lexicon)
        twice = clean_item(once.cleaned, lexicon)
        assert twice.cleaned == once.cleaned, row["item"]
    _ok(
        "cleaning goldens byte-identical, "
        f"clean_item idempotent on all {len(rows)} raw items"
    )


# ---------------------------------------------------------------------------
# per-item metrics


def test_top_k_is_monotone_and_uniform_likelihood_matches_theory():
    rng = random.Random(313)
    ks = (1, 2, 3, 5, 8, 13, 21, 34)
    for case in range(1000):
        outcomes = []
        for position in range(1, rng.randint(1, 12) + 1):
            rank = None if rng.random() < 0.4 else rng.randint(1, 40)
            outcomes.append(
                ItemOutcome(
                    position=position,
                    item=f"item{position}",
                    in_coverage=rank is not None or rng.random() < 0.3,
                    probability=rng.uniform(1e-9, 1.0) if rank is not None else None,
                    rank=rank,
                )
            )
        score = summarize_outcomes(f"p{case}|things|1", "fn", outcomes, ks)
        series = [score.top_k[k] for k in ks]
        assert all(a <= b for a, b in zip(series, series[1:]))

    class _Uniform:
        label = "uniform"
        context_size = 0

        def __init__(self, size):
            self._weights = {f"word{i}": 1.0 for i in range(size)}
            self._coverage = frozenset(self._weights)

        def predict(self, context, limit=None):
            return build_distribution(self._weights, self._coverage, limit=limit)

    lists = FluencyList(
        participant="p1", category="things", list_index=1, items=("word0", "word1", "word2")
    )
    lls = {}
    for size in (10, 1000, 333333):
        lls[size] = score_list(_Uniform(size), lists, k_values=(1,)).scaled_ll
        assert lls[size] == pytest.approx(-math.log(size), abs=1e-9)
    assert lls[333333] == pytest.approx(-12.9, abs=0.3)
    _ok(
        "top-k monotone on 1000 random outcome sets, uniform scaled LL is "
        "-ln V for V in {10, 1000, 333333}"
    )


# ---------------------------------------------------------------------------
# adaptive selection


def _fresh_cell(rng):
    if rng.random() < 0.55:
        return (rng.randint(1, 8), rng.uniform(1e-4, 1.0))
    return (None, None)


def _random_rows(rng, length=8, functions=3):
    labels = tuple(f"fn{i}" for i in range(functions))
    return labels, {
        label: [_fresh_cell(rng) for _ in range(length)] for label in labels
    }


def _table_from_rows(rows, list_id="p1|things|1"):
    return OutcomeTable(
        list_id,
        {
            label: [
                ItemOutcome(
                    position=i + 1,
                    item=f"w{i}",
                    in_coverage=prob is not None,
                    probability=prob,
                    rank=rank,
                )
                for i, (rank, prob) in enumerate(row)
            ]
            for label, row in rows.items()
        },
    )


def _oracle_reselect(rows, labels, x, k):
    """From-scratch sliding-window re-pick with explicit loops: best window
    hit rate, then best window log-likelihood, then the incumbent, then
    label order. Returns (decisions, score) or None when nothing remains."""
    length = len(next(iter(rows.values())))
    if x >= length:
        return None

    def hit_value(label, position):
        rank, _ = rows[label][position - 1]
        return 1.0 if rank is not None and rank <= k else 0.0

    def log_value(label, position):
        _, prob = rows[label][position - 1]
        return math.log(max(prob if prob is not None else 0.0, 1e-12))

    previous = None
    decisions = []
    total = 0.0
    for position in range(x + 1, length + 1):
        window = range(position - x, position)
        primary = {lab: sum(hit_value(lab, p) for p in window) / x for lab in labels}
        best = max(primary.values())
        tied = [lab for lab in labels if primary[lab] == best]
        if len(tied) > 1:
            secondary = {lab: sum(log_value(lab, p) for p in window) / x for lab in tied}
            top = max(secondary.values())
            tied = [lab for lab in tied if secondary[lab] == top]
        chosen = previous if previous in tied else tied[0]
        decisions.append(chosen)
        total += hit_value(chosen, position)
        previous = chosen
    return decisions, total / (length - x)


def test_adaptive_selection_matches_a_from_scratch_oracle():
    rng = random.Random(826)
    config = lambda x: AdaptiveConfig(window_size=x, selection_metric="top_k", k=5)

    fixtures = [_random_rows(rng) for _ in range(200)]
    for labels, rows in fixtures:
        table = _table_from_rows(rows)
        for x in (1, 2, 3, 5, 7):
            result = run_ca(table, config(x))
            decisions, score = _oracle_reselect(rows, labels, x, 5)
            assert [d.chosen for d in result.trace.decisions] == decisions
            assert result.score == score

    # Re-picks must not look ahead: garbling everything from a position on
    # leaves all decisions made at or before that position unchanged.
    for labels, rows in fixtures:
        baseline = run_ca(_table_from_rows(rows), config(2))
        chosen = [d.chosen for d in baseline.trace.decisions]
        for position in range(3, 9):
            garbled = {
                label: row[: position - 1]
                + [_fresh_cell(rng) for _ in range(9 - position)]
                for label, row in rows.items()
            }
            rerun = run_ca(_table_from_rows(garbled), config(2))
            keep = position - 2
            assert [d.chosen for d in rerun.trace.decisions][:keep] == chosen[:keep]

    # When every function is constant over positions, committing once and
    # re-picking every time give the same score at every window size.
    for _ in range(50):
        labels = ("fn0", "fn1", "fn2")
        rows = {label: [_fresh_cell(rng)] * 8 for label in labels}
        table = _table_from_rows(rows)
        for x in (1, 2, 3, 5, 7):
            committed = run_atc(table, config(x))
            repicked = run_ca(table, config(x))
            assert committed.score == repicked.score
            assert committed.positions == repicked.positions

    _ok(
        "sliding-window re-pick equals the oracle on 200 random tables, "
        "never looks ahead, and matches commit-once on constant tables"
    )


def test_engineered_switch_rate_and_crossover_are_exact():
    config = lambda x: AdaptiveConfig(window_size=x, selection_metric="top_k", k=1)

    flipper = {
        "f": [(1, 0.9), (None, None), (None, None)],
        "g": [(None, None), (1, 0.9), (1, 0.9)],
    }
    steady = {
        "f": [(1, 0.9), (1, 0.9), (1, 0.9)],
        "g": [(None, None), (None, None), (None, None)],
    }
    traces = [
        run_ca(_table_from_rows(flipper), config(1)).trace,
        run_ca(_table_from_rows(steady), config(1)).trace,
    ]
    assert [d.chosen for d in traces[0].decisions] == ["f", "g"]
    assert [d.chosen for d in traces[1].decisions] == ["f", "f"]
    assert switch_rate(traces) == 50.0

    # Alternating hits defeat a one-step window completely but a two-step
    # window averages over the alternation, so the curve crosses between.
    alternating = {
        "f": [(1, 0.9), (None, None), (1, 0.9), (None, None)],
        "g": [(None, None), (1, 0.9), (None, None), (1, 0.9)],
    }
    curve = {
        x: run_ca(_table_from_rows(alternating), config(x)).score for x in (1, 2)
    }
    assert curve == {1: 0.0, 2: 0.5}
    assert crossover_point(curve, 0.25) == 2
    assert crossover_point(curve, 0.0) == 1
    assert crossover_point(curve, 0.6) is None
    _ok("engineered switch rate is exactly 50.0, curve crossover lands at window 2")


# ---------------------------------------------------------------------------
# end to end


def test_end_to_end_runs_are_byte_deterministic_and_resumable(tmp_path):
    config = str(FIXTURES / "run_e2e.toml")
    first, second, resumed = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for out in (first, second):
        assert main(["evaluate", "--config", config, "--output", str(out)]) == 0
        assert main(["adapt", "--config", config, "--output", str(out)]) == 0
    assert _tree(first) == _tree(second)

    assert main(["evaluate", "--config", config, "--output", str(resumed)]) == 0
    for entry in resumed.iterdir():
        if entry.name == "cache":
            continue
        shutil.rmtree(entry) if entry.is_dir() else entry.unlink()
    assert main(["evaluate", "--resume", "--config", config, "--output", str(resumed)]) == 0
    assert main(["adapt", "--config", config, "--output", str(resumed)]) == 0
    assert _tree(resumed) == _tree(first)
    _ok("evaluate+adapt byte-identical across cold runs and across a resume")


# ---------------------------------------------------------------------------
# edit distance (slow: exhaustive sweep over every pair up to length 7)


def test_edit_distance_matches_the_recursive_definition_exhaustively():
    started = time.monotonic()
    by_length = [[""]]
    for _ in range(7):
        by_length.append([s + ch for s in by_length[-1] for ch in "abc"])
    strings = [s for bucket in by_length for s in bucket]
    assert len(strings) == 3280

    index = {s: i for i, s in enumerate(strings)}
    heads = [s[:1] for s in strings]
    tails = [index[s[1:]] if s else 0 for s in strings]
    lengths = [len(s) for s in strings]
    n = len(strings)
    memo = [-1] * (n * n)

    def oracle(i, j):
        """Textbook recursion on (first character, rest), memoized on ids."""
        if lengths[i] == 0:
            return lengths[j]
        if lengths[j] == 0:
            return lengths[i]
        key = i * n + j
        known = memo[key]
        if known >= 0:
            return known
        best = min(
            oracle(tails[i], tails[j]) + (heads[i] != heads[j]),
            oracle(tails[i], j) + 1,
            oracle(i, tails[j]) + 1,
        )
        memo[key] = best
        return best

    for i, a in enumerate(strings):
        produced = [levenshtein(a, b) for b in strings]
        expected = [oracle(i, j) for j in range(n)]
        assert produced == expected, f"disagreement in the row for {a!r}"

    assert levenshtein("appl", "apple") == 1
    assert levenshtein("polarbear", "polar bear") == 1

    elapsed = time.monotonic() - started
    assert elapsed < 30.0, (
        f"every one of {n * n} distances matched the recursive definition, "
        f"but the sweep took {elapsed:.1f}s against a 30s budget"
    )
    _ok(f"edit distance exhaustive to length 7 in {elapsed:.1f}s")
