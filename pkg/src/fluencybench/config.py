"""Run configuration: one TOML file describing a whole experiment.

The file names the dataset, the resource files, the function grid, the
metric settings, the adaptive sweep, and the scoring backend. Paths are
resolved relative to the config file's directory. Validation is strict:
unknown keys, malformed grids, and missing files are all configuration
errors, reported before any work starts.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .corpus import ColumnMap
from .errors import ConfigurationError
from .predictors import Approach, FunctionRegistry, FunctionSpec

BACKEND_KINDS = ("fixture", "service")

_RESOURCE_KEYS = (
    "frequency",
    "usf",
    "swow",
    "w2v",
    "glove",
    "nouns",
    "stopwords",
    "lexicons",
)

_SECTIONS = {
    "dataset": {"path", "delimiter", "columns"},
    "resources": set(_RESOURCE_KEYS),
    "cleaning": {"max_distance"},
    "functions": None,  # list of tables, validated separately
    "metrics": {"k_values", "limit"},
    "adaptive": {"window_sizes", "selection_metric"},
    "backend": {"kind", "fixture", "url", "cache_dir", "top_n", "timeout", "retries"},
    "output": {"dir", "jobs"},
}

_FUNCTION_KEYS = {"approach", "context_sizes", "prompt_ids", "label"}


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "fixture"
    fixture: Path | None = None
    url: str | None = None
    cache_dir: Path | None = None
    timeout: float = 60.0
    retries: int = 3


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs, fully resolved and validated."""

    base_dir: Path
    dataset_path: Path
    delimiter: str
    columns: ColumnMap
    resources: Mapping[str, Path]
    cleaning_max_distance: int | None
    functions: FunctionRegistry | None
    k_values: tuple[int, ...]
    limit: int | None
    window_sizes: tuple[int, ...]
    selection_metric: str
    backend: BackendConfig
    output_dir: Path
    jobs: int = 1
    resume: bool = False

    @property
    def uses_mlm(self) -> bool:
        if self.functions is None:
            return False
        return any(spec.approach is Approach.MLM for spec in self.functions)

    def require_functions(self) -> FunctionRegistry:
        if self.functions is None:
            raise ConfigurationError("this command needs at least one [[functions]] entry")
        return self.functions


def _fail(message: str) -> None:
    raise ConfigurationError(message)


def _check_keys(name: str, table: Mapping[str, Any], allowed: set[str]) -> None:
    unknown = set(table) - allowed
    if unknown:
        _fail(f"[{name}] has unknown key(s): {', '.join(sorted(unknown))}")


def _expand_functions(entries: Any) -> FunctionRegistry | None:
    """Turn [[functions]] tables into a flat registry.

    An entry lists an approach plus optional context_sizes / prompt_ids
    arrays; the cross product becomes individual FunctionSpecs in file
    order. An explicit label is only allowed when the entry expands to a
    single function. No [[functions]] at all is fine for configs that only
    drive the clean command.
    """
    if entries is None:
        return None
    if not isinstance(entries, list) or not entries:
        _fail("[[functions]] must be a non-empty list of tables when present")
    specs: list[FunctionSpec] = []
    for position, entry in enumerate(entries, start=1):
        if not isinstance(entry, dict):
            _fail(f"functions entry {position} is not a table")
        _check_keys(f"functions #{position}", entry, _FUNCTION_KEYS)
        try:
            approach = Approach(entry.get("approach"))
        except ValueError:
            _fail(
                f"functions entry {position}: unknown approach {entry.get('approach')!r} "
                f"(expected one of {[a.value for a in Approach]})"
            )
        context_sizes = entry.get("context_sizes")
        prompt_ids = entry.get("prompt_ids")
        label = entry.get("label", "")
        sizes = context_sizes if isinstance(context_sizes, list) else [context_sizes]
        prompts = prompt_ids if isinstance(prompt_ids, list) else [prompt_ids]
        combos = [(ct, pid) for ct in sizes for pid in prompts]
        if label and len(combos) > 1:
            _fail(f"functions entry {position}: a label needs a single-function entry")
        for ct, pid in combos:
            try:
                specs.append(
                    FunctionSpec(
                        approach=approach,
                        context_size=ct,
                        prompt_id=pid,
                        label=label,
                    )
                )
            except ConfigurationError as exc:
                _fail(f"functions entry {position}: {exc}")
    try:
        return FunctionRegistry(specs)
    except ConfigurationError as exc:
        _fail(str(exc))
    raise AssertionError("unreachable")


def load_config(
    path: str | Path,
    output_dir: str | Path | None = None,
    jobs: int | None = None,
    backend_kind: str | None = None,
    resume: bool = False,
) -> RunConfig:
    """Parse and validate a TOML run config, applying CLI overrides."""
    path = Path(path)
    if not path.exists():
        _fail(f"config file {path} does not exist")
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            _fail(f"{path}: {exc}")
    base = path.resolve().parent

    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        _fail(f"unknown section(s): {', '.join(sorted(unknown))}")
    for name, allowed in _SECTIONS.items():
        if allowed is not None and name in raw:
            if not isinstance(raw[name], dict):
                _fail(f"[{name}] must be a table")
            _check_keys(name, raw[name], allowed)

    dataset = raw.get("dataset", {})
    if "path" not in dataset:
        _fail("[dataset] needs a path")
    dataset_path = (base / dataset["path"]).resolve()
    delimiter = dataset.get("delimiter", ",")
    if not isinstance(delimiter, str) or len(delimiter) != 1:
        _fail(f"[dataset] delimiter must be a single character, got {delimiter!r}")
    columns_raw = dataset.get("columns", {})
    _check_keys("dataset.columns", columns_raw, {"participant", "list", "category", "item"})
    columns = ColumnMap(
        participant=columns_raw.get("participant", "id"),
        list_index=columns_raw.get("list", "listnum"),
        category=columns_raw.get("category", "category"),
        item=columns_raw.get("item", "item"),
    )

    resources: dict[str, Path] = {}
    for key, value in raw.get("resources", {}).items():
        if not isinstance(value, str):
            _fail(f"[resources] {key} must be a path string")
        if value:
            resources[key] = (base / value).resolve()

    cleaning = raw.get("cleaning", {})
    max_distance = cleaning.get("max_distance")
    if max_distance is not None and (not isinstance(max_distance, int) or max_distance < 0):
        _fail(f"[cleaning] max_distance must be a non-negative integer, got {max_distance!r}")

    functions = _expand_functions(raw.get("functions"))

    metrics = raw.get("metrics", {})
    k_values_raw = metrics.get("k_values", [1, 5])
    if (
        not isinstance(k_values_raw, list)
        or not k_values_raw
        or any(not isinstance(k, int) or k < 1 for k in k_values_raw)
    ):
        _fail(f"[metrics] k_values must be a non-empty list of positive integers")
    k_values = tuple(sorted(set(k_values_raw)))
    limit_raw = metrics.get("limit", 0)
    if not isinstance(limit_raw, int) or limit_raw < 0:
        _fail(f"[metrics] limit must be a non-negative integer (0 = no truncation)")
    limit = limit_raw or None
    if limit is not None and limit < max(k_values):
        _fail(f"[metrics] limit {limit} is smaller than the largest k {max(k_values)}")

    adaptive = raw.get("adaptive", {})
    window_sizes_raw = adaptive.get("window_sizes", [])
    if not isinstance(window_sizes_raw, list) or any(
        not isinstance(x, int) for x in window_sizes_raw
    ):
        _fail("[adaptive] window_sizes must be a list of integers")
    window_sizes = tuple(window_sizes_raw)
    if window_sizes and (list(window_sizes) != sorted(set(window_sizes)) or window_sizes[0] < 1):
        _fail(f"[adaptive] window_sizes must be unique, ascending, and >= 1")
    selection_metric = adaptive.get("selection_metric", "top_k")
    if selection_metric not in ("top_k", "scaled_ll"):
        _fail(f"[adaptive] selection_metric must be top_k or scaled_ll")

    backend_raw = raw.get("backend", {})
    kind = backend_kind or backend_raw.get("kind", "fixture")
    if kind not in BACKEND_KINDS:
        _fail(f"backend kind must be one of {BACKEND_KINDS}, got {kind!r}")
    fixture = backend_raw.get("fixture")
    url = backend_raw.get("url")
    cache_dir = backend_raw.get("cache_dir")
    backend = BackendConfig(
        kind=kind,
        fixture=(base / fixture).resolve() if fixture else None,
        url=url or None,
        cache_dir=(base / cache_dir).resolve() if cache_dir else None,
        timeout=float(backend_raw.get("timeout", 60.0)),
        retries=int(backend_raw.get("retries", 3)),
    )

    output = raw.get("output", {})
    out_dir = Path(output_dir) if output_dir else (base / output.get("dir", "out"))
    out_dir = out_dir.resolve()
    jobs_value = jobs if jobs is not None else output.get("jobs", 1)
    if not isinstance(jobs_value, int) or jobs_value < 1:
        _fail(f"jobs must be a positive integer, got {jobs_value!r}")

    config = RunConfig(
        base_dir=base,
        dataset_path=dataset_path,
        delimiter=delimiter,
        columns=columns,
        resources=resources,
        cleaning_max_distance=max_distance,
        functions=functions,
        k_values=k_values,
        limit=limit,
        window_sizes=window_sizes,
        selection_metric=selection_metric,
        backend=backend,
        output_dir=out_dir,
        jobs=jobs_value,
        resume=resume,
    )
    _validate(config)
    return config


def _required_resources(config: RunConfig) -> set[str]:
    needed: set[str] = set()
    if config.functions is None:
        return needed
    approach_needs = {
        Approach.RANDOM_BASELINE: {"frequency"},
        Approach.NORMS_USF: {"usf"},
        Approach.NORMS_SWOW: {"swow"},
        Approach.EMBEDDING_W2V: {"w2v"},
        Approach.EMBEDDING_GLOVE: {"glove"},
        Approach.MLM: {"frequency", "nouns", "stopwords"},
    }
    for spec in config.functions:
        needed |= approach_needs[spec.approach]
    return needed


def _validate(config: RunConfig) -> None:
    if not config.dataset_path.exists():
        _fail(f"dataset file {config.dataset_path} does not exist")
    for key, resource_path in config.resources.items():
        if not resource_path.exists():
            _fail(f"[resources] {key} file {resource_path} does not exist")
    missing = _required_resources(config) - set(config.resources)
    if missing:
        _fail(
            "the function grid needs resource(s) not declared in [resources]: "
            + ", ".join(sorted(missing))
        )
    if config.uses_mlm:
        if config.backend.kind == "fixture" and config.backend.fixture is None:
            _fail("a fixture backend needs [backend] fixture = <path>")
        if config.backend.kind == "service" and not config.backend.url:
            _fail("a service backend needs [backend] url = <address>")
        if config.backend.fixture is not None and not config.backend.fixture.exists():
            _fail(f"backend fixture {config.backend.fixture} does not exist")
