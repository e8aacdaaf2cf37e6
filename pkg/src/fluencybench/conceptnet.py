"""Category lexicon retrieval from ConceptNet, with a local JSON cache.

A lexicon for a category is the set of English terms connected to the
category concept by a fixed set of relations. Fetches are paginated; results
land in a cache file mapping category -> sorted instance list, so later runs
(and offline runs) can rebuild the same lexicon without network access.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Callable, Iterator, Mapping, Sequence

import requests

from ._io import atomic_write_json
from .corpus import CategoryLexicon
from .errors import RetrievalError, ValidationError

log = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://api.conceptnet.io"

DEFAULT_RELATIONS: tuple[str, ...] = (
    "/r/AtLocation",
    "/r/DefinedAs",
    "/r/FormOf",
    "/r/InstanceOf",
    "/r/IsA",
    "/r/MannerOf",
    "/r/PartOf",
)


def concept_uri(term: str) -> str:
    return "/c/en/" + term.strip().lower().replace(" ", "_")


class ConceptNetClient:
    """Minimal paginated /query client.

    http_get is injectable for tests; it must behave like requests.get and
    return an object with raise_for_status() and json().
    """

    def __init__(
        self,
        base_url: str = DEFAULT_BASE_URL,
        http_get: Callable | None = None,
        page_limit: int = 500,
        timeout: float = 20.0,
    ):
        self.base_url = base_url.rstrip("/")
        self._get = http_get or requests.get
        self.page_limit = page_limit
        self.timeout = timeout

    def edges(self, category: str, relation: str) -> Iterator[dict]:
        """Yield every edge whose end node is the category concept."""
        offset = 0
        while True:
            params = {
                "end": concept_uri(category),
                "rel": relation,
                "limit": str(self.page_limit),
                "offset": str(offset),
            }
            response = self._get(self.base_url + "/query", params=params, timeout=self.timeout)
            response.raise_for_status()
            payload = response.json()
            edges = payload.get("edges", [])
            yield from edges
            if len(edges) < self.page_limit:
                return
            offset += self.page_limit


def _edge_instance(edge: dict) -> str | None:
    start = edge.get("start", {})
    if start.get("language") != "en":
        return None
    label = start.get("label") or ""
    instance = label.strip().lower().replace("_", " ")
    return instance or None


def load_lexicon_cache(path: str | Path) -> dict[str, list[str]]:
    path = Path(path)
    if not path.exists():
        return {}
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict):
        raise ValidationError(f"{path}: lexicon cache must be a JSON object")
    return {str(cat): [str(term) for term in terms] for cat, terms in payload.items()}


def save_lexicon_cache(cache: Mapping[str, Sequence[str]], path: str | Path) -> None:
    atomic_write_json(path, {cat: sorted(set(terms)) for cat, terms in cache.items()})


def fetch_category_lexicon(
    category: str,
    relations: Sequence[str] = DEFAULT_RELATIONS,
    client: ConceptNetClient | None = None,
    cache_path: str | Path | None = None,
) -> CategoryLexicon:
    """Build the lexicon for one category.

    The cache, when given, is authoritative: a category already present is
    returned as-is with no network traffic. On a fresh fetch the cache file
    is updated (merged, not truncated). A network failure with no cached
    entry raises RetrievalError.
    """
    category = category.strip().lower()
    if not category:
        raise ValidationError("category name is empty")
    if not relations:
        raise ValidationError("at least one relation is required")

    cache: dict[str, list[str]] = {}
    if cache_path is not None:
        cache = load_lexicon_cache(cache_path)
        if category in cache:
            return CategoryLexicon(
                category=category,
                instances=frozenset(cache[category]),
                source_relations=tuple(relations),
            )

    client = client or ConceptNetClient()
    instances: set[str] = set()
    try:
        for relation in sorted(relations):
            for edge in client.edges(category, relation):
                instance = _edge_instance(edge)
                if instance:
                    instances.add(instance)
    except requests.RequestException as exc:
        raise RetrievalError(
            f"could not fetch lexicon for {category!r} and no cache entry exists: {exc}"
        ) from exc

    if not instances:
        log.warning("lexicon for %r came back empty", category)
    if cache_path is not None:
        cache[category] = sorted(instances)
        save_lexicon_cache(cache, cache_path)
    return CategoryLexicon(
        category=category,
        instances=frozenset(instances),
        source_relations=tuple(relations),
    )
