"""Fill-mask scoring backends.

A backend answers one question: given a prompt containing mask tokens, what
are the top candidate tokens (with probabilities) for each mask position?
Three implementations:

* FixtureBackend replays recorded responses from a JSON file, so the whole
  masked-LM pipeline runs offline and deterministically;
* ServiceBackend talks to a scoring HTTP service;
* CachingBackend wraps either one with an on-disk response cache keyed by
  (model, top_n, prompt).
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import time
from pathlib import Path
from typing import Protocol, runtime_checkable

import requests

from ._io import atomic_write_text
from .errors import BackendError, ValidationError

log = logging.getLogger(__name__)

WIRE_VERSION = 1

MaskLists = list[list[tuple[str, float]]]


@runtime_checkable
class MaskBackend(Protocol):
    mask_token: str
    model_name: str

    def fill(self, prompt: str, top_n: int) -> MaskLists:
        """Top candidates per mask position, best first, one list per mask."""
        ...


def _validate_masks(masks: MaskLists, source: str) -> MaskLists:
    checked: MaskLists = []
    for position, entries in enumerate(masks):
        out: list[tuple[str, float]] = []
        for entry in entries:
            token, prob = entry
            if not isinstance(token, str) or not token:
                raise BackendError(f"{source}: bad token {token!r} at mask {position}")
            prob = float(prob)
            if not prob > 0:
                raise BackendError(
                    f"{source}: non-positive probability {prob} for {token!r} at mask {position}"
                )
            out.append((token, prob))
        checked.append(out)
    return checked


class FixtureBackend:
    """Replays recorded fill-mask responses.

    The fixture file maps exact prompt strings to per-mask candidate lists:

        {"model": ..., "mask_token": ...,
         "prompts": {prompt: [[[token, prob], ...], ...]}}

    A prompt missing from the fixture is an error: silence here would make
    an incomplete recording look like a model with no predictions.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        with open(self.path, encoding="utf-8") as fh:
            payload = json.load(fh)
        try:
            self.mask_token: str = payload["mask_token"]
            self.model_name: str = payload.get("model", "fixture")
            prompts = payload["prompts"]
        except KeyError as exc:
            raise ValidationError(f"{self.path}: fixture is missing key {exc}") from None
        if not isinstance(prompts, dict):
            raise ValidationError(f"{self.path}: 'prompts' must be an object")
        self._prompts: dict[str, MaskLists] = {}
        for prompt, masks in prompts.items():
            self._prompts[prompt] = _validate_masks(
                [[(tok, float(p)) for tok, p in mask] for mask in masks], str(self.path)
            )

    def fill(self, prompt: str, top_n: int) -> MaskLists:
        if top_n < 1:
            raise ValidationError(f"top_n must be at least 1, got {top_n}")
        if prompt not in self._prompts:
            raise BackendError(f"{self.path}: fixture has no entry for prompt {prompt!r}")
        return [mask[:top_n] for mask in self._prompts[prompt]]


class ServiceBackend:
    """Talks to a fill-mask scoring service over HTTP.

    On construction it reads GET /health for the model name and mask token.
    fill() POSTs {"v": 1, "prompt": ..., "top_n": ...} to /fill-mask and
    expects {"v": 1, "model": ..., "masks": [[{"token","prob"}...]...]}.
    Connection errors and 5xx responses are retried a bounded number of
    times; 4xx responses fail immediately.
    """

    def __init__(
        self,
        base_url: str,
        timeout: float = 60.0,
        retries: int = 3,
        retry_wait: float = 0.5,
    ):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.retry_wait = retry_wait
        health = self._request("GET", "/health")
        if health.get("status") != "ok":
            raise BackendError(f"service at {self.base_url} reports status {health.get('status')!r}")
        try:
            self.model_name: str = health["model"]
            self.mask_token: str = health["mask_token"]
        except KeyError as exc:
            raise BackendError(f"service health response is missing {exc}") from None

    def _request(self, method: str, path: str, body: dict | None = None) -> dict:
        url = self.base_url + path
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.retry_wait * attempt)
            try:
                response = requests.request(method, url, json=body, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                log.warning("request to %s failed (attempt %d): %s", url, attempt + 1, exc)
                continue
            if response.status_code >= 500:
                last_error = BackendError(f"{url} returned {response.status_code}")
                log.warning("request to %s returned %d (attempt %d)", url, response.status_code, attempt + 1)
                continue
            if response.status_code >= 400:
                raise BackendError(f"{url} returned {response.status_code}: {response.text[:200]}")
            try:
                payload = response.json()
            except ValueError as exc:
                raise BackendError(f"{url} returned non-JSON body") from exc
            if not isinstance(payload, dict):
                raise BackendError(f"{url} returned a non-object body")
            return payload
        raise BackendError(f"{url} unreachable after {self.retries + 1} attempts: {last_error}")

    def fill(self, prompt: str, top_n: int) -> MaskLists:
        if top_n < 1:
            raise ValidationError(f"top_n must be at least 1, got {top_n}")
        payload = self._request(
            "POST", "/fill-mask", {"v": WIRE_VERSION, "prompt": prompt, "top_n": top_n}
        )
        if payload.get("v") != WIRE_VERSION:
            raise BackendError(f"service replied with wire version {payload.get('v')!r}")
        masks = payload.get("masks")
        if not isinstance(masks, list):
            raise BackendError("service reply has no 'masks' list")
        parsed: MaskLists = []
        for mask in masks:
            entries: list[tuple[str, float]] = []
            for item in mask:
                try:
                    entries.append((item["token"], float(item["prob"])))
                except (TypeError, KeyError) as exc:
                    raise BackendError(f"malformed mask entry {item!r}") from exc
            parsed.append(entries)
        return _validate_masks(parsed, self.base_url)


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name) or "model"


class CachingBackend:
    """On-disk response cache around another backend.

    Entries are keyed by (model, top_n, prompt); a hit never touches the
    inner backend, so recorded runs replay byte-for-byte.
    """

    def __init__(self, inner: MaskBackend, cache_dir: str | Path):
        self.inner = inner
        self.cache_dir = Path(cache_dir) / _safe_name(inner.model_name)
        self.mask_token = inner.mask_token
        self.model_name = inner.model_name

    def _entry_path(self, prompt: str, top_n: int) -> Path:
        digest = hashlib.sha256(
            f"{self.model_name}\n{top_n}\n{prompt}".encode("utf-8")
        ).hexdigest()
        return self.cache_dir / f"{digest}.json"

    def fill(self, prompt: str, top_n: int) -> MaskLists:
        path = self._entry_path(prompt, top_n)
        if path.exists():
            with open(path, encoding="utf-8") as fh:
                stored = json.load(fh)
            return _validate_masks(
                [[(tok, float(p)) for tok, p in mask] for mask in stored["masks"]], str(path)
            )
        masks = self.inner.fill(prompt, top_n)
        payload = {
            "model": self.model_name,
            "prompt": prompt,
            "top_n": top_n,
            "masks": [[[tok, prob] for tok, prob in mask] for mask in masks],
        }
        atomic_write_text(path, json.dumps(payload, sort_keys=True))
        return masks
