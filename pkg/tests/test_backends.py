"""Fixture, HTTP, and caching fill-mask backends."""

import json

import pytest
import requests

from conftest import FIXTURES
from fluencybench.backends import CachingBackend, FixtureBackend, ServiceBackend
from fluencybench.errors import BackendError, ValidationError


# ---------------------------------------------------------------------------
# FixtureBackend


def test_fixture_exposes_model_and_mask_token(mlm_backend):
    assert mlm_backend.model_name == "fixture-lm"
    assert mlm_backend.mask_token == "[MASK]"


def test_fixture_truncates_each_mask_to_top_n(mlm_backend):
    full = mlm_backend.fill("Examples of fruits are the [MASK].", 50)
    short = mlm_backend.fill("Examples of fruits are the [MASK].", 2)
    assert short == [full[0][:2]]


def test_fixture_unknown_prompt_is_an_error(mlm_backend):
    with pytest.raises(BackendError, match="no entry"):
        mlm_backend.fill("Never recorded.", 5)


def test_fixture_rejects_non_positive_top_n(mlm_backend):
    with pytest.raises(ValidationError):
        mlm_backend.fill("Examples of fruits are the [MASK].", 0)


def _write_fixture(tmp_path, payload):
    path = tmp_path / "fixture.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def test_fixture_missing_mask_token_key(tmp_path):
    path = _write_fixture(tmp_path, {"model": "m", "prompts": {}})
    with pytest.raises(ValidationError, match="mask_token"):
        FixtureBackend(path)


def test_fixture_rejects_non_positive_probability(tmp_path):
    path = _write_fixture(
        tmp_path,
        {"model": "m", "mask_token": "[MASK]", "prompts": {"p": [[["tok", 0.0]]]}},
    )
    with pytest.raises(BackendError, match="non-positive"):
        FixtureBackend(path)


def test_fixture_rejects_empty_token(tmp_path):
    path = _write_fixture(
        tmp_path,
        {"model": "m", "mask_token": "[MASK]", "prompts": {"p": [[["", 0.5]]]}},
    )
    with pytest.raises(BackendError, match="bad token"):
        FixtureBackend(path)


def test_fixture_prompts_must_be_an_object(tmp_path):
    path = _write_fixture(tmp_path, {"model": "m", "mask_token": "[MASK]", "prompts": []})
    with pytest.raises(ValidationError, match="object"):
        FixtureBackend(path)


# ---------------------------------------------------------------------------
# ServiceBackend, with requests.request replaced by a scripted double


class _Response:
    def __init__(self, status_code=200, payload=None, text=""):
        self.status_code = status_code
        self._payload = payload
        self.text = text

    def json(self):
        if self._payload is None:
            raise ValueError("no JSON")
        return self._payload


HEALTH = _Response(payload={"status": "ok", "model": "svc-lm", "mask_token": "<mask>"})


class _Script:
    """Feeds scripted responses to consecutive requests and records calls."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = []

    def __call__(self, method, url, json=None, timeout=None):
        self.calls.append((method, url, json))
        action = self.responses.pop(0)
        if isinstance(action, Exception):
            raise action
        return action


@pytest.fixture()
def scripted(monkeypatch):
    def install(*responses):
        script = _Script(responses)
        monkeypatch.setattr(requests, "request", script)
        return script

    return install


def test_service_reads_health_on_construction(scripted):
    script = scripted(HEALTH)
    backend = ServiceBackend("http://svc:9000/", retry_wait=0)
    assert backend.model_name == "svc-lm"
    assert backend.mask_token == "<mask>"
    assert script.calls == [("GET", "http://svc:9000/health", None)]


def test_service_rejects_unhealthy_status(scripted):
    scripted(_Response(payload={"status": "loading"}))
    with pytest.raises(BackendError, match="status 'loading'"):
        ServiceBackend("http://svc:9000", retry_wait=0)


def test_service_health_missing_field(scripted):
    scripted(_Response(payload={"status": "ok", "model": "m"}))
    with pytest.raises(BackendError, match="mask_token"):
        ServiceBackend("http://svc:9000", retry_wait=0)


def _reply(masks):
    return _Response(payload={"v": 1, "model": "svc-lm", "masks": masks})


def test_service_fill_wire_format_and_parse(scripted):
    script = scripted(
        HEALTH, _reply([[{"token": "apple", "prob": 0.6}, {"token": "pear", "prob": 0.4}]])
    )
    backend = ServiceBackend("http://svc:9000", retry_wait=0)
    got = backend.fill("The [MASK].", 2)
    assert got == [[("apple", 0.6), ("pear", 0.4)]]
    method, url, body = script.calls[-1]
    assert (method, url) == ("POST", "http://svc:9000/fill-mask")
    assert body == {"v": 1, "prompt": "The [MASK].", "top_n": 2}


def test_service_retries_connection_errors(scripted):
    script = scripted(
        HEALTH,
        requests.ConnectionError("refused"),
        requests.ConnectionError("refused"),
        _reply([[{"token": "a", "prob": 1.0}]]),
    )
    backend = ServiceBackend("http://svc:9000", retries=3, retry_wait=0)
    assert backend.fill("p", 1) == [[("a", 1.0)]]
    assert len(script.calls) == 4


def test_service_retries_server_errors(scripted):
    scripted(HEALTH, _Response(status_code=503), _reply([[{"token": "a", "prob": 1.0}]]))
    backend = ServiceBackend("http://svc:9000", retries=2, retry_wait=0)
    assert backend.fill("p", 1) == [[("a", 1.0)]]


def test_service_gives_up_after_bounded_retries(scripted):
    scripted(HEALTH, *[_Response(status_code=500)] * 3)
    backend = ServiceBackend("http://svc:9000", retries=2, retry_wait=0)
    with pytest.raises(BackendError, match="after 3 attempts"):
        backend.fill("p", 1)


def test_service_client_errors_fail_immediately(scripted):
    script = scripted(HEALTH, _Response(status_code=413, text="too large"))
    backend = ServiceBackend("http://svc:9000", retries=5, retry_wait=0)
    with pytest.raises(BackendError, match="413"):
        backend.fill("p", 1)
    assert len(script.calls) == 2


def test_service_rejects_wrong_wire_version(scripted):
    scripted(HEALTH, _Response(payload={"v": 2, "masks": []}))
    backend = ServiceBackend("http://svc:9000", retry_wait=0)
    with pytest.raises(BackendError, match="wire version"):
        backend.fill("p", 1)


def test_service_rejects_malformed_mask_entries(scripted):
    scripted(HEALTH, _Response(payload={"v": 1, "masks": [[{"word": "a"}]]}))
    backend = ServiceBackend("http://svc:9000", retry_wait=0)
    with pytest.raises(BackendError, match="malformed"):
        backend.fill("p", 1)


def test_service_rejects_non_json_body(scripted):
    scripted(HEALTH, _Response(payload=None, text="<html>"))
    backend = ServiceBackend("http://svc:9000", retry_wait=0)
    with pytest.raises(BackendError, match="non-JSON"):
        backend.fill("p", 1)


# ---------------------------------------------------------------------------
# CachingBackend


class _Counting:
    mask_token = "[MASK]"
    model_name = "count/model"

    def __init__(self):
        self.calls = 0

    def fill(self, prompt, top_n):
        self.calls += 1
        return [[("apple", 0.75), ("pear", 0.25)]]


def test_cache_hit_skips_the_inner_backend(tmp_path):
    inner = _Counting()
    backend = CachingBackend(inner, tmp_path)
    first = backend.fill("The [MASK].", 5)
    second = backend.fill("The [MASK].", 5)
    assert first == second == [[("apple", 0.75), ("pear", 0.25)]]
    assert inner.calls == 1


def test_cache_keys_include_top_n(tmp_path):
    inner = _Counting()
    backend = CachingBackend(inner, tmp_path)
    backend.fill("The [MASK].", 5)
    backend.fill("The [MASK].", 6)
    assert inner.calls == 2


def test_cache_lives_under_a_sanitized_model_directory(tmp_path):
    backend = CachingBackend(_Counting(), tmp_path)
    backend.fill("The [MASK].", 5)
    entries = list((tmp_path / "count_model").glob("*.json"))
    assert len(entries) == 1
    # entry names are content digests, stable across runs
    assert len(entries[0].stem) == 64


def test_cache_survives_a_fresh_backend_instance(tmp_path):
    first_inner = _Counting()
    CachingBackend(first_inner, tmp_path).fill("The [MASK].", 5)
    second_inner = _Counting()
    got = CachingBackend(second_inner, tmp_path).fill("The [MASK].", 5)
    assert got == [[("apple", 0.75), ("pear", 0.25)]]
    assert second_inner.calls == 0


def test_cache_wraps_the_fixture_backend(tmp_path):
    inner = FixtureBackend(FIXTURES / "mlm_fixture.json")
    backend = CachingBackend(inner, tmp_path)
    direct = inner.fill("Examples of fruits are the [MASK].", 5)
    cached = backend.fill("Examples of fruits are the [MASK].", 5)
    recached = backend.fill("Examples of fruits are the [MASK].", 5)
    assert cached == recached == direct
