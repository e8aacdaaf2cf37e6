"""Record live fill-mask responses into the offline fixture file format.

The output maps exact prompt strings to per-mask candidate lists:

    {"model": ..., "mask_token": ...,
     "prompts": {prompt: [[[token, prob], ...], ...]}}

which is the file a fixture-replay backend consumes, so a recorded run can
be replayed later with no model or network at all. Responses are
deterministic, so re-recording the same prompts writes identical bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import requests

from .app import WIRE_VERSION


def read_prompts(path: str | Path) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line for line in lines if line.strip() and not line.startswith("#")]


def record_fixture(base_url: str, prompts: list[str], top_n: int, timeout: float = 60.0) -> dict:
    base = base_url.rstrip("/")
    health = requests.get(base + "/health", timeout=timeout)
    if health.status_code != 200:
        raise RuntimeError(f"{base}/health returned {health.status_code}")
    info = health.json()
    if info.get("status") != "ok":
        raise RuntimeError(f"service reports status {info.get('status')!r}")

    recorded: dict[str, list] = {}
    for prompt in prompts:
        response = requests.post(
            base + "/fill-mask",
            json={"v": WIRE_VERSION, "prompt": prompt, "top_n": top_n},
            timeout=timeout,
        )
        if response.status_code != 200:
            raise RuntimeError(
                f"scoring {prompt!r} failed with {response.status_code}: {response.text[:200]}"
            )
        payload = response.json()
        recorded[prompt] = [
            [[entry["token"], entry["prob"]] for entry in mask] for mask in payload["masks"]
        ]
    return {"model": info["model"], "mask_token": info["mask_token"], "prompts": recorded}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="maskscore-record",
        description="Replay a prompt list against a running scoring service "
        "and write a replayable fixture file.",
    )
    parser.add_argument("--url", required=True, help="service base URL")
    parser.add_argument("--prompts", required=True, help="text file, one prompt per line")
    parser.add_argument("--top-n", type=int, default=100, dest="top_n")
    parser.add_argument("--output", required=True, help="fixture JSON path")
    args = parser.parse_args(argv)

    prompts = read_prompts(args.prompts)
    if not prompts:
        print("error: the prompt file is empty", file=sys.stderr)
        return 2
    try:
        fixture = record_fixture(args.url, prompts, args.top_n)
    except (requests.RequestException, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(fixture, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"recorded {len(prompts)} prompt(s) to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
