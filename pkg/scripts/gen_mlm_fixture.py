#!/usr/bin/env python3
"""Regenerate tests/fixtures/mlm_fixture.json.

The recorded probabilities are hand-designed powers of two so every number
the pipeline derives from them is an exact small fraction (the expected
values in the tests were worked out on paper from these inputs). Prompt
strings are rendered with build_prompt so the fixture keys always match
what the pipeline queries; the prompt wording itself is pinned separately
by the template unit tests.

Usage: python3 scripts/gen_mlm_fixture.py [output_path]
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from fluencybench.mlm import build_prompt  # noqa: E402

MASK = "[MASK]"


def main() -> None:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "mlm_fixture.json"
    )

    def prompt(category: str, items: list[str], masks: int) -> str:
        return build_prompt(category, items, masks, MASK, template_id=2)

    prompts: dict[str, list] = {}

    # fruits, no context items
    prompts[prompt("fruits", [], 1)] = [
        [["apple", 0.5], ["the", 0.25], ["pear", 0.125], ["banana", 0.0625], ["dog", 0.03125]]
    ]
    prompts[prompt("fruits", [], 2)] = [[["blue", 0.5], ["straw", 0.25]], []]
    prompts["Examples of fruits are the blue[MASK]."] = [[["berry", 0.75], ["bird", 0.25]]]
    prompts["Examples of fruits are the straw[MASK]."] = [[["berry", 1.0]]]
    prompts[prompt("fruits", [], 3)] = [[["dra", 1.0]], [], []]
    prompts["Examples of fruits are the dra[MASK][MASK]."] = [[["gon", 1.0]], []]
    prompts["Examples of fruits are the dragon[MASK]."] = [[["fruit", 1.0]]]
    prompts[prompt("fruits", [], 4)] = [[], [], [], []]

    # animals, no context items ("Ġ" marks a word boundary in the
    # second piece, so polar + bear assemble to a two-word candidate)
    prompts[prompt("animals", [], 1)] = [
        [["lion", 0.5], ["tiger", 0.25], ["cat", 0.125], ["the", 0.0625]]
    ]
    prompts[prompt("animals", [], 2)] = [[["polar", 0.5], ["ze", 0.25]], []]
    prompts["Examples of animals are the polar[MASK]."] = [[["Ġbear", 1.0]]]
    prompts["Examples of animals are the ze[MASK]."] = [[["bra", 1.0]]]
    prompts[prompt("animals", [], 3)] = [[], [], []]
    prompts[prompt("animals", [], 4)] = [[], [], [], []]

    # fruits with one context item, for the context-sensitivity test
    prompts[prompt("fruits", ["apple"], 1)] = [[["banana", 0.5], ["cherry", 0.25]]]
    prompts[prompt("fruits", ["apple"], 2)] = [[["straw", 1.0]], []]
    prompts["Examples of fruits are the apple and the straw[MASK]."] = [[["berry", 1.0]]]
    prompts[prompt("fruits", ["apple"], 3)] = [[], [], []]
    prompts[prompt("fruits", ["apple"], 4)] = [[], [], [], []]

    payload = {"model": "fixture-lm", "mask_token": MASK, "prompts": prompts}
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out} ({len(prompts)} prompts)")


if __name__ == "__main__":
    main()
