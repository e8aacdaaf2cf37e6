"""Deterministic fill-mask scoring for one checkpoint."""

from __future__ import annotations

import threading

import torch
from transformers import AutoModelForMaskedLM, AutoTokenizer

MAX_MASKS = 4


class PromptError(ValueError):
    """The prompt cannot be scored as given (bad mask usage)."""


class MaskScorer:
    """Wraps a masked LM and its tokenizer for inference-only scoring.

    Probabilities are softmax-normalized over the full vocabulary before
    truncation to top_n, and tokens keep their subword markers ("##",
    byte-level or sentencepiece boundary prefixes) so clients can join
    pieces back into words themselves. No sampling anywhere, so identical
    prompts always score identically.

    The forward pass holds a lock: the model is stateless between requests
    but not safe to run from two threads at once.
    """

    def __init__(self, checkpoint: str):
        self.checkpoint = checkpoint
        self.tokenizer = AutoTokenizer.from_pretrained(checkpoint)
        if self.tokenizer.mask_token is None:
            raise ValueError(f"{checkpoint} has no mask token; not a masked LM")
        self.model = AutoModelForMaskedLM.from_pretrained(checkpoint)
        self.model.eval()
        self._lock = threading.Lock()

    @property
    def mask_token(self) -> str:
        return self.tokenizer.mask_token

    def fill(self, prompt: str, top_n: int) -> list[list[tuple[str, float]]]:
        """Top candidates per mask position, best first, one list per mask."""
        if top_n < 1:
            raise ValueError(f"top_n must be at least 1, got {top_n}")
        encoded = self.tokenizer(prompt, return_tensors="pt")
        input_ids = encoded["input_ids"][0]
        positions = (input_ids == self.tokenizer.mask_token_id).nonzero(as_tuple=True)[0]
        count = int(positions.numel())
        if count == 0:
            raise PromptError("prompt contains no mask token")
        if count > MAX_MASKS:
            raise PromptError(f"prompt contains {count} mask tokens, the limit is {MAX_MASKS}")
        with self._lock, torch.no_grad():
            logits = self.model(**encoded).logits[0]
        masks: list[list[tuple[str, float]]] = []
        for position in positions.tolist():
            probabilities = torch.softmax(logits[position], dim=-1)
            top = torch.topk(probabilities, k=min(top_n, probabilities.numel()))
            tokens = self.tokenizer.convert_ids_to_tokens(top.indices.tolist())
            masks.append(
                [(token, float(prob)) for token, prob in zip(tokens, top.values.tolist())]
            )
        return masks
