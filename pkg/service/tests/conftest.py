"""Shared fixtures: a tiny random-weight checkpoint and a client over it.

The checkpoint is a two-layer wordpiece BERT with a 36-token vocabulary and
seeded random weights, built once per session. It knows nothing about
language; the tests only need a real tokenizer (with "##" continuation
markers and a mask token) and a deterministic softmax over a full
vocabulary.
"""

import pytest
import torch
from tokenizers import Tokenizer, models, normalizers, pre_tokenizers, processors
from transformers import BertConfig, BertForMaskedLM, PreTrainedTokenizerFast

from maskscore.app import create_app

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "a", "and", "of", "are", "examples", "first", "that", "come",
    "to", "my", "mind", "fruits", "animals",
    "apple", "banana", "pear", "grape", "straw", "blue", "polar",
    "##berry", "##bird", "##s", "dog", "cat", "lion", "tiger", "bear",
    ".", ",",
]

TOP_N_CAP = 64


@pytest.fixture(scope="session")
def vocab_size():
    return len(VOCAB)


@pytest.fixture(scope="session")
def top_n_cap():
    return TOP_N_CAP


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory):
    path = tmp_path_factory.mktemp("tiny-checkpoint")
    backend = Tokenizer(models.WordPiece({t: i for i, t in enumerate(VOCAB)}, unk_token="[UNK]"))
    backend.normalizer = normalizers.BertNormalizer(lowercase=True)
    backend.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    backend.post_processor = processors.TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", VOCAB.index("[CLS]")), ("[SEP]", VOCAB.index("[SEP]"))],
    )
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=backend,
        unk_token="[UNK]",
        pad_token="[PAD]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
    )
    tokenizer.save_pretrained(path)

    torch.manual_seed(20260816)
    model = BertForMaskedLM(
        BertConfig(
            vocab_size=len(VOCAB),
            hidden_size=32,
            num_hidden_layers=2,
            num_attention_heads=4,
            intermediate_size=64,
            max_position_embeddings=64,
        )
    )
    model.save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def app(checkpoint):
    return create_app(checkpoint, top_n_cap=TOP_N_CAP)


@pytest.fixture(scope="session")
def client(app):
    from fastapi.testclient import TestClient

    return TestClient(app)
