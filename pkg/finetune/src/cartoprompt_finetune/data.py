"""Dataset loading for the training harness.

Consumes the JSON-lines dataset format produced by the curation
pipeline: one object per line with a `text` field holding an
`Area : ... Question : ... Answer : ...` string. Tokenization is
byte-level so the vocabulary is fixed and tiny.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import torch

PAD, BOS, EOS = 256, 257, 258
VOCAB_SIZE = 259


class ContextLengthError(ValueError):
    """Raised when dataset lines exceed the model context; lists them all."""

    def __init__(self, line_numbers: list[int], context_length: int):
        self.line_numbers = line_numbers
        self.context_length = context_length
        listing = ", ".join(str(n) for n in line_numbers)
        super().__init__(
            f"{len(line_numbers)} line(s) exceed context_length "
            f"{context_length}: lines {listing}")


class ByteTokenizer:
    """UTF-8 bytes plus BOS/EOS/PAD specials."""

    vocab_size = VOCAB_SIZE

    def encode(self, text: str, add_specials: bool = True) -> list[int]:
        tokens = list(text.encode("utf-8"))
        return [BOS] + tokens + [EOS] if add_specials else tokens

    def decode(self, tokens) -> str:
        data = bytes(t for t in tokens if t < 256)
        return data.decode("utf-8", errors="replace")


def line_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class Dataset:
    texts: list[str]
    token_rows: list[list[int]]

    def __len__(self) -> int:
        return len(self.texts)

    @property
    def hashes(self) -> set:
        return {line_hash(t) for t in self.texts}


def load_dataset(path, tokenizer: ByteTokenizer,
                 context_length: int) -> Dataset:
    """Read a JSON-lines dataset; every line must fit the context window."""
    texts = []
    too_long = []
    with open(path, encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            text = record["text"]
            if len(tokenizer.encode(text)) > context_length:
                too_long.append(number)
            texts.append(text)
    if too_long:
        raise ContextLengthError(too_long, context_length)
    return Dataset(texts=texts,
                   token_rows=[tokenizer.encode(t) for t in texts])


def assert_disjoint(train: Dataset, validation: Dataset) -> None:
    """No validation line may appear in the training partition."""
    overlap = train.hashes & validation.hashes
    if overlap:
        raise ValueError(
            f"{len(overlap)} validation line(s) also present in training data")


def collate(rows: list[list[int]], pad: int = PAD) -> torch.Tensor:
    width = max(len(r) for r in rows)
    out = torch.full((len(rows), width), pad, dtype=torch.long)
    for i, row in enumerate(rows):
        out[i, : len(row)] = torch.tensor(row, dtype=torch.long)
    return out


def batch_iter(dataset: Dataset, batch_size: int, generator: torch.Generator):
    """Shuffled minibatches of padded token tensors, one epoch."""
    order = torch.randperm(len(dataset), generator=generator).tolist()
    for start in range(0, len(order), batch_size):
        chosen = [dataset.token_rows[i] for i in order[start:start + batch_size]]
        yield collate(chosen)
