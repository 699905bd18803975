"""Training loop and greedy generation.

Adapters are the only trainable parameters; the loop asserts that before
the first step rather than trusting the wiring. The loss log is JSON
lines: {"step", "train_loss"} per optimizer step and
{"epoch", "val_loss"} per epoch.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import torch
from torch.nn import functional as F

from .data import (
    PAD,
    ByteTokenizer,
    Dataset,
    assert_disjoint,
    batch_iter,
    load_dataset,
)
from .lora import LoraConfig
from .model import (
    ModelConfig,
    TinyCausalLM,
    adapter_state_dict,
    attach_adapters,
    expected_adapter_params,
    trainable_param_count,
    trainable_parameters,
)


@dataclass
class TrainResult:
    steps: int
    loss_log: list[dict]
    adapter_path: Optional[Path]
    model: TinyCausalLM
    tokenizer: ByteTokenizer


def sequence_loss(logits: torch.Tensor, tokens: torch.Tensor) -> torch.Tensor:
    """Next-token cross entropy; padding positions are ignored."""
    return F.cross_entropy(
        logits[:, :-1].reshape(-1, logits.size(-1)),
        tokens[:, 1:].reshape(-1),
        ignore_index=PAD)


@torch.no_grad()
def evaluate(model: TinyCausalLM, dataset: Dataset) -> float:
    model.eval()
    total, batches = 0.0, 0
    generator = torch.Generator().manual_seed(0)
    for tokens in batch_iter(dataset, batch_size=8, generator=generator):
        total += float(sequence_loss(model(tokens), tokens))
        batches += 1
    model.train()
    return total / max(1, batches)


def train(dataset_path, cfg: LoraConfig,
          val_path=None, out_dir=None,
          model: Optional[TinyCausalLM] = None,
          model_cfg: ModelConfig = ModelConfig(),
          max_steps: Optional[int] = None) -> TrainResult:
    """Fine-tune adapters on a JSON-lines dataset.

    Passing max_steps caps the run regardless of cfg.epochs; otherwise
    the loop runs ceil(epochs) epochs with the final partial epoch
    truncated proportionally.
    """
    torch.manual_seed(cfg.seed)
    tokenizer = ByteTokenizer()
    dataset = load_dataset(dataset_path, tokenizer, cfg.context_length)
    if len(dataset) == 0:
        raise ValueError(f"dataset at {dataset_path} is empty")
    validation = None
    if val_path is not None:
        validation = load_dataset(val_path, tokenizer, cfg.context_length)
        assert_disjoint(dataset, validation)

    if model is None:
        model = TinyCausalLM(model_cfg)
    model = attach_adapters(model, cfg)
    expected = expected_adapter_params(model, cfg)
    actual = trainable_param_count(model)
    if actual != expected:
        raise AssertionError(
            f"trainable parameter count {actual} != adapter formula {expected}")

    params = trainable_parameters(model)
    optimizer = torch.optim.AdamW(params, lr=cfg.learning_rate)

    steps_per_epoch = math.ceil(len(dataset) / cfg.batch_size)
    if max_steps is None:
        max_steps = math.ceil(steps_per_epoch * cfg.epochs)
    # Cosine decay to zero over the whole run. A constant learning rate
    # oscillates once the adapters saturate; decay lets small datasets
    # actually converge.
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(
        optimizer, T_max=max_steps)

    generator = torch.Generator().manual_seed(cfg.seed)
    loss_log: list[dict] = []
    step = 0
    epoch = 0
    model.train()
    while step < max_steps:
        epoch += 1
        for tokens in batch_iter(dataset, cfg.batch_size, generator):
            step += 1
            optimizer.zero_grad()
            loss = sequence_loss(model(tokens), tokens)
            loss.backward()
            torch.nn.utils.clip_grad_norm_(params, 1.0)
            optimizer.step()
            scheduler.step()
            loss_log.append({"step": step, "train_loss": loss.item()})
            if step >= max_steps:
                break
        if validation is not None:
            loss_log.append({"epoch": epoch,
                             "val_loss": evaluate(model, validation)})

    adapter_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        adapter_path = out_dir / "adapter.pt"
        torch.save(adapter_state_dict(model), adapter_path)
        with open(out_dir / "loss_log.jsonl", "w", encoding="utf-8") as fh:
            for entry in loss_log:
                fh.write(json.dumps(entry) + "\n")

    return TrainResult(steps=step, loss_log=loss_log,
                       adapter_path=adapter_path, model=model,
                       tokenizer=tokenizer)


@torch.no_grad()
def generate(model: TinyCausalLM, tokenizer: ByteTokenizer, prompt: str,
             max_new_tokens: int = 128) -> str:
    """Greedy continuation of the prompt; stops at EOS."""
    from .data import BOS, EOS

    model.eval()
    tokens = [BOS] + tokenizer.encode(prompt, add_specials=False)
    for _ in range(max_new_tokens):
        window = tokens[-model.cfg.max_positions:]
        logits = model(torch.tensor([window], dtype=torch.long))
        next_token = int(logits[0, -1].argmax())
        if next_token == EOS:
            break
        tokens.append(next_token)
    continuation = tokens[len(tokenizer.encode(prompt, add_specials=False)) + 1:]
    return tokenizer.decode(continuation)


def ask(model: TinyCausalLM, tokenizer: ByteTokenizer,
        preprompt: str, question: str, max_new_tokens: int = 128) -> str:
    """Build the datapoint-grammar prompt and return the model's answer."""
    prompt = f"Area : {preprompt} Question : {question} Answer :"
    return generate(model, tokenizer, prompt, max_new_tokens).strip()
