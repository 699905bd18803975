"""Low-rank adapters for frozen linear layers.

The update to a frozen weight W0 (d x k) is B @ A with B (d x r) and
A (r x k), scaled by alpha / r. B starts at zero so training begins at
the base model's behavior exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
from torch import nn


class ConfigError(ValueError):
    """Invalid adapter configuration."""


@dataclass(frozen=True)
class LoraConfig:
    r: int = 16
    alpha: float = 32.0
    dropout: float = 0.1
    # Adapters attach to the fused attention query-key-value projection
    # of every transformer layer; nothing else is trainable.
    target: str = "qkv"
    base_model: str = "toy-2layer"
    quantize_base: bool = True
    epochs: float = 2.0
    context_length: int = 2048
    # Optimizer settings are logged for provenance but carry no accuracy
    # contract of their own.
    learning_rate: float = 2e-4
    batch_size: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.r < 1:
            raise ConfigError(f"rank must be >= 1, got {self.r}")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.target != "qkv":
            raise ConfigError(f"unsupported adapter target: {self.target!r}")
        if self.context_length < 1:
            raise ConfigError("context_length must be positive")

    @property
    def scaling(self) -> float:
        return self.alpha / self.r


def count_adapter_params(shapes, r: int) -> int:
    """Total adapter parameters over weight shapes [(d, k), ...]: sum r*(d+k)."""
    if r < 1:
        raise ConfigError(f"rank must be >= 1, got {r}")
    total = 0
    for d, k in shapes:
        if r >= min(d, k):
            raise ConfigError(
                f"rank {r} is not low-rank for a {d}x{k} weight")
        total += r * (d + k)
    return total


class LoRALinear(nn.Module):
    """A frozen base linear plus a trainable low-rank bypass.

    The base may be an nn.Linear or any module with in_features,
    out_features and a dequantized_weight() view (see quant.py); either
    way its parameters receive no gradients.
    """

    def __init__(self, base: nn.Module, cfg: LoraConfig):
        super().__init__()
        d, k = base.out_features, base.in_features
        if cfg.r >= min(d, k):
            raise ConfigError(f"rank {cfg.r} is not low-rank for {d}x{k}")
        self.base = base
        self.cfg = cfg
        for param in self.base.parameters():
            param.requires_grad_(False)

        self.lora_A = nn.Parameter(torch.empty(cfg.r, k))
        self.lora_B = nn.Parameter(torch.zeros(d, cfg.r))
        nn.init.kaiming_uniform_(self.lora_A, a=math.sqrt(5))
        self.dropout = nn.Dropout(cfg.dropout)

    @property
    def in_features(self) -> int:
        return self.base.in_features

    @property
    def out_features(self) -> int:
        return self.base.out_features

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        delta = self.dropout(x) @ self.lora_A.T @ self.lora_B.T
        return self.base(x) + self.cfg.scaling * delta

    def base_weight(self) -> torch.Tensor:
        """The effective frozen weight, dequantized if necessary."""
        if hasattr(self.base, "dequantized_weight"):
            return self.base.dequantized_weight()
        return self.base.weight.detach()

    def merged_weight(self) -> torch.Tensor:
        """W0 + (alpha/r) * B @ A, the weight an inference-only export uses."""
        return self.base_weight() + self.cfg.scaling * (self.lora_B @ self.lora_A)

    def adapter_state(self) -> dict:
        return {"lora_A": self.lora_A.detach().clone(),
                "lora_B": self.lora_B.detach().clone()}
