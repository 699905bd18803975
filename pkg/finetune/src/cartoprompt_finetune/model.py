"""A miniature causal language model for the training harness.

Two pre-norm transformer blocks over byte-level tokens, with the
attention query-key-value projection fused into one linear per block;
that fused weight is the only adapter attachment point. Small enough to
train on CPU in tests, structurally faithful to the real thing.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F

from .lora import ConfigError, LoRALinear, LoraConfig, count_adapter_params
from .quant import QuantizedLinear


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int = 259
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    max_positions: int = 2048

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ConfigError("d_model must be divisible by n_heads")


class Block(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.n_heads = cfg.n_heads
        self.head_dim = cfg.d_model // cfg.n_heads
        self.ln_attn = nn.LayerNorm(cfg.d_model)
        # Fused q/k/v: one (3d x d) weight, split on the output axis.
        self.qkv = nn.Linear(cfg.d_model, 3 * cfg.d_model, bias=False)
        self.attn_out = nn.Linear(cfg.d_model, cfg.d_model, bias=False)
        self.ln_mlp = nn.LayerNorm(cfg.d_model)
        self.mlp = nn.Sequential(
            nn.Linear(cfg.d_model, 4 * cfg.d_model),
            nn.GELU(),
            nn.Linear(4 * cfg.d_model, cfg.d_model),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, t, d = x.shape
        q, k, v = self.qkv(self.ln_attn(x)).split(d, dim=-1)
        shape = (b, t, self.n_heads, self.head_dim)
        q = q.view(shape).transpose(1, 2)
        k = k.view(shape).transpose(1, 2)
        v = v.view(shape).transpose(1, 2)
        attn = F.scaled_dot_product_attention(q, k, v, is_causal=True)
        x = x + self.attn_out(attn.transpose(1, 2).reshape(b, t, d))
        return x + self.mlp(self.ln_mlp(x))


class TinyCausalLM(nn.Module):
    def __init__(self, cfg: ModelConfig = ModelConfig()):
        super().__init__()
        self.cfg = cfg
        self.tok_emb = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.pos_emb = nn.Embedding(cfg.max_positions, cfg.d_model)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.n_layers))
        self.ln_out = nn.LayerNorm(cfg.d_model)
        self.lm_head = nn.Linear(cfg.d_model, cfg.vocab_size, bias=False)
        # Tied output head: logits are dot products with token embeddings.
        self.lm_head.weight = self.tok_emb.weight

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        if tokens.size(1) > self.cfg.max_positions:
            raise ValueError(
                f"sequence length {tokens.size(1)} exceeds "
                f"max_positions {self.cfg.max_positions}")
        positions = torch.arange(tokens.size(1), device=tokens.device)
        x = self.tok_emb(tokens) + self.pos_emb(positions)
        for block in self.blocks:
            x = block(x)
        return self.lm_head(self.ln_out(x))


def qkv_shapes(model: TinyCausalLM) -> list[tuple[int, int]]:
    """(d, k) of every adapter attachment point, in block order."""
    shapes = []
    for block in model.blocks:
        qkv = block.qkv
        shapes.append((qkv.out_features, qkv.in_features))
    return shapes


def attach_adapters(model: TinyCausalLM, cfg: LoraConfig) -> TinyCausalLM:
    """Freeze the whole model, then wrap each fused qkv in a LoRALinear.

    With quantize_base the frozen qkv weights are stored int8; all other
    base weights stay fp32 but frozen (they never train either way).
    """
    for param in model.parameters():
        param.requires_grad_(False)
    for block in model.blocks:
        base = block.qkv
        if cfg.quantize_base:
            base = QuantizedLinear.from_linear(base)
        block.qkv = LoRALinear(base, cfg)
    return model


def trainable_parameters(model: nn.Module):
    return [p for p in model.parameters() if p.requires_grad]


def trainable_param_count(model: nn.Module) -> int:
    return sum(p.numel() for p in trainable_parameters(model))


def expected_adapter_params(model: TinyCausalLM, cfg: LoraConfig) -> int:
    return count_adapter_params(qkv_shapes(model), cfg.r)


def adapter_state_dict(model: TinyCausalLM) -> dict:
    """Only the adapter tensors, for saving separately from the base."""
    state = {}
    for i, block in enumerate(model.blocks):
        if isinstance(block.qkv, LoRALinear):
            for name, tensor in block.qkv.adapter_state().items():
                state[f"blocks.{i}.qkv.{name}"] = tensor
    return state


def load_adapter_state_dict(model: TinyCausalLM, state: dict) -> None:
    for i, block in enumerate(model.blocks):
        if isinstance(block.qkv, LoRALinear):
            with torch.no_grad():
                block.qkv.lora_A.copy_(state[f"blocks.{i}.qkv.lora_A"])
                block.qkv.lora_B.copy_(state[f"blocks.{i}.qkv.lora_B"])
