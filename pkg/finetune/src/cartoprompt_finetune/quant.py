"""8-bit storage for frozen base weights.

Symmetric per-row absmax quantization: each output row is stored as int8
with one float scale. Weights live in buffers, not parameters, so a
quantized base is frozen by construction. Good enough for a base that
never trains; adapters stay in full precision.
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F


class QuantizedLinear(nn.Module):
    def __init__(self, weight_int8: torch.Tensor, scale: torch.Tensor,
                 bias: torch.Tensor | None = None):
        super().__init__()
        if weight_int8.dtype != torch.int8:
            raise TypeError("weight must be int8")
        self.register_buffer("weight_int8", weight_int8)
        self.register_buffer("scale", scale)
        self.register_buffer("bias", bias)
        self.out_features, self.in_features = weight_int8.shape

    @classmethod
    def from_linear(cls, linear: nn.Linear) -> "QuantizedLinear":
        weight = linear.weight.detach()
        absmax = weight.abs().amax(dim=1, keepdim=True).clamp(min=1e-8)
        scale = absmax / 127.0
        weight_int8 = torch.round(weight / scale).clamp(-127, 127).to(torch.int8)
        bias = linear.bias.detach().clone() if linear.bias is not None else None
        return cls(weight_int8, scale, bias)

    def dequantized_weight(self) -> torch.Tensor:
        return self.weight_int8.to(torch.float32) * self.scale

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.linear(x, self.dequantized_weight(), self.bias)

    def extra_repr(self) -> str:
        return f"in_features={self.in_features}, out_features={self.out_features}"


def quantization_error(linear: nn.Linear) -> float:
    """Max absolute weight error the int8 round trip introduces."""
    quantized = QuantizedLinear.from_linear(linear)
    return float((quantized.dequantized_weight() - linear.weight.detach())
                 .abs().max())
