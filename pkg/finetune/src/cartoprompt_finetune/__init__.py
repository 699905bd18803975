"""LoRA fine-tuning harness for Area/Question/Answer instruction datasets.

Consumes the JSON-lines dataset files the curation pipeline writes and
trains low-rank adapters on the attention qkv projections of a causal
language model, base weights frozen (optionally int8).
"""

from .data import ByteTokenizer, ContextLengthError, Dataset, load_dataset
from .lora import ConfigError, LoraConfig, LoRALinear, count_adapter_params
from .model import (
    ModelConfig,
    TinyCausalLM,
    adapter_state_dict,
    attach_adapters,
    load_adapter_state_dict,
    trainable_param_count,
)
from .quant import QuantizedLinear
from .train import TrainResult, ask, generate, train

__version__ = "0.1.0"

__all__ = [
    "ByteTokenizer",
    "ConfigError",
    "ContextLengthError",
    "Dataset",
    "LoRALinear",
    "LoraConfig",
    "ModelConfig",
    "QuantizedLinear",
    "TinyCausalLM",
    "TrainResult",
    "adapter_state_dict",
    "ask",
    "attach_adapters",
    "count_adapter_params",
    "generate",
    "load_adapter_state_dict",
    "load_dataset",
    "train",
    "trainable_param_count",
]
