"""Adapter math: parameter counts, freezing, merging."""

import math

import numpy as np
import pytest
import torch
from torch import nn

from cartoprompt_finetune.lora import (
    ConfigError,
    LoraConfig,
    LoRALinear,
    count_adapter_params,
)
from cartoprompt_finetune.model import (
    ModelConfig,
    TinyCausalLM,
    adapter_state_dict,
    attach_adapters,
    expected_adapter_params,
    load_adapter_state_dict,
    qkv_shapes,
    trainable_param_count,
    trainable_parameters,
)
from cartoprompt_finetune.quant import QuantizedLinear


class TestParamCount:
    def test_single_fused_qkv_weight(self):
        # d_model 64 gives a fused 192x64 qkv weight; rank 16 adapters
        # add 16*(192+64) parameters.
        assert count_adapter_params([(192, 64)], 16) == 4096

    def test_sum_over_shapes(self):
        shapes = [(192, 64), (192, 64)]
        assert count_adapter_params(shapes, 16) == 2 * 16 * (192 + 64)

    def test_mixed_shapes(self):
        shapes = [(30, 10), (100, 40)]
        expected = 4 * (30 + 10) + 4 * (100 + 40)
        assert count_adapter_params(shapes, 4) == expected

    def test_rank_must_be_low(self):
        with pytest.raises(ConfigError):
            count_adapter_params([(192, 64)], 64)
        with pytest.raises(ConfigError):
            count_adapter_params([(192, 64)], 100)
        # One below the limit is fine.
        assert count_adapter_params([(192, 64)], 63) == 63 * 256

    def test_rank_must_be_positive(self):
        with pytest.raises(ConfigError):
            count_adapter_params([(192, 64)], 0)
        with pytest.raises(ConfigError):
            count_adapter_params([(192, 64)], -3)

    def test_formula_matches_framework_introspection(self):
        # The closed-form count and what autograd actually sees must
        # agree, otherwise the freeze wiring is wrong somewhere.
        torch.manual_seed(0)
        cfg = LoraConfig(r=16, dropout=0.0)
        model = attach_adapters(TinyCausalLM(ModelConfig()), cfg)
        by_formula = count_adapter_params(qkv_shapes(model), cfg.r)
        by_introspection = sum(p.numel() for p in model.parameters()
                               if p.requires_grad)
        assert by_formula == by_introspection
        assert by_formula == expected_adapter_params(model, cfg)
        assert by_formula == trainable_param_count(model)
        # Two layers of the worked example above.
        assert by_formula == 2 * 4096


class TestLoraConfig:
    def test_scaling_is_alpha_over_r(self):
        cfg = LoraConfig(r=16, alpha=32.0)
        assert cfg.scaling == 2.0
        assert LoraConfig(r=8, alpha=8.0).scaling == 1.0

    def test_rejects_bad_values(self):
        with pytest.raises(ConfigError):
            LoraConfig(r=0)
        with pytest.raises(ConfigError):
            LoraConfig(dropout=1.0)
        with pytest.raises(ConfigError):
            LoraConfig(dropout=-0.1)
        with pytest.raises(ConfigError):
            LoraConfig(target="mlp")
        with pytest.raises(ConfigError):
            LoraConfig(context_length=0)

    def test_config_is_frozen(self):
        cfg = LoraConfig()
        with pytest.raises(Exception):
            cfg.r = 4


class TestLoRALinear:
    def make(self, d=24, k=12, r=4, alpha=8.0, seed=0, quantize=False):
        torch.manual_seed(seed)
        base = nn.Linear(k, d, bias=False)
        if quantize:
            base = QuantizedLinear.from_linear(base)
        cfg = LoraConfig(r=r, alpha=alpha, dropout=0.0)
        return LoRALinear(base, cfg)

    def test_starts_at_base_behavior(self):
        # B initializes to zero, so before any training the wrapped
        # layer is numerically identical to the base.
        layer = self.make()
        x = torch.randn(5, 12)
        assert torch.equal(layer(x), layer.base(x))

    def test_forward_adds_scaled_low_rank_path(self):
        layer = self.make().eval()
        with torch.no_grad():
            layer.lora_B.normal_()
        x = torch.randn(7, 12)
        expected = layer.base(x) + layer.cfg.scaling * (
            x @ layer.lora_A.T @ layer.lora_B.T)
        assert torch.allclose(layer(x), expected, atol=1e-6)

    def test_base_gets_no_gradient(self):
        layer = self.make()
        with torch.no_grad():
            layer.lora_B.normal_()
        loss = layer(torch.randn(3, 12)).square().sum()
        loss.backward()
        # Frozen parameters never accumulate a gradient at all.
        assert layer.base.weight.grad is None
        assert not layer.base.weight.requires_grad
        assert layer.lora_A.grad is not None
        assert layer.lora_B.grad is not None

    def test_merged_weight_against_manual_oracle(self):
        layer = self.make(seed=3)
        with torch.no_grad():
            layer.lora_A.normal_()
            layer.lora_B.normal_()
        w0 = layer.base.weight.detach().numpy()
        a = layer.lora_A.detach().numpy()
        b = layer.lora_B.detach().numpy()
        oracle = w0 + layer.cfg.scaling * (b @ a)
        merged = layer.merged_weight().detach().numpy()
        assert np.abs(merged - oracle).max() < 1e-5

    def test_merged_weight_with_quantized_base(self):
        layer = self.make(seed=4, quantize=True)
        with torch.no_grad():
            layer.lora_A.normal_()
            layer.lora_B.normal_()
        w0 = (layer.base.weight_int8.float() * layer.base.scale).numpy()
        a = layer.lora_A.detach().numpy()
        b = layer.lora_B.detach().numpy()
        oracle = w0 + layer.cfg.scaling * (b @ a)
        merged = layer.merged_weight().detach().numpy()
        assert np.abs(merged - oracle).max() < 1e-5

    def test_merged_weight_reproduces_forward(self):
        # Inference through the merged matrix must match the two-path
        # forward; this is what an exported model relies on.
        layer = self.make(seed=5).eval()
        with torch.no_grad():
            layer.lora_B.normal_()
        x = torch.randn(6, 12)
        assert torch.allclose(layer(x), x @ layer.merged_weight().T, atol=1e-5)

    def test_rejects_rank_not_low(self):
        base = nn.Linear(12, 24, bias=False)
        with pytest.raises(ConfigError):
            LoRALinear(base, LoraConfig(r=12, dropout=0.0))

    def test_dropout_inert_in_eval(self):
        torch.manual_seed(0)
        base = nn.Linear(12, 24, bias=False)
        layer = LoRALinear(base, LoraConfig(r=4, dropout=0.5)).eval()
        with torch.no_grad():
            layer.lora_B.normal_()
        x = torch.randn(4, 12)
        assert torch.equal(layer(x), layer(x))


class TestAttachAdapters:
    def test_everything_frozen_except_adapters(self):
        torch.manual_seed(1)
        model = attach_adapters(TinyCausalLM(ModelConfig()),
                                LoraConfig(r=8, dropout=0.0))
        trainable = trainable_parameters(model)
        assert len(trainable) == 2 * ModelConfig().n_layers
        for name, param in model.named_parameters():
            if "lora_" in name:
                assert param.requires_grad, name
            else:
                assert not param.requires_grad, name

    def test_frozen_base_stays_untouched_by_backward(self):
        torch.manual_seed(2)
        model = attach_adapters(TinyCausalLM(ModelConfig()),
                                LoraConfig(r=8, dropout=0.0))
        for block in model.blocks:
            with torch.no_grad():
                block.qkv.lora_B.normal_()
        tokens = torch.randint(0, 256, (2, 16))
        model(tokens).square().mean().backward()
        for name, param in model.named_parameters():
            if "lora_" in name:
                assert param.grad is not None, name
            else:
                assert param.grad is None, name

    def test_quantized_base_has_no_parameters(self):
        torch.manual_seed(3)
        model = attach_adapters(TinyCausalLM(ModelConfig()),
                                LoraConfig(r=8, dropout=0.0, quantize_base=True))
        for block in model.blocks:
            assert isinstance(block.qkv.base, QuantizedLinear)
            assert list(block.qkv.base.parameters()) == []

    def test_fp32_base_when_quantization_disabled(self):
        torch.manual_seed(3)
        model = attach_adapters(TinyCausalLM(ModelConfig()),
                                LoraConfig(r=8, dropout=0.0,
                                           quantize_base=False))
        for block in model.blocks:
            assert isinstance(block.qkv.base, nn.Linear)


class TestAdapterStateRoundTrip:
    def test_state_keys(self):
        torch.manual_seed(4)
        model = attach_adapters(TinyCausalLM(ModelConfig()),
                                LoraConfig(r=8, dropout=0.0))
        state = adapter_state_dict(model)
        assert set(state) == {
            "blocks.0.qkv.lora_A", "blocks.0.qkv.lora_B",
            "blocks.1.qkv.lora_A", "blocks.1.qkv.lora_B",
        }

    def test_save_load_restores_outputs(self, tmp_path):
        cfg = LoraConfig(r=8, dropout=0.0)
        torch.manual_seed(5)
        trained = attach_adapters(TinyCausalLM(ModelConfig()), cfg)
        for block in trained.blocks:
            with torch.no_grad():
                block.qkv.lora_A.normal_()
                block.qkv.lora_B.normal_()
        path = tmp_path / "adapter.pt"
        torch.save(adapter_state_dict(trained), path)

        # Same base weights (same seed), fresh adapters.
        torch.manual_seed(5)
        restored = attach_adapters(TinyCausalLM(ModelConfig()), cfg)
        load_adapter_state_dict(restored, torch.load(path))

        tokens = torch.randint(0, 256, (2, 12))
        trained.eval()
        restored.eval()
        assert torch.equal(trained(tokens), restored(tokens))

    def test_adapter_file_is_small(self, tmp_path):
        # The whole point of saving adapters separately: the file holds
        # r*(d+k) floats per layer, not the base model.
        cfg = LoraConfig(r=8, dropout=0.0)
        torch.manual_seed(6)
        model = attach_adapters(TinyCausalLM(ModelConfig()), cfg)
        path = tmp_path / "adapter.pt"
        torch.save(adapter_state_dict(model), path)
        total = sum(t.numel() for t in torch.load(path).values())
        assert total == expected_adapter_params(model, cfg)
        base_params = sum(p.numel() for p in model.parameters())
        assert total < base_params / 10
