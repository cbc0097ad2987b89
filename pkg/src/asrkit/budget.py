"""Parameter counts, training FLOPs, loss memory, and the FFN init scale.

The auditable core of the parameter count is 12 * layers * hidden^2 per
encoder (4 d^2 for the attention projections plus 8 d^2 for the FFN with
its fixed 4x multiplier).  Everything else is reported as separate line
items so the core stays checkable by hand:

  - layernorm/bias extras: per layer 13 d (4 d attention biases, 5 d FFN
    biases, 4 d for two layernorms) plus a final 2 d layernorm;
  - convolutional frontend estimate: a fixed ~0.5 M conv stack plus a
    1280 -> hidden projection (documented estimate, not a measurement);
  - predictor LSTM (19 M) and feed-forward joiner (4 M) as constants.

FLOPs conventions: ``forward_2ND`` counts 2 * params per frame,
``train_6ND`` triples that for the backward pass (the default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError

FLOPS_CONVENTIONS = ("forward_2ND", "train_6ND")

PREDICTOR_PARAMS = 19_000_000
JOINER_PARAMS = 4_000_000

# Frontend estimate knobs (see module docstring).
FRONTEND_CONV_PARAMS = 500_000
FRONTEND_FLAT_DIM = 1280


@dataclass(frozen=True)
class EncoderConfig:
    hidden_dim: int
    num_layers: int
    num_heads: int
    ffn_multiplier: int = 4
    frame_ms: float = 80.0
    dropout: float = 0.1

    def __post_init__(self):
        if self.hidden_dim < 1 or self.num_layers < 1 or self.num_heads < 1:
            raise ConfigError("hidden_dim, num_layers and num_heads must be >= 1")
        if self.hidden_dim % self.num_heads != 0:
            raise ConfigError(
                f"hidden_dim {self.hidden_dim} not divisible by "
                f"num_heads {self.num_heads}")
        if self.ffn_multiplier != 4:
            raise ConfigError("ffn_multiplier is fixed at 4")
        if self.frame_ms <= 0:
            raise ConfigError("frame_ms must be positive")


@dataclass(frozen=True)
class TrainPlan:
    batch_hours: float = 23.0
    updates: int = 200_000
    flops_convention: str = "train_6ND"

    def __post_init__(self):
        if self.batch_hours <= 0:
            raise ConfigError("batch_hours must be positive")
        if self.updates < 0:
            raise ConfigError("updates must be >= 0")
        if self.flops_convention not in FLOPS_CONVENTIONS:
            raise ConfigError(
                f"flops_convention must be one of {FLOPS_CONVENTIONS}")


def param_breakdown(config: EncoderConfig) -> dict:
    """Encoder parameter line items; 'core' is exactly 12 * n * d^2."""
    d, n = config.hidden_dim, config.num_layers
    core = 12 * n * d * d
    layernorm_bias = n * 13 * d + 2 * d
    frontend = FRONTEND_CONV_PARAMS + FRONTEND_FLAT_DIM * d + d
    encoder_total = core + layernorm_bias + frontend
    return {
        "core": core,
        "layernorm_bias": layernorm_bias,
        "frontend_estimate": frontend,
        "encoder_total": encoder_total,
        "predictor_lstm": PREDICTOR_PARAMS,
        "joiner": JOINER_PARAMS,
        "model_total": encoder_total + PREDICTOR_PARAMS + JOINER_PARAMS,
    }


def param_count(config: EncoderConfig) -> int:
    """Total encoder parameters (core + extras + frontend estimate)."""
    return param_breakdown(config)["encoder_total"]


def frames_per_update(plan: TrainPlan, frame_ms: float) -> float:
    return plan.batch_hours * 3600.0 * (1000.0 / frame_ms)


def flops_per_update(config: EncoderConfig, plan: TrainPlan) -> float:
    factor = 2.0 if plan.flops_convention == "forward_2ND" else 6.0
    return factor * param_count(config) * frames_per_update(plan, config.frame_ms)


def flops_total(config: EncoderConfig, plan: TrainPlan) -> float:
    """Total encoder training compute for the plan, in PFLOPs (1e15)."""
    return flops_per_update(config, plan) * plan.updates / 1e15


def loss_memory(batch: int, frames: int, tokens: int, vocab: int,
                left_buffer: int, right_buffer: int,
                bytes_per_cell: int) -> dict:
    """Transducer-loss activation bytes: full lattice vs banded upper bound.

    full = B * T * (U+1) * D * bytes;
    restricted = B * (T + U * (b_l + b_r + 1)) * D * bytes, clamped to full
    (saturated buffers cannot cost more than the full lattice).
    """
    for name, value in (("batch", batch), ("frames", frames), ("vocab", vocab),
                        ("bytes_per_cell", bytes_per_cell)):
        if value < 1:
            raise ConfigError(f"{name} must be >= 1")
    if tokens < 0 or left_buffer < 0 or right_buffer < 0:
        raise ConfigError("tokens and buffers must be >= 0")
    full = batch * frames * (tokens + 1) * vocab * bytes_per_cell
    banded = batch * (frames + tokens * (left_buffer + right_buffer + 1)) \
        * vocab * bytes_per_cell
    return {"full": full, "restricted": min(full, banded)}


def init_scale(num_layers: int) -> float:
    """Scale for the second FFN linear layer: 1 / sqrt(2 * layers)."""
    if num_layers < 1:
        raise ConfigError("num_layers must be >= 1")
    return 1.0 / math.sqrt(2.0 * num_layers)


def budget_report(config: EncoderConfig, plan: TrainPlan,
                  loss_dims: dict | None = None) -> dict:
    """Assemble the full budget report; echoes every assumption used."""
    breakdown = param_breakdown(config)
    report = {
        "params": breakdown["encoder_total"],
        "params_breakdown": breakdown,
        "hidden_dim": config.hidden_dim,
        "num_layers": config.num_layers,
        "num_heads": config.num_heads,
        "ffn_multiplier": config.ffn_multiplier,
        "frame_ms": config.frame_ms,
        "batch_hours": plan.batch_hours,
        "updates": plan.updates,
        "flops_convention": plan.flops_convention,
        "frames_per_update": frames_per_update(plan, config.frame_ms),
        "flops_per_update": flops_per_update(config, plan),
        "total_pflops": flops_total(config, plan),
        "init_scale": init_scale(config.num_layers),
    }
    if loss_dims is not None:
        memory = loss_memory(**loss_dims)
        report["loss_dims"] = dict(loss_dims)
        report["loss_mem_full"] = memory["full"]
        report["loss_mem_restricted"] = memory["restricted"]
    return report
