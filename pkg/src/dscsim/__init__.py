"""Functional and timing simulator for a fused pixel-wise INT8 DSC accelerator.

The package models one inverted-residual block (expansion 1x1, depthwise
3x3, projection 1x1) three ways: a layer-by-layer golden reference, a fused
pixel-wise engine with exact memory access counting that must match the
golden output bit for bit, and closed-form/discrete-event cost models for
memory traffic and pipeline timing.
"""

from .analysis import (
    PRESETS,
    REFERENCE_INTERMEDIATE_BYTES,
    LayerPreset,
    TrafficBreakdown,
    aggregate_reduction_percent,
    baseline_traffic,
    buffer_sram_min,
    dsc_ratio,
    fused_traffic,
    mac_cost_dsc,
    mac_cost_standard,
    reduction_percent,
    traffic_dram_baseline,
)
from .core import (
    BlockConfig,
    BlockWeights,
    QuantParams,
    QuantTensor,
    RequantSpec,
    SplitMix64,
    generate_workload,
    read_tensor,
    splitmix_next,
    tensor_index,
    validate_config,
    write_tensor,
)
from .fused import FusedRunResult, TransientState, run_block_fused
from .golden import GoldenTrace, dwconv3x3, conv1x1, pad_explicit, requantize, run_block_golden
from .membank import AccessCounters, BlockBuffers, bank_id, snapshot_counters
from .timing import StageLatencies, TimingReport, default_latencies, simulate, speedup

__version__ = "0.1.0"

__all__ = [
    "AccessCounters",
    "BlockBuffers",
    "BlockConfig",
    "BlockWeights",
    "FusedRunResult",
    "GoldenTrace",
    "LayerPreset",
    "PRESETS",
    "QuantParams",
    "QuantTensor",
    "REFERENCE_INTERMEDIATE_BYTES",
    "RequantSpec",
    "SplitMix64",
    "StageLatencies",
    "TimingReport",
    "TrafficBreakdown",
    "TransientState",
    "aggregate_reduction_percent",
    "bank_id",
    "baseline_traffic",
    "buffer_sram_min",
    "conv1x1",
    "default_latencies",
    "dsc_ratio",
    "dwconv3x3",
    "fused_traffic",
    "generate_workload",
    "mac_cost_dsc",
    "mac_cost_standard",
    "pad_explicit",
    "read_tensor",
    "reduction_percent",
    "requantize",
    "run_block_fused",
    "run_block_golden",
    "simulate",
    "snapshot_counters",
    "speedup",
    "splitmix_next",
    "tensor_index",
    "traffic_dram_baseline",
    "validate_config",
    "write_tensor",
]
