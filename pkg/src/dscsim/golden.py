"""Layer-by-layer reference execution of one inverted-residual block.

Runs the three stages the conventional way: expansion 1x1 over the whole
map, explicit spatial padding, depthwise 3x3, projection 1x1. Every
intermediate map is materialized, which is exactly what the fused engine
avoids; the outputs here are the bit-exact oracle the fused path must match.

Integer semantics are pinned so independent implementations agree bit for
bit: accumulate in 32 bits (guaranteed overflow-free by the channel cap),
add bias in a wide intermediate, multiply by the Q31 multiplier, add 2**30
and arithmetic-shift right 31, then apply the rounding right shift, add the
output zero point, clamp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    INT8_MAX,
    INT8_MIN,
    BlockConfig,
    BlockWeights,
    QuantParams,
    QuantTensor,
    RequantSpec,
    validate_config,
)
from .errors import ShapeMismatchError


def requantize(acc: int, spec: RequantSpec, out_zp: int,
               act_min: int = INT8_MIN, act_max: int = INT8_MAX) -> int:
    """Map one 32-bit accumulator to an int8 value.

    Total function: bias add in a wide integer, Q31 multiply with round half
    up (add 2**30, arithmetic shift right 31), rounding right shift by
    ``spec.shift`` (add 2**(shift-1) first when shift > 0), zero-point add,
    clamp to [act_min, act_max].
    """
    t = acc + spec.bias
    h = (t * spec.multiplier + (1 << 30)) >> 31
    if spec.shift:
        h = (h + (1 << (spec.shift - 1))) >> spec.shift
    v = h + out_zp
    if v < act_min:
        return act_min
    if v > act_max:
        return act_max
    return v


def activation_range(out_qp: QuantParams, clamped: bool) -> tuple[int, int]:
    """Output byte range for a stage.

    Clamped stages model quantized ReLU: real values below zero clamp to the
    zero point, so act_min = max(-128, zero_point). Linear stages use the
    full int8 range.
    """
    if clamped:
        return max(INT8_MIN, out_qp.zero_point), INT8_MAX
    return INT8_MIN, INT8_MAX


def _rq_arrays(rq: tuple[RequantSpec, ...]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mult = np.array([s.multiplier for s in rq], dtype=np.int64)
    shift = np.array([s.shift for s in rq], dtype=np.int64)
    bias = np.array([s.bias for s in rq], dtype=np.int64)
    return mult, shift, bias


def _requantize_channels(acc: np.ndarray, rq: tuple[RequantSpec, ...],
                         out_zp: int, act_min: int, act_max: int) -> np.ndarray:
    """Vectorized requantize over the last (channel) axis of an int64 array."""
    # Accumulators must fit the modeled 32-bit register.
    assert np.abs(acc).max(initial=0) < (1 << 31), "32-bit accumulator overflow"
    mult, shift, bias = _rq_arrays(rq)
    t = acc + bias
    h = (t * mult + (1 << 30)) >> 31
    rounding = np.where(shift > 0, np.int64(1) << np.maximum(shift - 1, 0), 0)
    r = (h + rounding) >> shift
    return np.clip(r + out_zp, act_min, act_max).astype(np.int8)


def conv1x1(inp: QuantTensor, weights: np.ndarray, rq: tuple[RequantSpec, ...],
            out_qp: QuantParams, clamped: bool) -> QuantTensor:
    """Pointwise convolution: per pixel, dot products over all input channels.

    ``weights`` has one row per output channel, row length = input channels.
    """
    weights = np.asarray(weights, dtype=np.int8)
    if weights.ndim != 2 or weights.shape[1] != inp.channels:
        raise ShapeMismatchError(
            f"weight rows of length {weights.shape[-1]}, input has {inp.channels} channels"
        )
    if len(rq) != weights.shape[0]:
        raise ShapeMismatchError("one RequantSpec per output channel required")
    x = inp.data.reshape(-1, inp.channels).astype(np.int64) - inp.zero_point
    acc = x @ weights.T.astype(np.int64)
    lo, hi = activation_range(out_qp, clamped)
    out = _requantize_channels(acc, rq, out_qp.zero_point, lo, hi)
    return QuantTensor(inp.height, inp.width, weights.shape[0], out.reshape(-1), out_qp)


def pad_explicit(t: QuantTensor) -> QuantTensor:
    """SAME-pad by one pixel on every side; border bytes encode real zero."""
    padded = np.full((t.height + 2, t.width + 2, t.channels), t.zero_point,
                     dtype=np.int8)
    padded[1:-1, 1:-1, :] = t.spatial()
    return QuantTensor(t.height + 2, t.width + 2, t.channels, padded.reshape(-1),
                       t.qparams)


def dwconv3x3(f1_padded: QuantTensor, dw_w: np.ndarray, rq: tuple[RequantSpec, ...],
              out_qp: QuantParams, stride: int = 1, clamped: bool = True) -> QuantTensor:
    """Depthwise 3x3 convolution over an explicitly padded map.

    Output pixel (r, c) reads the padded window with top-left corner at
    (r*stride, c*stride); border taps contribute exactly zero because the
    padding value equals the map's zero point.
    """
    dw_w = np.asarray(dw_w, dtype=np.int8)
    m = f1_padded.channels
    if dw_w.shape != (m, 9):
        raise ShapeMismatchError(f"dw_w {dw_w.shape} != ({m}, 9)")
    if len(rq) != m:
        raise ShapeMismatchError("one RequantSpec per channel required")
    in_h, in_w = f1_padded.height - 2, f1_padded.width - 2
    out_h, out_w = -(-in_h // stride), -(-in_w // stride)
    xp = f1_padded.spatial().astype(np.int64) - f1_padded.zero_point
    w64 = dw_w.astype(np.int64)
    acc = np.zeros((out_h, out_w, m), dtype=np.int64)
    for i in range(3):
        for j in range(3):
            tap = xp[i:i + stride * (out_h - 1) + 1:stride,
                     j:j + stride * (out_w - 1) + 1:stride, :]
            acc += tap * w64[:, 3 * i + j]
    lo, hi = activation_range(out_qp, clamped)
    out = _requantize_channels(acc, rq, out_qp.zero_point, lo, hi)
    return QuantTensor(out_h, out_w, m, out.reshape(-1), out_qp)


@dataclass(frozen=True)
class GoldenTrace:
    """All intermediate maps of one reference block run."""

    f1: QuantTensor          # expanded map, M channels
    f1_padded: QuantTensor   # explicitly padded F1
    f2: QuantTensor          # depthwise output, M channels
    out: QuantTensor         # projected output, n_out channels


def run_block_golden(cfg: BlockConfig, weights: BlockWeights,
                     inp: QuantTensor) -> GoldenTrace:
    """Execute one block layer by layer, keeping every intermediate map."""
    validate_config(cfg)
    weights.check_shapes(cfg)
    if (inp.height, inp.width, inp.channels) != (cfg.in_h, cfg.in_w, cfg.n_in):
        raise ShapeMismatchError(
            f"input {inp.height}x{inp.width}x{inp.channels} does not match config"
        )
    f1 = conv1x1(inp, weights.ex_w, weights.ex_rq, cfg.ex_out_qp, cfg.ex_clamped)
    f1_padded = pad_explicit(f1)
    f2 = dwconv3x3(f1_padded, weights.dw_w, weights.dw_rq, cfg.dw_out_qp,
                   cfg.stride, cfg.dw_clamped)
    out = conv1x1(f2, weights.pr_w, weights.pr_rq, cfg.pr_out_qp, cfg.pr_clamped)
    return GoldenTrace(f1, f1_padded, f2, out)
