"""Fused pixel-wise execution of one inverted-residual block.

Each output pixel is computed to completion before the next one starts: per
expanded channel m, the expansion stage produces a 3x3x1 tile, the depthwise
stage collapses it to a single byte, and that byte is broadcast into the
projection accumulators. F1 and F2 never exist as arrays, only as the tile,
the element, and up to 56 running accumulators.

Out-of-bounds tile positions are padded virtually: the slot is filled with
F1's zero point and the expansion datapath is bypassed, which contributes
exactly zero to the depthwise accumulator and therefore matches explicit
padding bit for bit.

Output channels beyond the 56 projection engines are handled by recomputing
the expansion/depthwise stream once per group of 56, mirroring fixed-size
hardware instead of widening accumulator storage.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from operator import mul

import numpy as np

from .core import BlockConfig, BlockWeights, QuantParams, QuantTensor, validate_config
from .errors import BadChannelError, BadIndexError, ShapeMismatchError
from .golden import activation_range, requantize
from .membank import PR_ENGINES, AccessCounters, BlockBuffers, snapshot_counters

# Hard ceiling on transient storage: 9-byte tile + 1 element + 56 32-bit
# accumulators + control margin. Independent of every map dimension.
TRANSIENT_BUDGET_BYTES = 256


@dataclass
class TransientState:
    """The only storage the fused dataflow ever holds between stages."""

    tile: list[int] = field(default_factory=lambda: [0] * 9)
    dw_elem: int = 0
    pr_acc: list[int] = field(default_factory=list)
    peak_transient_bytes: int = 0

    def begin_group(self, size: int) -> None:
        self.pr_acc = [0] * size
        footprint = 9 + 1 + 4 * size
        if footprint > self.peak_transient_bytes:
            self.peak_transient_bytes = footprint


@dataclass(frozen=True)
class FusedRunResult:
    out: QuantTensor
    peak_transient_bytes: int
    groups: int
    counters: AccessCounters


def expansion_tile(inp: QuantTensor, cfg: BlockConfig, weights: BlockWeights,
                   center_r: int, center_c: int, m: int) -> list[int]:
    """The 3x3x1 F1 tile for channel m around a depthwise window center.

    In-bounds slots equal the golden expansion output at that position;
    out-of-bounds slots are F1's zero point with no datapath activity.
    """
    if not 0 <= m < cfg.m_expanded:
        raise BadChannelError(f"channel {m} of {cfg.m_expanded}")
    f1_zp = cfg.ex_out_qp.zero_point
    lo, hi = activation_range(cfg.ex_out_qp, cfg.ex_clamped)
    in_zp = inp.zero_point
    row_w = weights.ex_w[m].astype(np.int64)
    spec = weights.ex_rq[m]
    x = inp.spatial().astype(np.int64)
    tile = []
    for dr in (-1, 0, 1):
        r = center_r + dr
        for dc in (-1, 0, 1):
            c = center_c + dc
            if 0 <= r < inp.height and 0 <= c < inp.width:
                acc = int(np.dot(x[r, c] - in_zp, row_w))
                tile.append(requantize(acc, spec, f1_zp, lo, hi))
            else:
                tile.append(f1_zp)
    return tile


def depthwise_element(tile: list[int], weights: BlockWeights, m: int,
                      f1_zp: int, f2_qp: QuantParams, clamped: bool = True) -> int:
    """One F2 element from one tile; inputs are discarded afterwards."""
    row = weights.dw_w[m].tolist()
    acc = sum(map(mul, tile, row)) - f1_zp * sum(row)
    lo, hi = activation_range(f2_qp, clamped)
    return requantize(acc, weights.dw_rq[m], f2_qp.zero_point, lo, hi)


def projection_accumulate(state: TransientState, x: int, f2_zp: int,
                          weights: BlockWeights, m: int,
                          group: range) -> TransientState:
    """Broadcast one F2 byte into the group's output-channel accumulators."""
    if len(group) > PR_ENGINES:
        raise BadIndexError(f"group of {len(group)} exceeds {PR_ENGINES} engines")
    xc = x - f2_zp
    col = [int(weights.pr_w[c, m]) for c in group]
    state.pr_acc = [a + xc * w for a, w in zip(state.pr_acc, col)]
    return state


def run_block_fused(cfg: BlockConfig, weights: BlockWeights, inp: QuantTensor,
                    group_size: int = PR_ENGINES) -> FusedRunResult:
    """Run one block with the fused dataflow; bit-identical to the golden path.

    Pixels are visited in row-major order. Per pixel and per output-channel
    group, the m loop streams expansion tile -> depthwise element ->
    projection broadcast, reading every operand through the banked memory
    model so the access counters are exact.
    """
    validate_config(cfg)
    weights.check_shapes(cfg)
    if (inp.height, inp.width, inp.channels) != (cfg.in_h, cfg.in_w, cfg.n_in):
        raise ShapeMismatchError(
            f"input {inp.height}x{inp.width}x{inp.channels} does not match config"
        )
    if not 1 <= group_size <= PR_ENGINES:
        raise BadIndexError(f"group size {group_size}")

    bufs = BlockBuffers(cfg, weights, inp)
    state = TransientState()

    m_total = cfg.m_expanded
    n_out = cfg.n_out
    stride = cfg.stride
    in_zp = inp.zero_point
    f1_zp = cfg.ex_out_qp.zero_point
    f2_zp = cfg.dw_out_qp.zero_point
    ex_lo, ex_hi = activation_range(cfg.ex_out_qp, cfg.ex_clamped)
    dw_lo, dw_hi = activation_range(cfg.dw_out_qp, cfg.dw_clamped)
    pr_lo, pr_hi = activation_range(cfg.pr_out_qp, cfg.pr_clamped)
    pr_zp = cfg.pr_out_qp.zero_point

    # Per-channel requant constants and weight-row sums, hoisted out of the
    # pixel loop. The zero-point term of each dot product folds into
    # -zp * sum(weights).
    ex_q = [(s.multiplier, s.shift, s.bias) for s in weights.ex_rq]
    dw_q = [(s.multiplier, s.shift, s.bias) for s in weights.dw_rq]
    pr_q = [(s.multiplier, s.shift, s.bias) for s in weights.pr_rq]
    ex_wsum = weights.ex_w.astype(np.int64).sum(axis=1).tolist()
    dw_wsum = weights.dw_w.astype(np.int64).sum(axis=1).tolist()

    groups = [(g0, min(group_size, n_out - g0)) for g0 in range(0, n_out, group_size)]
    out_vals: list[int] = []

    for r_out in range(cfg.out_h):
        cr = r_out * stride
        for c_out in range(cfg.out_w):
            cc = c_out * stride
            pixel_vals = [0] * n_out
            for g0, gs in groups:
                bufs.pr_weights.set_group(g0)
                state.begin_group(gs)
                acc = state.pr_acc
                for m in range(m_total):
                    slots = bufs.ifmap.window_read(cr, cc)
                    ex_row = bufs.ex_filters.filter_read(m)
                    mult, shift, bias = ex_q[m]
                    zp_term = in_zp * ex_wsum[m]
                    tile = []
                    for word in slots:
                        if word is None:
                            tile.append(f1_zp)
                            continue
                        t = sum(map(mul, word, ex_row)) - zp_term + bias
                        h = (t * mult + 0x40000000) >> 31
                        if shift:
                            h = (h + (1 << (shift - 1))) >> shift
                        v = h + f1_zp
                        tile.append(ex_lo if v < ex_lo else ex_hi if v > ex_hi else v)
                    state.tile = tile

                    dw_row = bufs.dw_filters.filter_read(m)
                    t = sum(map(mul, tile, dw_row)) - f1_zp * dw_wsum[m]
                    mult, shift, bias = dw_q[m]
                    t += bias
                    h = (t * mult + 0x40000000) >> 31
                    if shift:
                        h = (h + (1 << (shift - 1))) >> shift
                    v = h + f2_zp
                    x = dw_lo if v < dw_lo else dw_hi if v > dw_hi else v
                    state.dw_elem = x

                    xc = x - f2_zp
                    col = bufs.pr_weights.column_read(m, gs)
                    acc = [a + xc * w for a, w in zip(acc, col)]
                state.pr_acc = acc
                for i, c in enumerate(range(g0, g0 + gs)):
                    mult, shift, bias = pr_q[c]
                    t = acc[i] + bias
                    h = (t * mult + 0x40000000) >> 31
                    if shift:
                        h = (h + (1 << (shift - 1))) >> shift
                    v = h + pr_zp
                    pixel_vals[c] = pr_lo if v < pr_lo else pr_hi if v > pr_hi else v
                bufs.write_output(gs)
            out_vals.extend(pixel_vals)

    assert state.peak_transient_bytes <= TRANSIENT_BUDGET_BYTES
    out = QuantTensor(cfg.out_h, cfg.out_w, n_out,
                      np.array(out_vals, dtype=np.int8), cfg.pr_out_qp)
    return FusedRunResult(out, state.peak_transient_bytes, len(groups),
                          snapshot_counters(bufs))
