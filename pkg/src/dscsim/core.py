"""Quantized tensor and block data model, workload generation, tensor file format.

Everything downstream (golden reference, fused engine, memory and timing
models) works on the types defined here. Tensors are NHWC with the channel
index fastest, stored as flat int8 arrays. All values are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np

from .errors import (
    BadMagicError,
    BadStrideError,
    ChannelAlignmentError,
    ChannelLimitError,
    EmptyDimsError,
    OutOfBoundsError,
    ShapeMismatchError,
    TruncatedStreamError,
    VersionMismatchError,
)

INT8_MIN = -128
INT8_MAX = 127

# Channel cap keeping every int8 MAC chain inside a 32-bit accumulator:
# 127 * 127 * 1024 < 2**25, far below 2**31 even after bias addition.
CHANNEL_CAP = 1024


@dataclass(frozen=True)
class QuantParams:
    """Affine int8 quantization: real = scale * (q - zero_point)."""

    scale: float
    zero_point: int

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not INT8_MIN <= self.zero_point <= INT8_MAX:
            raise ValueError(f"zero_point {self.zero_point} outside int8 range")


@dataclass(frozen=True, eq=False)
class QuantTensor:
    """NHWC int8 activation tensor with per-tensor quantization parameters.

    ``data`` is a flat, read-only int8 array of length height*width*channels,
    channel index fastest (see :func:`tensor_index`).
    """

    height: int
    width: int
    channels: int
    data: np.ndarray
    qparams: QuantParams

    def __post_init__(self):
        if min(self.height, self.width, self.channels) < 1:
            raise EmptyDimsError(
                f"tensor dims {self.height}x{self.width}x{self.channels}"
            )
        arr = np.ascontiguousarray(self.data, dtype=np.int8)
        if arr.ndim != 1:
            arr = arr.reshape(-1)
        expected = self.height * self.width * self.channels
        if arr.size != expected:
            raise ShapeMismatchError(
                f"data length {arr.size}, expected {expected}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def zero_point(self) -> int:
        return self.qparams.zero_point

    @property
    def scale(self) -> float:
        return self.qparams.scale

    @property
    def nbytes(self) -> int:
        return self.height * self.width * self.channels

    def spatial(self) -> np.ndarray:
        """View of the data as an (H, W, C) array."""
        return self.data.reshape(self.height, self.width, self.channels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuantTensor):
            return NotImplemented
        return (
            self.height == other.height
            and self.width == other.width
            and self.channels == other.channels
            and self.qparams == other.qparams
            and np.array_equal(self.data, other.data)
        )

    def __hash__(self):
        return hash((self.height, self.width, self.channels, self.qparams,
                     self.data.tobytes()))


def tensor_index(t: QuantTensor, row: int, col: int, ch: int) -> int:
    """Flat offset of (row, col, ch) in the NHWC layout; channel fastest."""
    if not (0 <= row < t.height and 0 <= col < t.width and 0 <= ch < t.channels):
        raise OutOfBoundsError(
            f"({row}, {col}, {ch}) outside {t.height}x{t.width}x{t.channels}"
        )
    return (row * t.width + col) * t.channels + ch


@dataclass(frozen=True)
class RequantSpec:
    """Fixed-point output rescale for one channel.

    ``multiplier`` is a normalized Q31 value in [2**30, 2**31), i.e. it encodes
    a real factor in [0.5, 1.0); ``shift`` is an extra rounding right shift.
    """

    multiplier: int
    shift: int
    bias: int

    def __post_init__(self):
        if not (1 << 30) <= self.multiplier <= (1 << 31) - 1:
            raise ValueError(f"multiplier {self.multiplier} outside [2^30, 2^31)")
        if not 0 <= self.shift <= 31:
            raise ValueError(f"shift {self.shift} outside [0, 31]")
        if not -(1 << 31) <= self.bias <= (1 << 31) - 1:
            raise ValueError(f"bias {self.bias} outside int32 range")


_UNIT_QP = QuantParams(1.0, 0)


@dataclass(frozen=True)
class BlockConfig:
    """Geometry and quantization of one inverted-residual block.

    The block expands n_in channels to m_expanded with a 1x1 convolution,
    filters spatially with a 3x3 depthwise stage, and projects down to n_out.
    Expansion and depthwise outputs are activation-clamped, the projection is
    linear.
    """

    in_h: int
    in_w: int
    n_in: int
    m_expanded: int
    n_out: int
    stride: int = 1
    in_qp: QuantParams = _UNIT_QP
    ex_out_qp: QuantParams = _UNIT_QP
    dw_out_qp: QuantParams = _UNIT_QP
    pr_out_qp: QuantParams = _UNIT_QP
    ex_clamped: bool = True
    dw_clamped: bool = True
    pr_clamped: bool = False

    @property
    def out_h(self) -> int:
        return -(-self.in_h // self.stride)

    @property
    def out_w(self) -> int:
        return -(-self.in_w // self.stride)


def validate_config(cfg: BlockConfig) -> BlockConfig:
    """Check all block invariants; returns cfg unchanged when valid."""
    if min(cfg.in_h, cfg.in_w, cfg.n_in, cfg.m_expanded, cfg.n_out) < 1:
        raise EmptyDimsError(
            f"dims {cfg.in_h}x{cfg.in_w}, channels {cfg.n_in}/{cfg.m_expanded}/{cfg.n_out}"
        )
    if cfg.stride not in (1, 2):
        raise BadStrideError(f"stride {cfg.stride} not in {{1, 2}}")
    if cfg.n_in % 8 != 0:
        raise ChannelAlignmentError(f"n_in {cfg.n_in} is not a multiple of 8")
    if max(cfg.n_in, cfg.m_expanded, cfg.n_out) > CHANNEL_CAP:
        raise ChannelLimitError(
            f"channel count exceeds {CHANNEL_CAP} (32-bit accumulator bound)"
        )
    return cfg


@dataclass(frozen=True)
class BlockWeights:
    """All weights and per-channel requantization specs of one block.

    Weight zero points are implicitly 0 (symmetric int8 weights). Depthwise
    filters are stored row-major inside the 3x3 kernel: index k = 3*row + col.
    """

    ex_w: np.ndarray                     # (M, n_in) int8
    dw_w: np.ndarray                     # (M, 9) int8
    pr_w: np.ndarray                     # (n_out, M) int8
    ex_rq: tuple[RequantSpec, ...]       # M specs
    dw_rq: tuple[RequantSpec, ...]       # M specs
    pr_rq: tuple[RequantSpec, ...]       # n_out specs

    def __post_init__(self):
        for name in ("ex_w", "dw_w", "pr_w"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.int8)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "ex_rq", tuple(self.ex_rq))
        object.__setattr__(self, "dw_rq", tuple(self.dw_rq))
        object.__setattr__(self, "pr_rq", tuple(self.pr_rq))

    def check_shapes(self, cfg: BlockConfig) -> None:
        m, n_in, n_out = cfg.m_expanded, cfg.n_in, cfg.n_out
        if self.ex_w.shape != (m, n_in):
            raise ShapeMismatchError(f"ex_w {self.ex_w.shape} != ({m}, {n_in})")
        if self.dw_w.shape != (m, 9):
            raise ShapeMismatchError(f"dw_w {self.dw_w.shape} != ({m}, 9)")
        if self.pr_w.shape != (n_out, m):
            raise ShapeMismatchError(f"pr_w {self.pr_w.shape} != ({n_out}, {m})")
        if len(self.ex_rq) != m or len(self.dw_rq) != m or len(self.pr_rq) != n_out:
            raise ShapeMismatchError("requant spec counts do not match config")


# ---------------------------------------------------------------------------
# Deterministic workload generation (SplitMix64)
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def splitmix_next(state: int) -> tuple[int, int]:
    """One SplitMix64 step: returns (new_state, output), both 64-bit."""
    state = (state + _GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, (z ^ (z >> 31)) & _MASK64


class SplitMix64:
    """Stream wrapper around :func:`splitmix_next` with range helpers.

    The mappings below are part of the workload-generation contract; two
    implementations seeded identically must produce identical streams:

    * ``next_i8``  : low 8 bits reinterpreted as two's complement
    * ``next_in``  : lo + (u64 mod (hi - lo + 1)), inclusive bounds
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state, out = splitmix_next(self.state)
        return out

    def next_i8(self) -> int:
        return ((self.next_u64() & 0xFF) ^ 0x80) - 0x80

    def next_in(self, lo: int, hi: int) -> int:
        return lo + self.next_u64() % (hi - lo + 1)


def _draw_requant(rng: SplitMix64) -> RequantSpec:
    # Field order is pinned: multiplier, shift, bias.
    return RequantSpec(
        multiplier=rng.next_in(1 << 30, (1 << 31) - 1),
        shift=rng.next_in(0, 10),
        bias=rng.next_in(-(1 << 15), 1 << 15),
    )


def generate_workload(cfg: BlockConfig, seed: int) -> tuple[QuantTensor, BlockWeights]:
    """Deterministic random input tensor and weights for a block.

    Draw order is pinned for cross-implementation reproducibility: input
    tensor bytes in NHWC order, then ex_w, dw_w, pr_w row-major, then the
    requant arrays ex_rq, dw_rq, pr_rq with fields (multiplier, shift, bias)
    per spec, one PRNG draw per field. The tensor carries cfg.in_qp.
    """
    validate_config(cfg)
    rng = SplitMix64(seed)

    n_px = cfg.in_h * cfg.in_w
    data = np.fromiter(
        (rng.next_i8() for _ in range(n_px * cfg.n_in)), dtype=np.int8,
        count=n_px * cfg.n_in,
    )
    tensor = QuantTensor(cfg.in_h, cfg.in_w, cfg.n_in, data, cfg.in_qp)

    def draw_i8(n):
        return np.fromiter((rng.next_i8() for _ in range(n)), dtype=np.int8, count=n)

    m, n_in, n_out = cfg.m_expanded, cfg.n_in, cfg.n_out
    ex_w = draw_i8(m * n_in).reshape(m, n_in)
    dw_w = draw_i8(m * 9).reshape(m, 9)
    pr_w = draw_i8(n_out * m).reshape(n_out, m)
    ex_rq = tuple(_draw_requant(rng) for _ in range(m))
    dw_rq = tuple(_draw_requant(rng) for _ in range(m))
    pr_rq = tuple(_draw_requant(rng) for _ in range(n_out))

    return tensor, BlockWeights(ex_w, dw_w, pr_w, ex_rq, dw_rq, pr_rq)


# ---------------------------------------------------------------------------
# QTSR binary tensor format
# ---------------------------------------------------------------------------
#
# Little-endian layout:
#   magic "QTSR" | version u8 = 1 | height u32 | width u32 | channels u32
#   | zero_point i8 | scale f32 | height*width*channels raw int8 bytes
#
# The scale is stored at binary32 precision; round trips are bit-exact when
# the in-memory scale is binary32-representable.

QTSR_MAGIC = b"QTSR"
QTSR_VERSION = 1
_HEADER = struct.Struct("<4sBIIIbf")


def write_tensor(t: QuantTensor, sink: BinaryIO) -> None:
    """Serialize a tensor to a binary stream in the QTSR format."""
    sink.write(_HEADER.pack(QTSR_MAGIC, QTSR_VERSION, t.height, t.width,
                            t.channels, t.zero_point, t.scale))
    sink.write(t.data.tobytes())


def _read_exact(source: BinaryIO, n: int) -> bytes:
    buf = source.read(n)
    if len(buf) != n:
        raise TruncatedStreamError(f"wanted {n} bytes, got {len(buf)}")
    return buf


def read_tensor(source: BinaryIO) -> QuantTensor:
    """Parse one QTSR tensor from a binary stream."""
    magic = _read_exact(source, 4)
    if magic != QTSR_MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    rest = _read_exact(source, _HEADER.size - 4)
    _, version, h, w, c, zp, scale = _HEADER.unpack(magic + rest)
    if version != QTSR_VERSION:
        raise VersionMismatchError(f"version {version}, expected {QTSR_VERSION}")
    payload = _read_exact(source, h * w * c)
    data = np.frombuffer(payload, dtype=np.int8)
    return QuantTensor(h, w, c, data, QuantParams(scale, zp))
