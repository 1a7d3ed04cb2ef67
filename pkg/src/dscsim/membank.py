"""Heterogeneous on-chip memory subsystem with exact access counting.

Four buffer structures feed the engines:

* a 9-bank input feature map buffer giving conflict-free 3x3 window reads
  (one pixel's channel vector per bank word),
* a sequential expansion-filter buffer read in 8-byte chunks that are
  broadcast to all nine expansion engines,
* a 9-bank depthwise-filter buffer, one bank per kernel position, so a whole
  3x3 filter is one 72-bit access,
* 56 private single-byte projection weight buffers, one per engine.

Out-of-bounds window slots are synthesized by padding logic and cost no
memory access. Loading a buffer counts write traffic once per byte; that
write side is what the analytical traffic accountant compares against.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import BlockConfig, BlockWeights, QuantTensor
from .errors import BadIndexError

IFMAP_BANKS = 9
DW_BANKS = 9
PR_ENGINES = 56
EX_CHUNK = 8  # one 64-bit expansion filter word = 8 channels


def bank_id(row: int, col: int) -> int:
    """Bank index of pixel (row, col): (row mod 3) * 3 + (col mod 3)."""
    return (row % 3) * 3 + (col % 3)


@dataclass(frozen=True)
class CategoryCounter:
    accesses: int
    bytes: int


@dataclass(frozen=True)
class AccessCounters:
    """Snapshot of all access counts; byte totals are accesses * word size."""

    ifmap_reads: CategoryCounter       # bank-word reads (padding reads nothing)
    ifmap_window_events: int           # 3x3 window read operations
    ex_filter_reads: CategoryCounter   # 8-byte chunk reads
    dw_filter_reads: CategoryCounter   # 72-bit whole-filter reads
    pr_weight_reads: CategoryCounter   # single-byte reads, all engines
    output_writes: CategoryCounter
    input_load_bytes: int              # one-time buffer fills (write side)
    weight_load_bytes: int


class IfmapBuffer:
    """9-bank pixel buffer; word = one pixel's channel vector (n_in bytes)."""

    def __init__(self, tensor: QuantTensor):
        self.height = tensor.height
        self.width = tensor.width
        self.word_bytes = tensor.channels
        self.bank_reads = [0] * IFMAP_BANKS
        self.bank_writes = [0] * IFMAP_BANKS
        self.window_events = 0
        self.banks: list[dict[tuple[int, int], tuple[int, ...]]] = [
            {} for _ in range(IFMAP_BANKS)
        ]
        rows = tensor.data.reshape(-1, tensor.channels).tolist()
        idx = 0
        for r in range(self.height):
            for c in range(self.width):
                b = bank_id(r, c)
                self.banks[b][(r, c)] = tuple(rows[idx])
                self.bank_writes[b] += 1
                idx += 1
        # Gathered windows are cached per center; contents are immutable, so
        # repeat reads only have to update the counters.
        self._window_cache: dict[tuple[int, int], tuple[tuple, tuple[int, ...]]] = {}

    @property
    def load_bytes(self) -> int:
        return sum(self.bank_writes) * self.word_bytes

    @property
    def read_bytes(self) -> int:
        return sum(self.bank_reads) * self.word_bytes

    def window_read(self, center_r: int, center_c: int):
        """Read the 3x3 window centered at (center_r, center_c).

        Returns nine slots in row-major window order; out-of-bounds slots are
        None and touch no bank. In-bounds slots hit nine distinct banks by
        construction of the bank_id mapping.
        """
        cached = self._window_cache.get((center_r, center_c))
        if cached is None:
            slots = []
            touched = []
            for dr in (-1, 0, 1):
                r = center_r + dr
                for dc in (-1, 0, 1):
                    c = center_c + dc
                    if 0 <= r < self.height and 0 <= c < self.width:
                        b = bank_id(r, c)
                        touched.append(b)
                        slots.append(self.banks[b][(r, c)])
                    else:
                        slots.append(None)
            cached = (tuple(slots), tuple(touched))
            self._window_cache[(center_r, center_c)] = cached
        slots, touched = cached
        self.window_events += 1
        reads = self.bank_reads
        for b in touched:
            reads[b] += 1
        return slots


class ExpansionFilterBuffer:
    """All M expansion filters stored sequentially; read in 8-byte chunks."""

    def __init__(self, ex_w):
        self.rows = [tuple(r) for r in ex_w.tolist()]
        self.m = len(self.rows)
        self.n_in = len(self.rows[0])
        self.chunks_per_filter = self.n_in // EX_CHUNK
        self.chunk_accesses = 0
        self.load_bytes = self.m * self.n_in

    def chunk_read(self, m: int, chunk_idx: int) -> tuple[int, ...]:
        """One 64-bit chunk of filter m, broadcast to all nine engines."""
        if not (0 <= m < self.m and 0 <= chunk_idx < self.chunks_per_filter):
            raise BadIndexError(f"filter {m} chunk {chunk_idx}")
        self.chunk_accesses += 1
        lo = chunk_idx * EX_CHUNK
        return self.rows[m][lo:lo + EX_CHUNK]

    def filter_read(self, m: int) -> tuple[int, ...]:
        """Whole filter m via sequential chunk reads (counted per chunk)."""
        if not 0 <= m < self.m:
            raise BadIndexError(f"filter {m}")
        self.chunk_accesses += self.chunks_per_filter
        return self.rows[m]

    @property
    def read_bytes(self) -> int:
        return self.chunk_accesses * EX_CHUNK


class DwFilterBuffer:
    """9-bank depthwise filter store; bank k holds kernel position k of all filters."""

    def __init__(self, dw_w):
        rows = dw_w.tolist()
        self.m = len(rows)
        self.banks = [tuple(rows[m][k] for m in range(self.m)) for k in range(DW_BANKS)]
        self.rows = [tuple(r) for r in rows]
        self.read_events = 0
        self.bank_reads = [0] * DW_BANKS
        self.load_bytes = self.m * DW_BANKS

    def filter_read(self, m: int) -> tuple[int, ...]:
        """Entire 3x3 filter m as one 72-bit access event."""
        if not 0 <= m < self.m:
            raise BadIndexError(f"filter {m}")
        self.read_events += 1
        for k in range(DW_BANKS):
            self.bank_reads[k] += 1
        return self.rows[m]

    @property
    def read_bytes(self) -> int:
        return self.read_events * DW_BANKS


class ProjectionBuffers:
    """Distributed per-engine weight buffers; engine e serves output channel
    group_base + e and is read one byte at a time."""

    def __init__(self, pr_w):
        self.rows = [tuple(r) for r in pr_w.tolist()]
        self.n_out = len(self.rows)
        self.m = len(self.rows[0])
        self.group_base = 0
        # Column reads always touch engines 0..size-1 exactly once, so the
        # per-engine counts are recovered from per-size event tallies.
        self._column_events: dict[int, int] = {}
        self._single_reads = [0] * PR_ENGINES
        self._col_cache: dict[tuple[int, int], list[list[int]]] = {}
        self.load_bytes = self.n_out * self.m

    def set_group(self, base: int) -> None:
        if not 0 <= base < self.n_out:
            raise BadIndexError(f"group base {base}")
        self.group_base = base

    def weight_read(self, engine: int, m: int) -> int:
        """One byte from engine's private buffer: pr_w[group_base + engine, m]."""
        if not (0 <= engine < PR_ENGINES and 0 <= m < self.m):
            raise BadIndexError(f"engine {engine} m {m}")
        row = self.group_base + engine
        if row >= self.n_out:
            raise BadIndexError(f"engine {engine} maps past channel {self.n_out}")
        self._single_reads[engine] += 1
        return self.rows[row][m]

    def column_read(self, m: int, size: int) -> list[int]:
        """Broadcast step: engines 0..size-1 each read their weight for input
        channel m simultaneously (size independent single-byte accesses)."""
        if not (0 <= m < self.m and 0 < size <= PR_ENGINES):
            raise BadIndexError(f"m {m} size {size}")
        base = self.group_base
        if base + size > self.n_out:
            raise BadIndexError("group extends past last output channel")
        cols = self._col_cache.get((base, size))
        if cols is None:
            cols = [[self.rows[base + e][mm] for e in range(size)]
                    for mm in range(self.m)]
            self._col_cache[(base, size)] = cols
        self._column_events[size] = self._column_events.get(size, 0) + 1
        return cols[m]

    def engine_reads(self, engine: int) -> int:
        if not 0 <= engine < PR_ENGINES:
            raise BadIndexError(f"engine {engine}")
        bulk = sum(n for size, n in self._column_events.items() if engine < size)
        return self._single_reads[engine] + bulk

    @property
    def total_reads(self) -> int:
        return sum(self._single_reads) + sum(
            size * n for size, n in self._column_events.items()
        )


class BlockBuffers:
    """The full memory subsystem for one block run, plus the output port."""

    def __init__(self, cfg: BlockConfig, weights: BlockWeights, inp: QuantTensor):
        weights.check_shapes(cfg)
        self.ifmap = IfmapBuffer(inp)
        self.ex_filters = ExpansionFilterBuffer(weights.ex_w)
        self.dw_filters = DwFilterBuffer(weights.dw_w)
        self.pr_weights = ProjectionBuffers(weights.pr_w)
        self.output_write_count = 0

    def write_output(self, n_values: int) -> None:
        self.output_write_count += n_values


def snapshot_counters(bufs: BlockBuffers) -> AccessCounters:
    """Consistent copy of every counter in the buffer set."""
    ifmap = bufs.ifmap
    exf = bufs.ex_filters
    dwf = bufs.dw_filters
    prw = bufs.pr_weights
    return AccessCounters(
        ifmap_reads=CategoryCounter(sum(ifmap.bank_reads), ifmap.read_bytes),
        ifmap_window_events=ifmap.window_events,
        ex_filter_reads=CategoryCounter(exf.chunk_accesses, exf.read_bytes),
        dw_filter_reads=CategoryCounter(dwf.read_events, dwf.read_bytes),
        pr_weight_reads=CategoryCounter(prw.total_reads, prw.total_reads),
        output_writes=CategoryCounter(bufs.output_write_count, bufs.output_write_count),
        input_load_bytes=ifmap.load_bytes,
        weight_load_bytes=exf.load_bytes + dwf.load_bytes + prw.load_bytes,
    )
