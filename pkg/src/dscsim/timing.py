"""Cycle accounting for the three pipeline generations of the fused engine.

The schedulable work is the fused dataflow's stream of channel work units,
one per (pixel, group, expanded channel m), in the engine's traversal order.
Each unit passes five substages with configurable latencies:

    ex_mac (ceil(n_in/8) chunks) -> ex_quant -> dw_mac -> dw_quant -> pr_mac

plus a readback of each group's output bytes and a fixed per-pixel control
overhead that is serial in every version.

* v1 runs every unit, readback included, strictly one after another.
* v2 binds the substages into three stage resources (Expansion, Depthwise,
  Projection); units flow through them in order, so consecutive channels,
  and with them consecutive pixels, overlap across stages. Readback only has
  to finish before the projection accumulators are reused for the next
  group; it overlaps the following pixel's expansion work.
* v3 gives each of the five substages its own stage resource. A stage holds
  a unit for its full latency (the quantize stages are not internally
  pipelined), so the steady-state initiation interval per channel is the
  maximum of the five stage latencies.

Busy cycles per substage are identical across versions by construction;
pipelining only converts idle time into overlap. Absolute cycle counts are
model constants, not hardware measurements: only orderings and ratios are
meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .core import BlockConfig, validate_config
from .membank import PR_ENGINES

STAGES = ("ex_mac", "ex_quant", "dw_mac", "dw_quant", "pr_mac")
VERSIONS = ("v1", "v2", "v3")


@dataclass(frozen=True)
class StageLatencies:
    """Cycle costs of the pipeline substages (all model constants)."""

    ex_mac_per_chunk: int = 1    # per 8-channel chunk, so ceil(n_in/8) per tile
    ex_quant: int = 4
    dw_mac: int = 1              # all nine taps in one cycle
    dw_quant: int = 4
    pr_mac: int = 1              # per broadcast into the accumulators
    readback_per_value: int = 1
    pixel_overhead: int = 8      # fixed control cost per output pixel

    def __post_init__(self):
        for name in ("ex_mac_per_chunk", "ex_quant", "dw_mac", "dw_quant",
                     "pr_mac", "readback_per_value"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.pixel_overhead < 0:
            raise ValueError("pixel_overhead must be >= 0")

    def with_overrides(self, **kwargs) -> "StageLatencies":
        return replace(self, **kwargs)


def default_latencies() -> StageLatencies:
    return StageLatencies()


@dataclass(frozen=True)
class TimingReport:
    version: str
    total_cycles: int
    busy: dict[str, int]                 # per substage, plus "readback"
    idle: dict[str, int]
    steady_state_interval: int           # cycles per expanded channel m
    pixels_in_flight_max: int

    def __post_init__(self):
        assert all(self.busy[s] + self.idle[s] == self.total_cycles
                   for s in self.busy)


def _stage_latencies(cfg: BlockConfig, lat: StageLatencies) -> tuple[int, ...]:
    chunks = -(-cfg.n_in // 8)
    return (chunks * lat.ex_mac_per_chunk, lat.ex_quant, lat.dw_mac,
            lat.dw_quant, lat.pr_mac)


def simulate(version: str, cfg: BlockConfig,
             lat: StageLatencies | None = None) -> TimingReport:
    """Exact cycle totals of one block run under the chosen pipeline model."""
    if version not in VERSIONS:
        raise ValueError(f"unknown pipeline version {version!r}")
    validate_config(cfg)
    lat = lat or default_latencies()

    sub = _stage_latencies(cfg, lat)
    if version == "v1":
        stages = [sum(sub)]
        serial_readback = True
    elif version == "v2":
        stages = [sub[0] + sub[1], sub[2] + sub[3], sub[4]]
        serial_readback = False
    else:
        stages = list(sub)
        serial_readback = False
    ns = len(stages)

    pixels = cfg.out_h * cfg.out_w
    m_total = cfg.m_expanded
    group_sizes = [min(PR_ENGINES, cfg.n_out - g0)
                   for g0 in range(0, cfg.n_out, PR_ENGINES)]

    done = [0] * ns
    rb_done = 0
    pixel_spans: list[tuple[int, int]] = []

    for _p in range(pixels):
        pixel_start = None
        for gs in group_sizes:
            for m in range(m_total):
                # Accumulators are reused per group: the last stage of a
                # group's first unit waits for the previous readback. v1
                # serializes on readback for every unit.
                gate = rb_done if (m == 0 or serial_readback) else 0
                prev = 0
                for s in range(ns):
                    start = max(done[s], prev)
                    if s == ns - 1:
                        start = max(start, gate)
                    if s == 0 and m == 0 and pixel_start is None:
                        pixel_start = start
                    done[s] = start + stages[s]
                    prev = done[s]
            rb_done = max(done[-1], rb_done) + gs * lat.readback_per_value
        pixel_spans.append((pixel_start, rb_done))

    total = rb_done + pixels * lat.pixel_overhead

    busy = {name: pixels * len(group_sizes) * m_total * sub[i]
            for i, name in enumerate(STAGES)}
    busy["readback"] = pixels * cfg.n_out * lat.readback_per_value
    idle = {name: total - cycles for name, cycles in busy.items()}

    if version == "v1":
        interval = sum(sub)
        in_flight = 1
    else:
        interval = max(stages)
        in_flight = _max_overlap(pixel_spans)

    return TimingReport(version, total, busy, idle, interval, in_flight)


def _max_overlap(spans: list[tuple[int, int]]) -> int:
    """Max number of half-open [start, end) intervals alive at once."""
    events = []
    for start, end in spans:
        events.append((start, 1))
        events.append((end, -1))
    events.sort()
    alive = best = 0
    for _, delta in events:
        alive += delta
        best = max(best, alive)
    return best


def speedup(a: TimingReport, b: TimingReport) -> float:
    """Cycle ratio a/b; > 1 means b is faster."""
    return a.total_cycles / b.total_cycles
