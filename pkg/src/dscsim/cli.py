"""Command-line front end: verification, traffic and timing reports, tensor files.

Subcommands:

    verify   run fused vs. golden on one workload, report divergence if any
    traffic  baseline vs. fused byte movement, single config or all presets
    timing   cycle reports and speedups for pipeline versions v1/v2/v3
    macs     standard vs. depthwise-separable MAC costs for (W, K, M, N)
    gen      emit QTSR tensor files for a generated workload

Exit codes: 0 success, 1 usage error, 2 verification mismatch, 3 I/O failure.
Machine-readable reports (--machine) are stable key=value lines; identical
manifests produce byte-identical output.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field

from . import analysis, timing
from .core import (
    BlockConfig,
    QuantParams,
    generate_workload,
    validate_config,
    write_tensor,
)
from .errors import ConfigParseError, SimError
from .fused import run_block_fused
from .golden import run_block_golden

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MISMATCH = 2
EXIT_IO = 3

# Reference speedup windows the timing report checks against.
V2_OVER_V1_WINDOW = (1.5, 2.6)
V3_OVER_V1_WINDOW = (2.0, 3.4)

_GEOM_KEYS = ("in_h", "in_w", "n_in", "m_expanded", "n_out", "stride")
_QUANT_KEYS = ("in_scale", "in_zp", "ex_scale", "ex_zp",
               "dw_scale", "dw_zp", "pr_scale", "pr_zp")
_REQUIRED_KEYS = ("in_h", "in_w", "n_in", "m_expanded", "n_out")


def parse_config(text: str) -> BlockConfig:
    """Parse a line-based ``key = value`` block config.

    Defaults: stride 1, all scales 1.0, all zero points 0. Unknown keys are
    rejected; '#' starts a comment.
    """
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(lineno, f"expected key = value, got {raw.strip()!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _GEOM_KEYS + _QUANT_KEYS:
            raise ConfigParseError(lineno, f"unknown key {key!r}")
        if key in values:
            raise ConfigParseError(lineno, f"duplicate key {key!r}")
        try:
            values[key] = float(val) if key.endswith("_scale") else int(val)
        except ValueError:
            raise ConfigParseError(lineno, f"bad value for {key}: {val!r}") from None
    missing = [k for k in _REQUIRED_KEYS if k not in values]
    if missing:
        raise ConfigParseError(0, f"missing required keys: {', '.join(missing)}")

    def qp(prefix: str) -> QuantParams:
        return QuantParams(values.get(f"{prefix}_scale", 1.0),
                           int(values.get(f"{prefix}_zp", 0)))

    cfg = BlockConfig(
        in_h=int(values["in_h"]), in_w=int(values["in_w"]),
        n_in=int(values["n_in"]), m_expanded=int(values["m_expanded"]),
        n_out=int(values["n_out"]), stride=int(values.get("stride", 1)),
        in_qp=qp("in"), ex_out_qp=qp("ex"), dw_out_qp=qp("dw"), pr_out_qp=qp("pr"),
    )
    return validate_config(cfg)


@dataclass
class RunManifest:
    """Everything needed to reproduce a run; echoed at the top of reports."""

    command: str
    options: dict[str, object] = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = [f"manifest.command={self.command}"]
        out.extend(f"manifest.{k}={v}" for k, v in self.options.items())
        return out


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the contract is 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _add_workload_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=sorted(analysis.PRESETS),
                     help="named benchmark workload")
    src.add_argument("--config", metavar="FILE",
                     help="key = value block config file")
    p.add_argument("--seed", type=lambda s: int(s, 0), default=0,
                   help="workload generator seed (default 0)")


def _add_report_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--machine", action="store_true",
                   help="stable key=value output")
    p.add_argument("--out", metavar="PATH", help="write the report to a file")


def build_parser() -> _Parser:
    parser = _Parser(prog="dscsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("verify", help="fused vs. golden bit-exactness check")
    _add_workload_args(p)
    _add_report_args(p)

    p = sub.add_parser("traffic", help="baseline vs. fused byte movement")
    _add_workload_args(p)
    p.add_argument("--presets", action="store_true",
                   help="report all presets against reference byte counts")
    _add_report_args(p)

    p = sub.add_parser("timing", help="pipeline cycle reports and speedups")
    _add_workload_args(p)
    p.add_argument("--versions", default="v1,v2,v3",
                   help="comma list from v1,v2,v3 (default all)")
    p.add_argument("--lat", action="append", default=[], metavar="KEY=VAL",
                   help="override a stage latency (repeatable)")
    _add_report_args(p)

    p = sub.add_parser("macs", help="standard vs. DSC MAC cost")
    p.add_argument("--w", type=int, required=True, help="spatial size W")
    p.add_argument("--k", type=int, required=True, help="kernel size K")
    p.add_argument("--m", type=int, required=True, help="input channels M")
    p.add_argument("--n", type=int, required=True, help="output channels N")
    _add_report_args(p)

    p = sub.add_parser("gen", help="write workload tensors as QTSR files")
    _add_workload_args(p)
    p.add_argument("--out", metavar="PATH", required=True,
                   help="path for the input tensor")
    p.add_argument("--golden-out", metavar="PATH",
                   help="also write the golden block output")

    return parser


def _load_config(args) -> tuple[BlockConfig, dict[str, object]]:
    if args.preset:
        return analysis.PRESETS[args.preset].config(), {"preset": args.preset}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
        return parse_config(text), {"config": args.config}
    raise _UsageError("one of --preset or --config is required")


def _emit(lines: list[str], args) -> None:
    text = "\n".join(lines) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_latencies(pairs: list[str]) -> timing.StageLatencies:
    fields = timing.StageLatencies.__dataclass_fields__
    overrides = {}
    for pair in pairs:
        key, eq, val = pair.partition("=")
        if not eq or key not in fields:
            raise _UsageError(f"bad --lat override {pair!r}")
        try:
            overrides[key] = int(val)
        except ValueError:
            raise _UsageError(f"bad --lat value {pair!r}") from None
    try:
        return timing.StageLatencies(**overrides)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_verify(args) -> int:
    cfg, src = _load_config(args)
    manifest = RunManifest("verify", {**src, "seed": args.seed})
    inp, weights = generate_workload(cfg, args.seed)
    golden = run_block_golden(cfg, weights, inp)
    fused = run_block_fused(cfg, weights, inp)
    f1_bytes = golden.f1.nbytes

    lines = manifest.lines() if args.machine else []
    identical = fused.out == golden.out
    if args.machine:
        lines.append(f"result={'IDENTICAL' if identical else 'MISMATCH'}")
        lines.append(f"peak_transient_bytes={fused.peak_transient_bytes}")
        lines.append(f"golden_f1_bytes={f1_bytes}")
        lines.append(f"groups={fused.groups}")
    else:
        lines.append(f"workload: {src} seed={args.seed} "
                     f"({cfg.in_h}x{cfg.in_w}x{cfg.n_in}, M={cfg.m_expanded}, "
                     f"n_out={cfg.n_out}, stride={cfg.stride})")
        lines.append(f"fused transient peak: {fused.peak_transient_bytes} bytes"
                     f"  vs  golden F1 buffer: {f1_bytes} bytes")
        lines.append("result: IDENTICAL" if identical else "result: MISMATCH")

    if not identical:
        a = fused.out.data
        b = golden.out.data
        pos = int((a != b).argmax())
        ch = pos % cfg.n_out
        col = (pos // cfg.n_out) % cfg.out_w
        row = pos // (cfg.n_out * cfg.out_w)
        if args.machine:
            lines += [f"first_diff.row={row}", f"first_diff.col={col}",
                      f"first_diff.ch={ch}", f"first_diff.fused={int(a[pos])}",
                      f"first_diff.golden={int(b[pos])}"]
        else:
            lines.append(f"first divergence at (row={row}, col={col}, ch={ch}): "
                         f"fused={int(a[pos])} golden={int(b[pos])}")
        _emit(lines, args)
        return EXIT_MISMATCH
    _emit(lines, args)
    return EXIT_OK


def _traffic_lines(tag: str, t: analysis.TrafficBreakdown) -> list[str]:
    return [
        f"{tag}.input_bytes={t.input_bytes}",
        f"{tag}.weight_bytes={t.weight_bytes}",
        f"{tag}.intermediate_bytes={t.intermediate_bytes}",
        f"{tag}.output_bytes={t.output_bytes}",
        f"{tag}.total_bytes={t.total_bytes}",
    ]


def cmd_traffic(args) -> int:
    if args.presets:
        manifest = RunManifest("traffic", {"presets": "all"})
        lines = manifest.lines() if args.machine else \
            ["preset  intermediate  expected  status"]
        agg = analysis.aggregate_reduction_percent()
        all_pass = True
        for name in ("3rd", "5th", "8th", "15th"):
            cfg = analysis.PRESETS[name].config()
            inter = analysis.baseline_traffic(cfg).intermediate_bytes
            expected = analysis.REFERENCE_INTERMEDIATE_BYTES[name]
            ok = inter == expected
            all_pass &= ok
            status = "PASS" if ok else "FAIL"
            if args.machine:
                lines += [f"{name}.intermediate_bytes={inter}",
                          f"{name}.expected={expected}", f"{name}.status={status}"]
            else:
                lines.append(f"{name:<7} {inter:>12}  {expected:>8}  {status}")
        if args.machine:
            lines.append(f"aggregate.reduction_percent={agg:.4f}")
        else:
            lines.append(f"aggregate reduction over the four presets: {agg:.2f}%"
                         " (reference claim: about 87%)")
        _emit(lines, args)
        return EXIT_OK if all_pass else EXIT_MISMATCH

    cfg, src = _load_config(args)
    manifest = RunManifest("traffic", src)
    base = analysis.baseline_traffic(cfg)
    fused = analysis.fused_traffic(cfg)
    red = analysis.reduction_percent(base, fused)
    if args.machine:
        lines = manifest.lines()
        lines += _traffic_lines("baseline", base)
        lines += _traffic_lines("fused", fused)
        lines.append(f"reduction_percent={red:.4f}")
        lines.append(f"recompute_groups={analysis.recompute_groups(cfg)}")
    else:
        lines = [f"traffic for {src} "
                 f"({cfg.in_h}x{cfg.in_w}x{cfg.n_in}, M={cfg.m_expanded}, "
                 f"n_out={cfg.n_out}, stride={cfg.stride})",
                 f"{'category':<14}{'baseline':>12}{'fused':>12}"]
        for cat in ("input", "weight", "intermediate", "output"):
            b = getattr(base, f"{cat}_bytes")
            f = getattr(fused, f"{cat}_bytes")
            lines.append(f"{cat:<14}{b:>12}{f:>12}")
        lines.append(f"{'total':<14}{base.total_bytes:>12}{fused.total_bytes:>12}")
        lines.append(f"reduction: {red:.2f}%")
    _emit(lines, args)
    return EXIT_OK


def _window_status(ratio: float, window: tuple[float, float]) -> str:
    return "PASS" if window[0] <= ratio <= window[1] else "FAIL"


def cmd_timing(args) -> int:
    cfg, src = _load_config(args)
    versions = [v.strip() for v in args.versions.split(",") if v.strip()]
    for v in versions:
        if v not in timing.VERSIONS:
            raise _UsageError(f"unknown version {v!r}")
    lat = _parse_latencies(args.lat)
    manifest = RunManifest("timing", {**src, "versions": ",".join(versions),
                                      "lat": ";".join(sorted(args.lat))})
    reports = {v: timing.simulate(v, cfg, lat) for v in versions}

    lines = manifest.lines() if args.machine else []
    for v in versions:
        r = reports[v]
        if args.machine:
            lines.append(f"{v}.total_cycles={r.total_cycles}")
            lines.append(f"{v}.steady_state_interval={r.steady_state_interval}")
            lines.append(f"{v}.pixels_in_flight_max={r.pixels_in_flight_max}")
            for stage in (*timing.STAGES, "readback"):
                lines.append(f"{v}.busy.{stage}={r.busy[stage]}")
                lines.append(f"{v}.idle.{stage}={r.idle[stage]}")
        else:
            lines.append(f"{v}: total={r.total_cycles} cycles, "
                         f"channel interval={r.steady_state_interval}, "
                         f"pixels in flight={r.pixels_in_flight_max}")

    ordered = [reports[v].total_cycles for v in ("v1", "v2", "v3") if v in reports]
    if len(versions) > 1:
        monotone = all(a >= b for a, b in zip(ordered, ordered[1:]))
        if args.machine:
            lines.append(f"ordering.v1_ge_v2_ge_v3={'PASS' if monotone else 'FAIL'}")
        else:
            lines.append(f"ordering v1 >= v2 >= v3: {'PASS' if monotone else 'FAIL'}")
        for a, b, window in (("v1", "v2", V2_OVER_V1_WINDOW),
                             ("v1", "v3", V3_OVER_V1_WINDOW)):
            if a in reports and b in reports:
                ratio = timing.speedup(reports[a], reports[b])
                status = _window_status(ratio, window)
                if args.machine:
                    lines.append(f"speedup.{b}_over_{a}={ratio:.4f}")
                    lines.append(f"window.{b}_over_{a}={status}")
                else:
                    lines.append(f"speedup {b} over {a}: {ratio:.2f}x "
                                 f"(window {window[0]}-{window[1]}: {status})")
    _emit(lines, args)
    return EXIT_OK


def cmd_macs(args) -> int:
    manifest = RunManifest("macs", {"w": args.w, "k": args.k,
                                    "m": args.m, "n": args.n})
    std = analysis.mac_cost_standard(args.w, args.k, args.m, args.n)
    dsc = analysis.mac_cost_dsc(args.w, args.k, args.m, args.n)
    ratio = analysis.dsc_ratio(args.k, args.n)
    if args.machine:
        lines = manifest.lines()
        lines += [f"standard_macs={std}", f"dsc_macs={dsc}",
                  f"dsc_ratio={float(ratio):.8f}"]
    else:
        lines = [f"standard convolution: {std} MACs",
                 f"depthwise separable:  {dsc} MACs",
                 f"ratio: {float(ratio):.6f} (= 1/{args.n} + 1/{args.k}^2), "
                 f"{float(1 / ratio):.2f}x fewer"]
    _emit(lines, args)
    return EXIT_OK


def cmd_gen(args) -> int:
    cfg, _src = _load_config(args)
    inp, weights = generate_workload(cfg, args.seed)
    with open(args.out, "wb") as fh:
        write_tensor(inp, fh)
    written = [args.out]
    if args.golden_out:
        golden = run_block_golden(cfg, weights, inp)
        with open(args.golden_out, "wb") as fh:
            write_tensor(golden.out, fh)
        written.append(args.golden_out)
    sys.stdout.write("".join(f"wrote {p}\n" for p in written))
    return EXIT_OK


_COMMANDS = {
    "verify": cmd_verify,
    "traffic": cmd_traffic,
    "timing": cmd_timing,
    "macs": cmd_macs,
    "gen": cmd_gen,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.cmd](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigParseError, SimError, ValueError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
