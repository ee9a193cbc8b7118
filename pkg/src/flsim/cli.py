"""Experiment runner: plan and reliability tables, and config-driven simulations.

Three subcommands:

    flsim plan     --alpha N --beta-min B --omega-min O --s-threshold-ms S
    flsim analyze  --alpha N --mttf-hours M --mttr-seconds R --group-size G [...]
    flsim simulate CONFIG [--seed S] [--replications R] --out DIR

Tables are emitted as aligned text on stdout and, with --out, as CSV files
(one header row, comma separator, '\\n' endings, numeric fields only).
Outputs are deterministic and locale independent.  Every error path exits
non-zero after printing one line prefixed ``flsim: error:``.

The simulate config file is line oriented ``key=value`` with ``#`` comment
lines; unknown keys are rejected.  The ``cloud`` key takes either a cloud
file path or ``synth:<kind>:<n>:<extent>[:<seed>]``.
"""

from __future__ import annotations

import argparse
import math
import statistics
import sys
from dataclasses import dataclass
from pathlib import Path

from . import ingest
from .failure_detect import DetectorParams
from .model import BatteryParams, PointCloud, ReliabilityParams
from .reliability import PARITY, REPLICATION, mtdi_grouped, mtdi_naive
from .simkernel import SimConfig, SimMetrics, run_replications
from .stag import FlockingPlan, plan_flocks

# Published reference values for the 65,321-point illumination, shown next
# to computed figures.  The published MTDI cells are not derivable from the
# stated formulas (and the G=10 total is one off from ceil(alpha/G)); they
# are reference data, never asserted as computed output.
PAPER_TABLE2 = {
    (65321, 10): {"total": 71853, "overhead_pct": 10.0, "mtdi_hours": 2670.0, "mtdi_days": 111.0},
    (65321, 20): {"total": 68588, "overhead_pct": 5.0, "mtdi_hours": 1399.0, "mtdi_days": 58.0},
}
TABLE2_NOTE = (
    "note: 'published' columns quote the reference table for the 65,321-point "
    "illumination; its MTDI cells (2670 h / 1399 h) exceed the stated formulas' "
    "values by ~10-13% and its G=10 total is one below alpha+ceil(alpha/G). "
    "Computed columns follow the formulas."
)


class CliError(ValueError):
    """User-facing command error; printed with the machine-parsable prefix."""


# -- plan -------------------------------------------------------------------


def build_plan_rows(plan: FlockingPlan) -> list[tuple[str, str]]:
    """The staggered-charging table: one (metric, value) row per line."""
    if plan.flock_count == 0:
        return [
            ("flocks", "0"),
            ("fls_per_flock", "0"),
            ("extra_fls_per_flock", "0"),
            ("last_flock_fls", "0"),
            ("last_flock_stagger_ms", ""),
            ("last_flock_extra_fls", "0"),
            ("last_flock_extra_exact", "0"),
            ("total_extra_fls", "0"),
            ("overhead_pct", _fmt(float(plan.overhead_fraction) * 100.0)),
            ("total_fls", "0"),
        ]
    first = plan.flocks[0]
    last = plan.flocks[-1]
    return [
        ("flocks", str(plan.flock_count)),
        ("fls_per_flock", str(first.size)),
        ("extra_fls_per_flock", str(first.extra)),
        ("last_flock_fls", str(last.size)),
        ("last_flock_stagger_ms", str(_round_half_up(last.stagger_ms))),
        ("last_flock_extra_fls", str(last.extra)),
        ("last_flock_extra_exact", _fmt(float(last.extra_exact))),
        ("total_extra_fls", str(plan.total_extra)),
        ("overhead_pct", _fmt(float(plan.overhead_fraction) * 100.0)),
        ("total_fls", str(plan.total_fls)),
    ]


def cmd_plan(alpha: int, bp: BatteryParams, s_threshold_ms: int, out_dir: Path | None) -> int:
    plan = plan_flocks(alpha, bp, s_threshold_ms)
    rows = build_plan_rows(plan)
    print(
        f"STAG plan: alpha={alpha} beta={bp.beta_s:g}s omega={bp.omega_s:g}s "
        f"s_threshold={s_threshold_ms}ms"
    )
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print(f"  {name:<{width}}  {value}")
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_csv(out_dir / "plan.csv", ["metric", "value"], [[n, v] for n, v in rows])
    return 0


# -- analyze ------------------------------------------------------------------

ANALYZE_HEADER = [
    "group_size",
    "standby_count",
    "total_fls",
    "overhead_pct",
    "p_double",
    "mttf_group_hours",
    "mtdi_hours",
    "mtdi_days",
    "published_total_fls",
    "published_overhead_pct",
    "published_mtdi_hours",
]


def build_analyze_rows(
    mttf_hours: float, mttr_s: float, group_sizes: list[int], alpha: int
) -> list[list[str]]:
    """Reliability table: the unprotected baseline plus one row per group size."""
    naive = mtdi_naive(mttf_hours, alpha)
    rows = [
        [
            "0",
            "0",
            str(alpha),
            "0",
            "",
            "",
            _fmt(naive),
            _fmt(naive / 24.0),
            "",
            "",
            "",
        ]
    ]
    for g in group_sizes:
        report = mtdi_grouped(ReliabilityParams(mttf_hours, mttr_s, g), alpha)
        published = PAPER_TABLE2.get((alpha, g), {})
        rows.append(
            [
                str(g),
                str(report.standby_count),
                str(report.total_fls),
                _fmt(report.overhead_fraction * 100.0),
                _fmt(report.p_double),
                _fmt(report.mttf_group_hours),
                _fmt(report.mtdi_grouped_hours),
                _fmt(report.mtdi_grouped_days),
                str(published["total"]) if published else "",
                _fmt(published["overhead_pct"]) if published else "",
                _fmt(published["mtdi_hours"]) if published else "",
            ]
        )
    return rows


def cmd_analyze(
    mttf_hours: float,
    mttr_s: float,
    group_sizes: list[int],
    alpha: int,
    out_dir: Path | None,
) -> int:
    if not group_sizes:
        raise CliError("analyze needs at least one --group-size")
    rows = build_analyze_rows(mttf_hours, mttr_s, group_sizes, alpha)
    naive_s = mtdi_naive(mttf_hours, alpha) * 3600.0
    print(
        f"Reliability analysis: alpha={alpha} mttf={mttf_hours:g}h mttr={mttr_s:g}s"
    )
    print(f"  unprotected MTDI: {_fmt(naive_s)} seconds (group_size=0 row)")
    widths = [
        max(len(ANALYZE_HEADER[i]), max(len(r[i]) for r in rows))
        for i in range(len(ANALYZE_HEADER))
    ]
    print("  " + "  ".join(h.ljust(w) for h, w in zip(ANALYZE_HEADER, widths)))
    for row in rows:
        print("  " + "  ".join(v.ljust(w) for v, w in zip(row, widths)))
    if any(r[8] for r in rows):
        print(f"  {TABLE2_NOTE}")
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_csv(out_dir / "analyze.csv", ANALYZE_HEADER, rows)
    return 0


# -- simulate ----------------------------------------------------------------

_COMMON_KEYS = {"kind", "out", "seed", "replications"}
_SIM_KEYS = _COMMON_KEYS | {
    "cloud",
    "beta_min",
    "omega_min",
    "s_threshold_ms",
    "mttf_hours",
    "mttr_seconds",
    "group_size",
    "scheme",
    "horizon_s",
    "failure_injection",
    "fls_speed",
    "charger_slots",
    "onset_tolerance_ms",
    "standby_depletes",
    "gc_delay_s",
    "recovery_delay_s",
    "initial_spares",
    "message_latency_ms",
    "heartbeat_period_ms",
    "heartbeat_timeout_ms",
    "max_polls",
    "poll_spacing_ms",
    "dispatcher_positions",
    "charger_positions",
}
_REQUIRED_SIM_KEYS = {"cloud", "beta_min", "omega_min", "s_threshold_ms", "horizon_s"}


@dataclass
class ExperimentConfig:
    """A parsed key=value experiment file."""

    kind: str
    values: dict[str, str]

    @classmethod
    def parse(cls, path: Path) -> "ExperimentConfig":
        values: dict[str, str] = {}
        try:
            text = path.read_text(encoding="ascii")
        except OSError as exc:
            raise CliError(f"cannot read config {path}: {exc}") from exc
        for line_no, line in enumerate(text.split("\n"), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise CliError(f"{path}:{line_no}: expected key=value, got {stripped!r}")
            key, _, value = stripped.partition("=")
            key = key.strip()
            value = value.strip()
            if key in values:
                raise CliError(f"{path}:{line_no}: duplicate key {key!r}")
            values[key] = value
        kind = values.get("kind", "simulate")
        if kind not in ("plan", "analyze", "simulate"):
            raise CliError(f"{path}: unknown experiment kind {kind!r}")
        if kind == "simulate":
            unknown = sorted(set(values) - _SIM_KEYS)
            if unknown:
                raise CliError(f"{path}: unknown keys: {', '.join(unknown)}")
            missing = sorted(_REQUIRED_SIM_KEYS - set(values))
            if missing:
                raise CliError(f"{path}: missing required keys: {', '.join(missing)}")
        return cls(kind=kind, values=values)


def _load_cloud(spec: str) -> PointCloud:
    if spec.startswith("synth:"):
        parts = spec.split(":")
        if len(parts) not in (4, 5):
            raise CliError(f"bad synth cloud spec {spec!r}; want synth:kind:n:extent[:seed]")
        kind, n, extent = parts[1], int(parts[2]), int(parts[3])
        seed = int(parts[4]) if len(parts) == 5 else 0
        return ingest.synth(kind, n, extent, seed)
    return ingest.load(spec)


def _parse_positions(text: str) -> tuple[tuple[float, float, float], ...]:
    out = []
    for chunk in text.split(";"):
        coords = [float(c) for c in chunk.split(",")]
        if len(coords) != 3:
            raise CliError(f"position {chunk!r} is not an x,y,z triple")
        out.append(tuple(coords))
    return tuple(out)


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("1", "on", "true", "yes"):
        return True
    if lowered in ("0", "off", "false", "no"):
        return False
    raise CliError(f"expected a boolean, got {text!r}")


def build_sim_config(exp: ExperimentConfig, seed: int) -> SimConfig:
    v = exp.values
    cloud = _load_cloud(v["cloud"])
    bp = BatteryParams(beta_s=float(v["beta_min"]) * 60.0, omega_s=float(v["omega_min"]) * 60.0)
    reliability = None
    if "group_size" in v:
        if "mttf_hours" not in v or "mttr_seconds" not in v:
            raise CliError("group_size needs mttf_hours and mttr_seconds")
        reliability = ReliabilityParams(
            mttf_hours=float(v["mttf_hours"]),
            mttr_s=float(v["mttr_seconds"]),
            group_size=int(v["group_size"]),
        )
    detector = DetectorParams(
        heartbeat_period_ms=int(v.get("heartbeat_period_ms", 1000)),
        heartbeat_timeout_ms=int(v.get("heartbeat_timeout_ms", 1500)),
        max_polls=int(v.get("max_polls", 3)),
        poll_spacing_ms=int(v.get("poll_spacing_ms", 500)),
    )
    return SimConfig(
        cloud=cloud,
        battery=bp,
        s_threshold_ms=int(v["s_threshold_ms"]),
        reliability=reliability,
        scheme=v.get("scheme", PARITY),
        dispatcher_positions=(
            _parse_positions(v["dispatcher_positions"]) if "dispatcher_positions" in v else None
        ),
        charger_positions=(
            _parse_positions(v["charger_positions"]) if "charger_positions" in v else None
        ),
        charger_slots=int(v["charger_slots"]) if "charger_slots" in v else None,
        fls_speed=float(v["fls_speed"]) if "fls_speed" in v else None,
        detector=detector,
        failure_injection=_parse_bool(v.get("failure_injection", "off")),
        mttf_hours=float(v["mttf_hours"]) if "mttf_hours" in v else None,
        horizon_ms=round(float(v["horizon_s"]) * 1000),
        seed=seed,
        onset_tolerance_ms=int(v.get("onset_tolerance_ms", 100)),
        standby_depletes=_parse_bool(v.get("standby_depletes", "on")),
        gc_delay_ms=round(float(v.get("gc_delay_s", 30)) * 1000),
        recovery_delay_ms=round(float(v.get("recovery_delay_s", 60)) * 1000),
        initial_spares=int(v.get("initial_spares", 0)),
        message_latency_ms=int(v.get("message_latency_ms", 0)),
    )


def metrics_rows(m: SimMetrics) -> list[list[str]]:
    gaps = sorted(m.swap_gap_samples_ms)
    repairs = sorted(m.repair_time_samples_ms)
    rows = [
        ["seed", str(m.seed)],
        ["horizon_ms", str(m.horizon_ms)],
        ["alpha", str(m.alpha)],
        ["flock_count", str(m.flock_count)],
        ["total_deploys", str(m.total_deploys)],
        ["total_swaps", str(m.total_swaps)],
        ["total_failures", str(m.total_failures)],
        ["total_reconstructions", str(m.total_reconstructions)],
        ["reconstruction_mismatches", str(m.reconstruction_mismatches)],
        ["conservation_passed", str(m.conservation_passed)],
        ["conservation_failed", str(m.conservation_failed)],
        ["onset_count", str(len(m.onset_times_ms))],
        ["mtdi_sample_count", str(len(m.empirical_mtdi_samples_ms))],
        ["mean_mtdi_ms", _fmt(m.mean_mtdi_ms) if m.mean_mtdi_ms is not None else ""],
        ["max_transit", str(m.max_transit)],
        ["min_illuminated", str(m.min_illuminated)],
        ["swap_gap_p50_ms", _fmt(_quantile(gaps, 0.5))],
        ["swap_gap_p90_ms", _fmt(_quantile(gaps, 0.9))],
        ["swap_gap_p99_ms", _fmt(_quantile(gaps, 0.99))],
        ["swap_gap_max_ms", str(gaps[-1]) if gaps else ""],
        ["repair_time_mean_ms", _fmt(sum(repairs) / len(repairs)) if repairs else ""],
        ["repair_time_max_ms", str(repairs[-1]) if repairs else ""],
    ]
    return rows


def summary_rows(results: list[SimMetrics]) -> list[list[str]]:
    pooled = []
    for m in results:
        pooled.extend(m.empirical_mtdi_samples_ms)
    pooled.sort()
    gaps = sorted(g for m in results for g in m.swap_gap_samples_ms)
    mean = sum(pooled) / len(pooled) if pooled else None
    stddev = statistics.stdev(pooled) if len(pooled) > 1 else None
    return [
        ["replications", str(len(results))],
        ["onsets_total", str(sum(len(m.onset_times_ms) for m in results))],
        ["mtdi_samples_total", str(len(pooled))],
        ["mtdi_mean_ms", _fmt(mean) if mean is not None else ""],
        ["mtdi_stddev_ms", _fmt(stddev) if stddev is not None else ""],
        ["max_transit", str(max((m.max_transit for m in results), default=0))],
        ["swap_gap_p50_ms", _fmt(_quantile(gaps, 0.5))],
        ["swap_gap_p90_ms", _fmt(_quantile(gaps, 0.9))],
        ["swap_gap_p99_ms", _fmt(_quantile(gaps, 0.99))],
        ["total_failures", str(sum(m.total_failures for m in results))],
        ["conservation_failed", str(sum(m.conservation_failed for m in results))],
    ]


def cmd_simulate(
    config_path: Path,
    seed: int | None,
    replications: int | None,
    out_dir: Path | None,
) -> int:
    exp = ExperimentConfig.parse(config_path)
    if exp.kind != "simulate":
        raise CliError(f"{config_path}: kind={exp.kind!r}; the simulate command needs kind=simulate")
    base_seed = seed if seed is not None else int(exp.values.get("seed", 0))
    reps = replications if replications is not None else int(exp.values.get("replications", 1))
    if reps < 1:
        raise CliError("nothing to run: replications must be >= 1")
    if out_dir is None and "out" in exp.values:
        out_dir = Path(exp.values["out"])
    if out_dir is None:
        raise CliError("simulate needs --out (or out= in the config) for metrics files")

    seeds = [base_seed + i for i in range(reps)]
    results = run_replications(build_sim_config(exp, base_seed), seeds)

    out_dir.mkdir(parents=True, exist_ok=True)
    for m in results:
        _write_csv(out_dir / f"metrics_{m.seed}.csv", ["metric", "value"], metrics_rows(m))
    rows = summary_rows(results)
    _write_csv(out_dir / "summary.csv", ["metric", "value"], rows)
    print(f"simulated {reps} replication(s), seeds {seeds[0]}..{seeds[-1]}")
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print(f"  {name:<{width}}  {value}")
    print(f"metrics written to {out_dir}")
    return 0


# -- shared ---------------------------------------------------------------------


def _fmt(x: float | None) -> str:
    """Deterministic, locale-independent number formatting."""
    if x is None:
        return ""
    if isinstance(x, float) and (math.isnan(x) or math.isinf(x)):
        return "inf" if x > 0 else "-inf"
    if isinstance(x, float) and x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(round(x, 6))


def _quantile(sorted_values, q: float):
    if not sorted_values:
        return None
    index = min(len(sorted_values) - 1, int(q * len(sorted_values)))
    return float(sorted_values[index])


def _round_half_up(frac) -> int:
    from fractions import Fraction

    f = Fraction(frac)
    return (2 * f.numerator + f.denominator) // (2 * f.denominator)


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flsim", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="staggered-charging plan table")
    p_plan.add_argument("--alpha", type=int, help="number of illuminating FLSs")
    p_plan.add_argument("--cloud", help="cloud file or synth:kind:n:extent[:seed]")
    p_plan.add_argument("--beta-min", type=float, required=True, help="flight time, minutes")
    p_plan.add_argument("--omega-min", type=float, required=True, help="full charge time, minutes")
    p_plan.add_argument("--s-threshold-ms", type=int, required=True)
    p_plan.add_argument("--out", type=Path)

    p_an = sub.add_parser("analyze", help="reliability-group MTDI table")
    p_an.add_argument("--alpha", type=int, help="number of illuminating FLSs")
    p_an.add_argument("--cloud", help="cloud file or synth spec (alternative to --alpha)")
    p_an.add_argument("--mttf-hours", type=float, required=True)
    p_an.add_argument("--mttr-seconds", type=float, required=True)
    p_an.add_argument("--group-size", type=int, action="append", default=[])
    p_an.add_argument("--scheme", choices=[PARITY, REPLICATION], default=PARITY)
    p_an.add_argument("--out", type=Path)

    p_sim = sub.add_parser("simulate", help="run a config-driven simulation")
    p_sim.add_argument("config", type=Path)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--replications", type=int)
    p_sim.add_argument("--out", type=Path)
    return parser


def _resolve_alpha(args) -> int:
    if args.alpha is not None and args.cloud is not None:
        raise CliError("give either --alpha or --cloud, not both")
    if args.alpha is not None:
        if args.alpha < 0:
            raise CliError("--alpha must be >= 0")
        return args.alpha
    if args.cloud is not None:
        return _load_cloud(args.cloud).fls_count
    raise CliError("one of --alpha or --cloud is required")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "plan":
            alpha = _resolve_alpha(args)
            bp = BatteryParams(beta_s=args.beta_min * 60.0, omega_s=args.omega_min * 60.0)
            return cmd_plan(alpha, bp, args.s_threshold_ms, args.out)
        if args.command == "analyze":
            alpha = _resolve_alpha(args)
            return cmd_analyze(
                args.mttf_hours, args.mttr_seconds, args.group_size, alpha, args.out
            )
        return cmd_simulate(args.config, args.seed, args.replications, args.out)
    except (ValueError, OSError) as exc:
        print(f"flsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
