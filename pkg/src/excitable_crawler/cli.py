"""Command-line front end: ``excitable-crawler {simulate,sweep,scales,selfcheck}``.

Exit codes: 0 success, 1 selfcheck failure, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .analysis import (
    LimitCycleSummary,
    NoLimitCycleError,
    detect_limit_cycle,
    displacement_speed,
    hysteresis_loop,
    segment_phases,
    switching_points,
)
from .config import ConfigError, OutputOptions, RunConfig, load_run_config, load_sweep_spec
from .integrate import Event, IntegrationError, Trajectory, simulate
from .scales import characteristic_scales, split_timescales

EXIT_OK = 0
EXIT_SELFCHECK = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

TRAJECTORY_COLUMNS = ("t", "V", "v_com", "s", "v_s", "u_com")
EVENT_COLUMNS = ("t", "kind", "V", "v_com", "s", "v_s")
SWEEP_METRICS = ("status", "period", "mean_speed", "strain_amplitude")
FLOAT_FMT = "%.17g"


def bundled_config_path() -> Path:
    """Path of the packaged reference configuration."""
    return Path(str(resources.files("excitable_crawler") / "data" / "fig2.toml"))


@dataclass
class RunResult:
    config: RunConfig
    trajectory: Trajectory
    events: list
    summary: dict
    cycle: LimitCycleSummary | None

    @property
    def status(self) -> str:
        return self.summary["status"]


def _fmt(x) -> str:
    return FLOAT_FMT % x


def run_simulation(cfg: RunConfig) -> RunResult:
    """Integrate and analyse one configuration.

    Raises :class:`IntegrationError` on solver failure. A missing limit cycle
    is reported in the summary status, not raised.
    """
    traj, events = simulate(cfg.groups, cfg.initial_state, (cfg.t0, cfg.t1), cfg.integrator)
    opts = cfg.analysis
    cycle = None
    status, message = "ok", ""
    if opts.limit_cycle:
        try:
            cycle = detect_limit_cycle(
                traj,
                cfg.groups,
                transient_crossings=opts.transient_crossings,
                v_rate_threshold=opts.v_rate_threshold,
            )
        except NoLimitCycleError as exc:
            status, message = "no-limit-cycle", str(exc)

    if cycle is not None:
        mean_speed, speed_source = cycle.mean_speed, "limit-cycle"
    else:
        mean_speed, speed_source = displacement_speed(traj), "displacement"

    kinds = sorted({ev.kind for ev in events})
    summary = {
        "status": status,
        "message": message,
        "mean_speed": mean_speed,
        "mean_speed_source": speed_source,
        "limit_cycle": cycle.as_dict() if cycle is not None else None,
        "switching_points": switching_points(cfg.groups).as_dict(),
        "integration": {
            "n_samples": len(traj),
            "n_steps": traj.n_steps,
            "n_rejected": traj.n_rejected,
            "h_accepted_min": traj.h_accepted_min,
            "final_state": [float(v) for v in traj.states[-1]],
            "final_u_com": float(traj.u_com[-1]),
        },
        "event_counts": {k: sum(ev.kind == k for ev in events) for k in kinds},
    }
    if opts.phases:
        summary["phases"] = [
            {"kind": seg.kind, "t_start": seg.t_start, "t_end": seg.t_end}
            for seg in segment_phases(traj, cfg.groups, opts.v_rate_threshold)
        ]
    if cfg.dimensional is not None:
        sc = characteristic_scales(cfg.dimensional, cfg.kappa)
        summary["scales"] = {**sc.__dict__, "v_star": sc.v_star}
    summary["config"] = cfg.resolved()
    return RunResult(cfg, traj, events, summary, cycle)


# -- serialization ---------------------------------------------------------

def write_trajectory_csv(path, traj: Trajectory, stride: int = 1) -> None:
    idx = np.arange(0, len(traj), stride)
    if idx[-1] != len(traj) - 1:
        idx = np.append(idx, len(traj) - 1)
    u = traj.u_com if traj.u_com is not None else np.zeros(len(traj))
    data = np.column_stack([traj.times[idx], traj.states[idx], u[idx]])
    np.savetxt(path, data, fmt=FLOAT_FMT, delimiter=",", header=",".join(TRAJECTORY_COLUMNS), comments="")


def write_events_csv(path, events: list[Event]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_COLUMNS)
        for ev in events:
            w.writerow([_fmt(ev.time), ev.kind, *(_fmt(v) for v in ev.state[:4])])


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, allow_nan=True)
        fh.write("\n")


def write_plots(out_dir: Path, result: RunResult) -> list[Path]:
    """SVG line plots of the trajectory and, with a cycle, the (s, V) loop."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed ids and no date stamp keep the files byte-identical across runs
    matplotlib.rcParams["svg.hashsalt"] = "excitable-crawler"
    meta = {"Date": None, "Creator": None}
    traj = result.trajectory
    written = []

    fig, axes = plt.subplots(4, 1, sharex=True, figsize=(7, 8))
    columns = [(traj.states[:, 0], "V"), (traj.states[:, 2], "s"), (traj.states[:, 1], "v_com"), (traj.u_com, "u_com")]
    for ax, (y, label) in zip(axes, columns):
        ax.plot(traj.times, y, lw=0.8)
        ax.set_ylabel(label)
    axes[-1].set_xlabel("t")
    fig.tight_layout()
    path = out_dir / "trajectory.svg"
    fig.savefig(path, format="svg", metadata=meta)
    plt.close(fig)
    written.append(path)

    if result.cycle is not None:
        s, V = hysteresis_loop(traj, result.cycle)
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot(s, V, lw=0.8)
        ax.set_xlabel("s")
        ax.set_ylabel("V")
        fig.tight_layout()
        path = out_dir / "hysteresis.svg"
        fig.savefig(path, format="svg", metadata=meta)
        plt.close(fig)
        written.append(path)
    return written


def _prepare_out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"[output].directory: cannot create {out}: {exc.strerror}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"[output].directory: {out} is not writable")
    return out


def write_run_outputs(result: RunResult, out_dir) -> list[Path]:
    out = _prepare_out_dir(out_dir)
    opts: OutputOptions = result.config.output
    write_trajectory_csv(out / "trajectory.csv", result.trajectory, opts.trajectory_stride)
    write_events_csv(out / "events.csv", result.events)
    write_json(out / "summary.json", result.summary)
    written = [out / "trajectory.csv", out / "events.csv", out / "summary.json"]
    if opts.plots:
        written += write_plots(out, result)
    return written


# -- commands --------------------------------------------------------------

def _load(args) -> RunConfig:
    path = args.config if args.config is not None else bundled_config_path()
    cfg = load_run_config(path)
    if args.out is not None:
        cfg = replace(cfg, output=replace(cfg.output, directory=args.out))
    return cfg


def _say(args, *lines) -> None:
    if not args.quiet:
        for line in lines:
            print(line)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    _prepare_out_dir(cfg.output.directory)
    try:
        result = run_simulation(cfg)
    except IntegrationError as exc:
        print(f"error: integration failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    written = write_run_outputs(result, cfg.output.directory)

    lines = [f"status: {result.status}"]
    if result.cycle is not None:
        c = result.cycle
        lines += [
            f"period: {c.period:.10g} (spread {c.period_spread:.2e} over {c.n_cycles_used} cycles)",
            f"strain amplitude: {c.strain_amplitude:.6g}",
            f"jump |V|: {c.v_jump_start:.6g} -> {c.v_jump_end:.6g}",
            f"com advance per cycle: {c.com_advance_per_cycle:.6g}",
        ]
    elif result.summary["message"]:
        lines.append(f"note: {result.summary['message']}")
    lines.append(f"mean speed: {result.summary['mean_speed']:.6g} ({result.summary['mean_speed_source']})")
    lines += [f"wrote {p}" for p in written]
    _say(args, *lines)

    if result.status != "ok" and cfg.analysis.require_limit_cycle:
        print(f"error: {result.summary['message']}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _sweep_row(cfg: RunConfig) -> dict:
    try:
        result = run_simulation(cfg)
    except IntegrationError as exc:
        return {"status": type(exc).__name__, "period": float("nan"), "mean_speed": float("nan"),
                "strain_amplitude": float("nan")}
    except ValueError as exc:  # invalid group values at this grid point
        return {"status": f"invalid: {exc}", "period": float("nan"), "mean_speed": float("nan"),
                "strain_amplitude": float("nan")}
    cycle = result.cycle
    return {
        "status": result.status,
        "period": cycle.period if cycle else float("nan"),
        "mean_speed": result.summary["mean_speed"],
        "strain_amplitude": cycle.strain_amplitude if cycle else float(np.abs(result.trajectory.states[:, 2]).max()),
    }


def run_sweep(spec, parallelism: int | None = None) -> tuple[list[dict], list[dict]]:
    """Run every grid point; returns ``(points, rows)`` in grid order."""
    points = spec.grid()

    def task(point):
        try:
            cfg = spec.base.with_groups(**point)
        except ValueError as exc:
            return {"status": f"invalid: {exc}", "period": float("nan"), "mean_speed": float("nan"),
                    "strain_amplitude": float("nan")}
        return _sweep_row(cfg)

    workers = parallelism or spec.parallelism
    if workers == 1:
        rows = [task(p) for p in points]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(task, points))  # map keeps grid order
    return points, rows


def write_sweep_csv(path, spec, points, rows) -> None:
    names = [a.name for a in spec.axes]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + list(SWEEP_METRICS))
        for point, row in zip(points, rows):
            w.writerow([_fmt(point[n]) for n in names] + [row["status"]] + [_fmt(row[k]) for k in SWEEP_METRICS[1:]])


def cmd_sweep(args) -> int:
    if args.config is None:
        raise ConfigError("sweep needs --config <sweep file>")
    spec = load_sweep_spec(args.config)
    out_dir = args.out if args.out is not None else spec.base.output.directory
    out = _prepare_out_dir(out_dir)
    points, rows = run_sweep(spec, args.parallelism)
    write_sweep_csv(out / "sweep.csv", spec, points, rows)

    names = [a.name for a in spec.axes]
    lines = ["  ".join(names + list(SWEEP_METRICS))]
    for point, row in zip(points, rows):
        vals = [f"{point[n]:.6g}" for n in names] + [row["status"]]
        vals += [f"{row[k]:.6g}" for k in SWEEP_METRICS[1:]]
        lines.append("  ".join(vals))
    lines.append(f"wrote {out / 'sweep.csv'}")
    _say(args, *lines)
    return EXIT_OK if any(r["status"] == "ok" for r in rows) else EXIT_NUMERICAL


def cmd_scales(args) -> int:
    cfg = _load(args)
    if cfg.dimensional is None:
        raise ConfigError("scales needs a [dimensional] section in the config")
    sc = characteristic_scales(cfg.dimensional, cfg.kappa)
    g = cfg.groups
    eg = split_timescales(g)
    sp = switching_points(g)
    lines = ["characteristic scales:"]
    lines += [
        f"  l*    = {sc.l_star:.10g} m",
        f"  m*    = {sc.m_star:.10g} kg",
        f"  t*    = {sc.t_star:.10g} s",
        f"  V*    = {sc.V_star:.10g} V",
        f"  v*    = {sc.v_star:.10g} m/s",
        f"  kappa = {sc.kappa:.10g}",
        "dimensionless groups:",
    ]
    lines += [f"  {name:<7} = {value!r}" for name, value in g.as_dict().items()]
    lines += [
        "epsilon-scaled groups:",
        f"  pi_c_eps = {eg.pi_c_eps!r}",
        f"  pi_l_eps = {eg.pi_l_eps!r}",
        f"  pi_s_eps = {eg.pi_s_eps!r}",
        "switching points:",
        f"  V_minus  = {sp.V_minus!r}",
        f"  V_plus   = {sp.V_plus!r}",
        f"  s_switch = {sp.s_switch!r}",
    ]
    # scales is a report, so --quiet does not suppress it
    print("\n".join(lines))
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    from .selfcheck import run_selfcheck

    results = run_selfcheck()
    for r in results:
        _say(args, f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    n_fail = sum(not r.passed for r in results)
    _say(args, f"{len(results) - n_fail}/{len(results)} checks passed")
    return EXIT_OK if n_fail == 0 else EXIT_SELFCHECK


def _global_flags(parser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="TOML run or sweep file (default: bundled fig2.toml)")
    parser.add_argument("--out", default=default, help="output directory, overrides [output].directory")
    parser.add_argument(
        "--quiet", action="store_true", default=argparse.SUPPRESS if suppress else False, help="no summary on stdout"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="excitable-crawler", description="Simulate and analyse the excitable soft crawler."
    )
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    # subcommands accept the global flags too, so their position is free
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)

    p = sub.add_parser("simulate", parents=[common], help="run one simulation and write CSV/JSON outputs")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("sweep", parents=[common], help="sweep one or two groups over a grid")
    p.add_argument("--parallelism", type=int, default=None, help="override [sweep].parallelism")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("scales", parents=[common], help="print scales and groups for dimensional params")
    p.set_defaults(func=cmd_scales)
    p = sub.add_parser("selfcheck", parents=[common], help="run the built-in oracle suite")
    p.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "parallelism", None) is not None and args.parallelism < 1:
        print("error: --parallelism must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
