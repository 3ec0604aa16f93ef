"""Command-line experiment runner.

Subcommands:

* ``simulate``  -- run seeded replications from a JSON config and write
  the estimator report (plus optional trace / delay CSVs);
* ``sweep``     -- scan rate2 over a grid and emit the phase-boundary CSV;
* ``burst``     -- burst-conditioned simulation against the fluid constants;
* ``fluid``     -- fluid trajectory constants only (no simulation);
* ``region``    -- analytic stability / delay-stability verdict;
* ``mg1``       -- single-server workload growth bench.

Exit codes: 0 success, 2 configuration error, 3 runtime error.  Errors
are reported as a JSON object on stdout so callers can parse them.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import arrivals as arr
from . import kernels
from .config import parse_config
from .core import run_steps
from .errors import ConfigurationError, DomainError
from .experiment import default_threads, run_experiment
from .fluid import compare_to_simulation, fluid_burst
from .mg1 import fit_scaling, simulate_workload
from .region import classify
from .report import dumps_canonical, write_csv, write_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _emit(obj) -> None:
    sys.stdout.write(dumps_canonical(obj) + "\n")


def _load_config(args):
    try:
        raw = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {args.config}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {args.config} is not valid JSON: {exc}")
    if getattr(args, "seed", None) is not None:
        raw["master_seed"] = args.seed
    if getattr(args, "horizon", None) is not None:
        raw["horizon"] = args.horizon
    return parse_config(raw)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_trace_csv(config, rep: int, path: Path) -> None:
    n = config.sched.num_queues
    header = (
        ["slot"]
        + [f"a{i + 1}" for i in range(n)]
        + ["sched_idx"]
        + [f"s{i + 1}" for i in range(n)]
        + [f"q{i + 1}" for i in range(n)]
    )
    if kernels.supports(config.arrivals, config.sched):
        trace = kernels.run_fast(
            config.arrivals, config.sched, config.horizon, config.master_seed,
            replication=rep, initial_lengths=config.initial_lengths,
            record_flows=True,
        )
        rows = (
            [t] + list(trace.arrivals[t]) + [int(trace.sched[t])]
            + list(trace.served[t]) + list(trace.lengths[t + 1])
            for t in range(config.horizon)
        )
    else:
        rows = (
            [rec.slot] + list(rec.arrivals) + [rec.schedule_index]
            + list(rec.served) + list(rec.post_lengths)
            for rec in run_steps(
                config.arrivals, config.sched, config.horizon,
                config.master_seed, rep, config.initial_lengths,
            )
        )
    write_csv(path, header, rows)


def cmd_simulate(args) -> int:
    config = _load_config(args)
    out = _outdir(args)
    result = run_experiment(config, threads=args.threads)
    write_json(out / "report.json", result.to_json())
    if config.write_delay_csv:
        q = config.probes.track_delay_queue
        for s in result.summaries:
            rows = (
                [q + 1, k, int(a), int(sz), int(d)]
                for k, (a, sz, d) in enumerate(
                    zip(s.file_arrival_slot, s.file_size, s.file_delay)
                )
            )
            write_csv(out / f"delay_rep{s.rep}.csv",
                      ["queue", "k", "arrival_slot", "size", "delay"], rows)
    if config.write_trace_csv:
        for rep in range(config.replications):
            _write_trace_csv(config, rep, out / f"trace_rep{rep}.csv")
    _emit({"report": str(out / "report.json"), "config_digest": config.digest()})
    return EXIT_OK


_EMPIRICAL_NAME = {
    "finite": "delay_stable",
    "diverging": "delay_unstable",
    "inconclusive": "inconclusive",
}


def cmd_sweep(args) -> int:
    config = _load_config(args)
    out = _outdir(args)
    grid = [float(x) for x in args.lambda2]
    header = ["lambda2", "analytic_verdict", "empirical_verdict",
              "drift", "drift_ci_lo", "drift_ci_hi"]
    rows = []
    base = config.to_json()
    for l2 in grid:
        point = json.loads(json.dumps(base))
        lam = list(config.rates)
        lam[1] = l2
        try:
            analytic = classify(lam).queue_verdicts[1]
        except DomainError:
            analytic = "invalid"
        try:
            spec1 = config.arrivals[1]
            shape = {"s": spec1.params[1]} if spec1.law == "bernoulli_zeta" else {}
            point["arrivals"][1] = arr.calibrate_rate(l2, spec1.law, **shape).to_json()
            result = run_experiment(parse_config(point), threads=args.threads)
        except (ConfigurationError, DomainError):
            rows.append([l2, analytic, "invalid", float("nan"),
                         float("nan"), float("nan")])
            continue
        empirical = _EMPIRICAL_NAME[result.queue_divergence[1]]
        d = result.drift
        nan = float("nan")
        rows.append([
            l2, analytic, empirical,
            nan if d.estimate is None else d.estimate,
            nan if d.ci_lo is None else d.ci_lo,
            nan if d.ci_hi is None else d.ci_hi,
        ])
    write_csv(out / "sweep.csv", header, rows)
    _emit({"sweep": str(out / "sweep.csv"), "points": len(rows)})
    return EXIT_OK


def _parse_lambda(values):
    lam = [float(x) for x in values]
    if len(lam) != 3:
        raise ConfigurationError(f"expected 3 rates, got {len(lam)}")
    return lam


def cmd_burst(args) -> int:
    lam = _parse_lambda(args.rates)
    out = _outdir(args)
    seeds = [args.seed + i for i in range(args.seeds)]
    comparison = compare_to_simulation(lam, args.burst, seeds, heavy_s=args.s)
    write_json(out / "burst.json", comparison.to_json())
    rows = [
        [s, t1, e1, mu[1], e2, qb]
        for s, t1, e1, mu, e2, qb in zip(
            comparison.seeds, comparison.t1_hat, comparison.t1_rel_err,
            comparison.mu_hat, comparison.mu2_abs_err, comparison.q2_peak_over_b,
        )
    ]
    write_csv(out / "burst.csv",
              ["seed", "t1_hat", "t1_rel_err", "mu2_hat", "mu2_abs_err",
               "q2_peak_over_b"], rows)
    _emit(comparison.to_json())
    return EXIT_OK


def cmd_fluid(args) -> int:
    lam = _parse_lambda(args.rates)
    traj = fluid_burst(lam, args.burst)
    if args.out is not None:
        write_json(_outdir(args) / "fluid.json", traj.to_json())
    _emit(traj.to_json())
    return EXIT_OK


def cmd_region(args) -> int:
    lam = _parse_lambda(args.rates)
    verdict = classify(lam)
    if args.out is not None:
        write_json(_outdir(args) / "region.json", verdict.to_json())
    _emit(verdict.to_json())
    return EXIT_OK


def cmd_mg1(args) -> int:
    service = arr.calibrate_rate(args.service_mean, args.service_family,
                                 **({"s": args.s} if args.service_family == "bernoulli_zeta" else {}))
    trace = simulate_workload(
        args.arrival_p, service, args.horizon, args.replications, args.seed,
    )
    report = fit_scaling(trace, args.gamma)
    if args.out is not None:
        out = _outdir(args)
        write_json(out / "mg1.json", report.to_json())
        rows = zip(trace.slots, trace.mean_w, trace.stderr,
                   [trace.replications] * len(trace.slots))
        write_csv(out / "mg1.csv", ["t", "mean_W", "stderr", "replications"], rows)
    _emit({"trace": trace.to_json(), "scaling": report.to_json()})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mwlab",
        description="Max-Weight switched-queue simulation and analysis toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON experiment config")
            p.add_argument("--seed", type=int, default=None,
                           help="override the config master seed")
            p.add_argument("--horizon", type=int, default=None,
                           help="override the config horizon")
        p.add_argument("--out", default=None if not config else "out",
                       help="output directory")
        p.add_argument("--threads", type=int, default=default_threads(),
                       help="replication parallelism")

    p = sub.add_parser("simulate", help="run replications from a config file")
    add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="scan rate2 over a grid")
    add_common(p)
    p.add_argument("--lambda2", nargs="*", default=[], help="grid of rate2 values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("burst", help="burst simulation vs fluid constants")
    p.add_argument("--rates", nargs=3, required=True, metavar="RATE")
    p.add_argument("--burst", type=int, default=10_000)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--seed", type=int, default=0, help="first seed of the range")
    p.add_argument("--s", type=float, default=2.5, help="heavy-tail shape for queue 1")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_burst)

    p = sub.add_parser("fluid", help="fluid trajectory constants")
    p.add_argument("--rates", nargs=3, required=True, metavar="RATE")
    p.add_argument("--burst", type=float, default=10_000.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_fluid)

    p = sub.add_parser("region", help="analytic stability verdict")
    p.add_argument("--rates", nargs=3, required=True, metavar="RATE")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("mg1", help="single-server workload growth bench")
    p.add_argument("--arrival-p", type=float, default=0.2)
    p.add_argument("--service-family", default="bernoulli_zeta")
    p.add_argument("--service-mean", type=float, default=1.0)
    p.add_argument("--s", type=float, default=2.5)
    p.add_argument("--gamma", type=float, default=0.45)
    p.add_argument("--horizon", type=int, default=10_000_000)
    p.add_argument("--replications", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_mg1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DomainError) as exc:
        _emit({"error": "config", "message": str(exc)})
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - boundary of the process
        _emit({"error": "runtime", "message": f"{type(exc).__name__}: {exc}"})
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
