"""Command-line pipeline: datasets in, plot-ready JSON/CSV out.

Subcommands:
  mixing    analytic mixing-step prediction for a dimension
  analyze   pairwise merge times, cascade JSON, per-pair series CSV
  windows   analyze + convergence detection -> guidance windows + eta
  converge  normality report over a forward sweep
  simulate  synthetic Gaussian mixture to a dataset file
  probe     linear-probe accuracy through the forward chain (CSV)
  cf        empirical characteristic-function distance of two datasets
  tvcheck   moment-TV bound report for two grid densities

Every JSON payload embeds the config echo, tool version, and seed;
re-running a config reproduces outputs byte-identically (no timestamps).
Exit codes: 0 ok, 2 usage, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .convergence import RandomProjections, convergence_step, empirical_cf_distance, moment_tv_check
from .data import (
    LabeledDataset,
    SyntheticSpec,
    load_dataset,
    partition_by_label,
    save_dataset,
    synth_gaussian_mixture,
)
from .errors import DataError, DomainError, NumericError, VpmergeError
from .forward import SeedPolicy, sweep
from .merger import (
    build_cascade,
    detect_series,
    guidance_windows,
    interpolation_schedule,
    pairwise_merge_times,
)
from .probe import probe_through_time
from .schedule import NoiseSchedule, predict_mixing_step

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _schedule_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beta0", type=float, default=1e-4)
    p.add_argument("--betaT", type=float, default=0.02)
    p.add_argument("--T", type=int, default=1000, help="horizon step count")


def _steps_list(spec: str, horizon: int) -> list:
    """A step count means an even subsample of [0, T] including endpoints."""
    if "," in spec:
        return sorted({int(s) for s in spec.split(",")})
    count = int(spec)
    if count < 1:
        raise DomainError("step count must be >= 1")
    if count == 1:
        return [0]
    return sorted({int(round(i * horizon / (count - 1))) for i in range(count)})


def _emit_json(payload: dict, args, out_path=None) -> None:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    doc = {"config": config, "version": __version__,
           "seed": getattr(args, "seed", None)}
    doc.update(payload)
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_mixing(args) -> int:
    sched = NoiseSchedule(beta0=args.beta0, betaT=args.betaT, horizon_T=args.T)
    pred = predict_mixing_step(sched, args.dim)
    _emit_json({
        "schedule": sched.to_dict(),
        "dim": pred.dim,
        "t_mix_steps": pred.t_mix_steps,
        "t_mix_fraction": pred.t_mix_fraction,
    }, args, args.out)
    return EXIT_OK


def _analysis_inputs(args):
    ds = load_dataset(args.input)
    sched = NoiseSchedule(beta0=args.beta0, betaT=args.betaT, horizon_T=args.T)
    steps = _steps_list(args.steps, sched.horizon_T)
    sw = sweep(ds, sched, steps, SeedPolicy(base_seed=args.seed))
    part = partition_by_label(ds)
    eps = None if args.epsilon == "auto" else float(args.epsilon)
    metric = {"top-eigen": "top_eigen_abs", "trace": "trace_l1"}[args.metric]
    return ds, sched, sw, part, eps, metric


def _series_csv(path, sw, part, n, eps, metric, mode) -> None:
    with open(path, "w") as fh:
        fh.write("pair_a,pair_b,step,value\n")
        k = part.n_events
        for i in range(k):
            for j in range(i + 1, k):
                series = detect_series(sw, part.events[i], part.events[j],
                                       n=n, epsilon=eps, metric=metric, mode=mode)
                for t, v in zip(series.steps, series.values):
                    fh.write(f"{i},{j},{t},{float(v)!r}\n")


def _cmd_analyze(args) -> int:
    ds, sched, sw, part, eps, metric = _analysis_inputs(args)
    mt = pairwise_merge_times(sw, part, n=args.order, epsilon=eps,
                              metric=metric, mode=args.mode)
    cascade = build_cascade(mt)
    payload = {
        "schedule": sched.to_dict(),
        "classes": part.n_events,
        "merge_times": mt.tolist(),
        "cascade": cascade.to_dict(),
    }
    _emit_json(payload, args, args.out)
    if args.series_out:
        _series_csv(args.series_out, sw, part, args.order, eps, metric, args.mode)
    return EXIT_OK


def _cmd_windows(args) -> int:
    ds, sched, sw, part, eps, metric = _analysis_inputs(args)
    mt = pairwise_merge_times(sw, part, n=args.order, epsilon=eps,
                              metric=metric, mode=args.mode)
    report = convergence_step(
        sw, alpha=args.alpha,
        views=RandomProjections(count=args.projections, seed=args.seed)
        if args.projections else "coordinates",
    )
    wins = guidance_windows(mt, report.detected_step, sched.horizon_T)
    eta = interpolation_schedule(sched, args.eta_scale)
    payload = {
        "schedule": sched.to_dict(),
        "istar": report.detected_step,
        "classes": [w.to_dict() for w in wins],
        "eta_schedule": {"scale": eta.scale, "eta": eta.eta.tolist(),
                         "warning": eta.warning},
    }
    _emit_json(payload, args, args.out)
    return EXIT_OK


def _cmd_converge(args) -> int:
    ds = load_dataset(args.input)
    sched = NoiseSchedule(beta0=args.beta0, betaT=args.betaT, horizon_T=args.T)
    steps = _steps_list(args.steps, sched.horizon_T)
    sw = sweep(ds, sched, steps, SeedPolicy(base_seed=args.seed))
    report = convergence_step(
        sw, alpha=args.alpha,
        views=RandomProjections(count=args.projections, seed=args.seed)
        if args.projections else "coordinates",
    )
    _emit_json(report.to_dict(), args, args.out)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    spectra = []
    for chunk in args.spectra.split("/"):
        vals = [float(v) for v in chunk.split(",")]
        if len(vals) < args.dim:
            vals = vals + [vals[-1]] * (args.dim - len(vals))
        spectra.append(sorted(vals[: args.dim], reverse=True))
    k = len(spectra)
    if args.means:
        means = [[float(v) for v in chunk.split(",")] for chunk in args.means.split("/")]
        if len(means) != k or any(len(m) != args.dim for m in means):
            raise DomainError("--means must give one length-d vector per class")
    else:
        means = [[0.0] * args.dim for _ in range(k)]
    spec = SyntheticSpec(
        means=np.array(means), spectra=np.array(spectra),
        samples_per_class=(args.n_per_class,) * k,
    )
    ds = synth_gaussian_mixture(spec, seed=args.seed)
    save_dataset(ds, args.out)
    return EXIT_OK


def _cmd_probe(args) -> int:
    ds = load_dataset(args.input)
    sched = NoiseSchedule(beta0=args.beta0, betaT=args.betaT, horizon_T=args.T)
    steps = _steps_list(args.steps, sched.horizon_T)
    sw = sweep(ds, sched, steps, SeedPolicy(base_seed=args.seed))
    part = partition_by_label(ds)
    a, b = part.events[args.class_a], part.events[args.class_b]
    if args.merge_step == "auto":
        series = detect_series(sw, a, b, n=2)
        merge_step = series.first_merge_step
    else:
        merge_step = int(args.merge_step)
    result = probe_through_time(sw, a, b, merge_step, split=args.split,
                                seed=args.seed)
    with open(args.out, "w") as fh:
        fh.write("step,accuracy,defined\n")
        for t, acc, ok in zip(result.steps, result.accuracies, result.defined):
            fh.write(f"{t},{float(acc)!r},{int(ok)}\n")
    return EXIT_OK


def _cmd_cf(args) -> int:
    a = load_dataset(args.input_a)
    b = load_dataset(args.input_b)
    res = empirical_cf_distance(a, b, freq_count=args.freqs,
                                freq_scale=args.scale, seed=args.seed)
    _emit_json({
        "delta": res.delta, "freq_count": res.freq_count,
        "freq_scale": res.freq_scale,
    }, args, args.out)
    return EXIT_OK


def _cmd_tvcheck(args) -> int:
    rows = []
    with open(args.input) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise DataError(f"row {lineno}: expected x,p,q")
            rows.append([float(v) for v in parts])
    if not rows:
        raise DataError(f"{args.input} contains no density rows")
    arr = np.array(rows)
    report = moment_tv_check(arr[:, 1], arr[:, 2], arr[:, 0],
                             n=args.order, c0=args.c0)
    _emit_json({
        "d_tv": report.d_tv, "moment_bound": report.moment_bound,
        "second_moment_bound": report.second_moment_bound,
        "constant": report.constant, "bound_value": report.bound_value,
        "holds": report.holds,
    }, args, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vpmerge",
        description="Merger analysis for VP diffusion forward processes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mixing", help="analytic mixing-step prediction")
    p.add_argument("--dim", type=int, required=True)
    _schedule_args(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_mixing, seed=0)

    for name, fn in (("analyze", _cmd_analyze), ("windows", _cmd_windows)):
        p = sub.add_parser(name)
        p.add_argument("--input", required=True)
        _schedule_args(p)
        p.add_argument("--steps", default="101",
                       help="step count (even subsample) or comma list")
        p.add_argument("--order", type=int, default=2, choices=(1, 2))
        p.add_argument("--metric", default="top-eigen", choices=("top-eigen", "trace"))
        p.add_argument("--epsilon", default="auto")
        p.add_argument("--mode", default="analytic", choices=("analytic", "empirical"))
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None)
        if name == "analyze":
            p.add_argument("--series-out", default=None)
        else:
            p.add_argument("--alpha", type=float, default=0.05)
            p.add_argument("--projections", type=int, default=64)
            p.add_argument("--eta-scale", type=float, default=1e-3)
        p.set_defaults(func=fn)

    p = sub.add_parser("converge", help="normality report over a sweep")
    p.add_argument("--input", required=True)
    _schedule_args(p)
    p.add_argument("--steps", default="101")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--projections", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("simulate", help="synthetic Gaussian mixture to file")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--spectra", required=True,
                   help="per-class comma lists joined by '/'; short lists pad")
    p.add_argument("--means", default=None)
    p.add_argument("--n-per-class", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("probe", help="linear-probe accuracy through time")
    p.add_argument("--input", required=True)
    _schedule_args(p)
    p.add_argument("--steps", default="21")
    p.add_argument("--class-a", type=int, default=0)
    p.add_argument("--class-b", type=int, default=1)
    p.add_argument("--merge-step", default="auto")
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_probe)

    p = sub.add_parser("cf", help="empirical CF distance of two datasets")
    p.add_argument("--input-a", required=True)
    p.add_argument("--input-b", required=True)
    p.add_argument("--freqs", type=int, default=64)
    p.add_argument("--scale", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_cf)

    p = sub.add_parser("tvcheck", help="moment-TV bound for grid densities")
    p.add_argument("--input", required=True, help="CSV with x,p,q columns")
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--c0", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_tvcheck, seed=0)
    return parser


def execute(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except DomainError as exc:
        _error_record("domain", exc)
        return EXIT_USAGE
    except DataError as exc:
        _error_record("data", exc)
        return EXIT_DATA
    except NumericError as exc:
        _error_record("numeric", exc)
        return EXIT_NUMERIC
    except VpmergeError as exc:
        _error_record("error", exc)
        return EXIT_DATA


def _error_record(kind: str, exc: Exception) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc)}) + "\n")


def main() -> None:
    sys.exit(execute(sys.argv[1:]))


if __name__ == "__main__":
    main()
