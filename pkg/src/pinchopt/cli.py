"""Command-line interface: ``pinchopt <command> [options]``.

Exit status is 0 on success, 1 on a configuration error and 2 when a
self-check fails.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from typing import List, Optional, Sequence

import numpy as np

from pinchopt import bench, checks
from pinchopt.bench import ConfigError, ExperimentSpec
from pinchopt.fp_solver import solve
from pinchopt.projection import GROUP_PROJECTIONS, InfeasibleGroupError

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON experiment document")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--trials", type=int)
    common.add_argument("--schemes", help="comma-separated subset of FP,CUP,UPCS,RPCS")
    common.add_argument("--dmin", help="minimum antenna spacing in metres, or lambda/2")
    common.add_argument("--out", help="output path (directory for convergence)")
    common.add_argument("--projection", choices=sorted(GROUP_PROJECTIONS))
    common.add_argument("--threads", type=int)
    common.add_argument("--users", type=_int_list, help="K, or a comma-separated list")
    common.add_argument("--waveguides", type=_int_list, help="N, or a comma-separated list")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="pinchopt", description="Pinching-antenna placement solver and benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("solve", parents=[common], help="optimize one scenario, print a JSON report")
    p = sub.add_parser("benchmark", parents=[common], help="Monte-Carlo sweep, CSV output")
    p.add_argument("--aggregates", help="path for the per-point mean/standard-error table")
    sub.add_parser("convergence", parents=[common], help="per-outer-iteration rate traces")
    p = sub.add_parser("gradcheck", parents=[common], help="analytic gradient vs finite differences")
    p.add_argument("--instances", type=int, default=20)
    p = sub.add_parser("project", parents=[common], help="project coordinates onto one waveguide")
    p.add_argument("values", nargs="*", type=float, help="coordinates (read JSON list from stdin if omitted)")
    p.add_argument("--xmax", type=float)
    sub.add_parser("selftest", parents=[common], help="run the invariant suites")
    return parser


def load_spec(args) -> ExperimentSpec:
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        spec = ExperimentSpec.from_dict(data)
    else:
        spec = ExperimentSpec()
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        spec.seed = args.seed
    if args.trials is not None:
        spec.trials = args.trials
    if args.schemes:
        spec.schemes = [s.strip().upper() for s in args.schemes.split(",") if s.strip()]
    if args.dmin is not None:
        spec.dmins = [args.dmin]
    if args.out is not None:
        spec.out = args.out
    if args.projection:
        spec.settings = dataclasses.replace(spec.settings, projection=args.projection)
    if args.threads is not None:
        spec.threads = args.threads
    if args.users:
        spec.ks = args.users
    if args.waveguides:
        spec.ns = args.waveguides
    spec.validate()
    return spec


def _write(text: str, path: Optional[str]) -> None:
    if path and path != "-":
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    spec = load_spec(args)
    dmin = bench.resolve_dmin(spec.dmins[0], spec.config)
    config = spec.config.replace(num_waveguides=spec.ns[0], min_spacing=dmin)
    seed = bench.trial_seed(spec.seed, 0)
    scenario = bench.generate_scenario(config, spec.ks[0], seed)
    report = solve(config, scenario, spec.settings, spec.init_mode, rng=bench.stream(seed, 2))
    doc = {"config": config.to_dict(), "settings": dataclasses.asdict(spec.settings),
           "seed": spec.seed, "users": scenario.users.tolist(), **report.to_dict()}
    _write(bench.dump_json(doc) + "\n", spec.out)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    spec = load_spec(args)
    if args.aggregates:
        spec.aggregates_out = args.aggregates
    result = bench.run_experiment(spec)
    if not spec.out:
        sys.stdout.write(result.csv_text())
    if spec.out:
        meta = {"spec": spec.to_dict(),
                "d_min_values": [bench.resolve_dmin(d, spec.config) for d in spec.dmins],
                "wavelength": spec.config.wavelength,
                "skipped": result.skipped, "failures": result.failures}
        _write(bench.dump_json(meta) + "\n", spec.out + ".meta.json")
    for a in result.aggregates:
        print(f"{a['scheme']:>4} N={a['N']} K={a['K']} d_min={a['d_min']:.6g}: "
              f"R={a['mean_rate']:.5f} +/- {a['stderr']:.5f} ({a['trials']} trials)", file=sys.stderr)
    return EXIT_OK


def cmd_convergence(args) -> int:
    spec = load_spec(args)
    if args.dmin is None and not args.config:
        spec.dmins = [bench.HALF_WAVELENGTH, 0.1, 0.2]
    out_dir = spec.out or "."
    os.makedirs(out_dir, exist_ok=True)
    dmins = [bench.resolve_dmin(d, spec.config) for d in spec.dmins]
    config = spec.config.replace(num_waveguides=spec.ns[0])
    run = bench.convergence_traces(config, spec.ks[0], dmins, spec.trials, spec.seed,
                                   spec.settings, spec.init_mode)
    traces = run.traces
    for label, d in zip(spec.dmins, dmins):
        name = "lambda2" if isinstance(label, str) and "/" in label else f"{d:g}"
        path = os.path.join(out_dir, f"convergence_dmin_{name}.csv")
        _write(bench.traces_csv_text(d, traces[d]), path)
        mean = traces[d].mean(axis=0)
        print(f"d_min={d:.6g}: " + " ".join(f"{r:.5f}" for r in mean), file=sys.stderr)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    seed = 0 if args.seed is None else args.seed
    if args.instances < 1:
        raise ConfigError("instances must be >= 1")
    err = checks.gradcheck(seed, args.instances)
    print(f"max relative error {err:.3e} over {args.instances} instances")
    return EXIT_OK if err < checks.GRADCHECK_TOL else EXIT_CHECK


def cmd_project(args) -> int:
    spec = load_spec(args)
    values = args.values
    if not values:
        try:
            values = json.load(sys.stdin)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"expected a JSON list on stdin: {exc}") from exc
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size == 0 or not np.all(np.isfinite(values)):
        raise ConfigError("coordinates must be a non-empty list of finite numbers")
    x_max = spec.config.waveguide_length if args.xmax is None else args.xmax
    dmin = bench.resolve_dmin(spec.dmins[0], spec.config)
    try:
        out = GROUP_PROJECTIONS[spec.settings.projection](values, x_max, dmin)
    except InfeasibleGroupError as exc:
        raise ConfigError(str(exc)) from exc
    _write(json.dumps([float(bench.fmt(v)) for v in out]) + "\n", spec.out)
    return EXIT_OK


def cmd_selftest(args) -> int:
    seed = 0 if args.seed is None else args.seed
    ok = True
    for name, passed, detail in checks.selftest(seed):
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        ok &= passed
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {
    "solve": cmd_solve,
    "benchmark": cmd_benchmark,
    "convergence": cmd_convergence,
    "gradcheck": cmd_gradcheck,
    "project": cmd_project,
    "selftest": cmd_selftest,
}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(cli_main())
