import argparse
import json
import logging
import os
from dataclasses import replace

from driftsquint import envsim, harness, verify
from driftsquint.errors import DriftSquintError
from driftsquint.util import mkdirp, resolve

log = logging.getLogger(__name__)


def config_from_args(args):
    if args.config:
        config = harness.read_config(args.config)
        if args.algo:
            config = replace(config, algorithm=args.algo)
        if args.T:
            config = replace(config, env=replace(config.env, horizon=args.T))
        if args.seed is not None:
            config = harness.with_seed(config, args.seed)
    else:
        env = envsim.scenario(args.scenario, args.K, args.T or 256, args.seed or 0)
        config = harness.ExperimentConfig(args.algo or "squint-ce-uniform", env)
    if args.out:
        config = replace(config, out=args.out)
    if getattr(args, "intervals", None):
        config = replace(config, intervals=args.intervals)
    return config


def cmd_run(args):
    config = config_from_args(args)
    record = harness.run(config)
    mkdirp(config.out)
    harness.write_config(config, resolve("config.json", config.out))
    harness.write_csv(record, resolve("run.csv", config.out))
    print("wrote %d rounds to %s" % (record.horizon, resolve("run.csv", config.out)))
    return 0


def cmd_bounds(args):
    config = config_from_args(args)
    record = harness.run(config)
    report = harness.evaluate_bounds(record)
    mkdirp(config.out)
    harness.write_config(config, resolve("config.json", config.out))
    harness.write_csv(record, resolve("run.csv", config.out))
    harness.write_csv(report, resolve("bounds.csv", config.out))
    print(report.summary().to_string())
    print("smallest asserted slack: %.6g" % report.min_slack)
    violations = report.violations()
    if not violations.empty:
        print(violations.head(20).to_string())
        return 1
    return 0


def cmd_compare(args):
    algorithms = args.algos.split(",")
    configs = []
    for algorithm in algorithms:
        for seed in range(args.seed or 0, (args.seed or 0) + args.seeds):
            env = envsim.scenario(args.scenario, args.K, args.T or 256, seed)
            configs.append(harness.ExperimentConfig(algorithm, env, out=args.out or "out"))
    records = harness.run_many(configs)
    table = harness.compare(records, args.intervals)
    path = resolve("comparison.csv", args.out or "out")
    harness.write_csv(table, path)
    full = table.loc[(1, configs[0].horizon)]
    print(full.to_string())
    print("wrote %d intervals to %s" % (len(table), path))
    return 0


def cmd_verify(args):
    results = verify.verify(args.suite, args.runs, args.seed or 0)
    failed = False
    for result in results:
        status = "ok" if result.ok else ("advisory" if result.advisory else "FAILED")
        print(
            "%-18s %-8s %9d checks %4d failures %7.1fs"
            % (result.name, status, result.checks, len(result.failures), result.seconds)
        )
        failed = failed or (not result.ok and not result.advisory)
    return 1 if failed else 0


def cmd_scenarios(args):
    specs = envsim.builtin_scenarios(args.K, args.T or 256, args.seed or 0)
    print(json.dumps([envsim.spec_to_dict(spec) for spec in specs], indent=2))
    return 0


def _experiment_flags(parser):
    parser.add_argument("--config", help="experiment config JSON")
    parser.add_argument("--algo", choices=harness.ALGORITHMS)
    parser.add_argument("--scenario", default="single-switch")
    parser.add_argument("--K", type=int, default=4, help="number of experts")
    parser.add_argument("--T", type=int, help="horizon")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="driftsquint", description="Expert-advice learners for changing environments"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run one experiment and write its trace")
    _experiment_flags(run)
    run.set_defaults(func=cmd_run)

    bounds = commands.add_parser("bounds", help="run and check every applicable bound")
    _experiment_flags(bounds)
    bounds.add_argument("--intervals", help="exhaustive, dyadic or sampled:<n>")
    bounds.set_defaults(func=cmd_bounds)

    compare = commands.add_parser("compare", help="seed-averaged interval regret")
    compare.add_argument("--algos", default="squint,squint-ce-uniform,cbce+squint")
    compare.add_argument("--scenario", default="single-switch")
    compare.add_argument("--K", type=int, default=4)
    compare.add_argument("--T", type=int)
    compare.add_argument("--seed", type=int)
    compare.add_argument("--seeds", type=int, default=20)
    compare.add_argument("--intervals", help="exhaustive, dyadic or sampled:<n>")
    compare.add_argument("--out")
    compare.set_defaults(func=cmd_compare)

    check = commands.add_parser("verify", help="run the invariant suites")
    check.add_argument("--suite", action="append", choices=sorted(verify.SUITES))
    check.add_argument("--runs", type=int, help="runs per suite")
    check.add_argument("--seed", type=int)
    check.set_defaults(func=cmd_verify)

    scenarios = commands.add_parser("scenarios", help="print the preset environments")
    scenarios.add_argument("--K", type=int, default=4)
    scenarios.add_argument("--T", type=int)
    scenarios.add_argument("--seed", type=int)
    scenarios.set_defaults(func=cmd_scenarios)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except DriftSquintError as error:
        log.error("%s", error)
        return 2
    except OSError as error:
        log.error("%s: %s", getattr(error, "filename", None) or os.getcwd(), error.strerror)
        return 2
