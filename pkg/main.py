import argparse
import logging
import sys

from dotenv import load_dotenv

load_dotenv()

from src.cli import commands
from src.policies.policy import PolicyKind
from src.utils.default_config_settings import build_sweep_spec, default_config, load_config_from_file
from src.utils.errors import ConfigurationError
from src.utils.logging_config import setup_logging

logger = logging.getLogger("src.main")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _load(args):
    config = load_config_from_file(args.config) if args.config else default_config()
    update = {}
    if getattr(args, "out", None):
        update["output_dir"] = args.out
    if getattr(args, "seed", None) is not None:
        update["seeds"] = [args.seed]
    if getattr(args, "policy", None):
        update["policy"] = PolicyKind(args.policy)
    return config.model_copy(update=update) if update else config


def _net_gen(args) -> int:
    commands.net_gen(_load(args))
    return EXIT_OK


def _collect(args) -> int:
    config = _load(args)
    if args.seed is not None:
        config = config.model_copy(update={"deepc": config.deepc.model_copy(update={"collection_seed": args.seed})})
    commands.collect(config)
    return EXIT_OK


def _run(args) -> int:
    commands.run(_load(args), fleet_size_override=args.fleet_size, label=args.label, trace=args.trace)
    return EXIT_OK


def _sweep(args) -> int:
    spec = build_sweep_spec(args.param, args.values, _load(args))
    _, failures = commands.sweep(spec)
    return EXIT_RUNTIME if failures else EXIT_OK


def _report(args) -> int:
    commands.report(args.paths, out_dir=args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Hierarchical fleet rebalancing experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", type=str, default=None, help="JSON run configuration")
        p.add_argument("--out", type=str, default=None, help="Output directory")
        if seed:
            p.add_argument("--seed", type=int, default=None, help="Run a single seed instead of the configured list")

    p = sub.add_parser("net-gen", help="Generate or load the network and export nodes, links and regions")
    common(p, seed=False)
    p.set_defaults(handler=_net_gen)

    p = sub.add_parser("collect", help="Collect excitation data with random transfer ratios")
    common(p)
    p.set_defaults(handler=_collect)

    p = sub.add_parser("run", help="Simulate one policy for every configured seed")
    common(p)
    p.add_argument("--policy", type=str, choices=[k.value for k in PolicyKind if k != PolicyKind.RANDOM_COLLECT])
    p.add_argument("--fleet-size", type=int, default=None, help="Override the scenario fleet size")
    p.add_argument("--label", type=str, default=None, help="Free-form label carried into the metrics")
    p.add_argument("--trace", type=str, default=None, help="Replay a request trace instead of sampling demand")
    p.set_defaults(handler=_run)

    p = sub.add_parser("sweep", help="Grid sweep of one parameter across seeds")
    common(p)
    p.add_argument("--policy", type=str, choices=[k.value for k in PolicyKind if k != PolicyKind.RANDOM_COLLECT])
    p.add_argument("--param", type=str, required=True, help="alpha, sigma2, lambda_g, lambda_y, snr_db or fleet_size")
    p.add_argument("--values", type=float, nargs="+", required=True)
    p.set_defaults(handler=_sweep)

    p = sub.add_parser("report", help="Seed-averaged comparison table from metrics files or run directories")
    p.add_argument("paths", nargs="+")
    p.add_argument("--out", type=str, default=None, help="Write report.csv and report.txt here")
    p.set_defaults(handler=_report)
    return parser


def main(argv=None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigurationError as e:
        logger.error(f"❌ Configuration error: {e}")
        return EXIT_CONFIG
    except Exception as e:
        logger.error(f"❌ {type(e).__name__}: {e}", exc_info=True)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
