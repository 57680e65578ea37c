# main.py
import argparse
import logging
import sys
from dataclasses import replace

from thermopepo.cli import cmd_anneal, cmd_exact_ising, cmd_ising_bench, cmd_oracle, cmd_scan
from thermopepo.config import RunConfig, load_run_config
from thermopepo.exceptions import ThermoPepoError, UsageError
from thermopepo.logger import setup_logging

COMMANDS = ('anneal', 'scan', 'ising-bench', 'exact-ising', 'oracle')


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='thermopepo', description="Thermal states of 2D lattice models with annealed PEPOs.")
    parser.add_argument('command', choices=COMMANDS)
    parser.add_argument('--config', help="KEY=VALUE run document (see README)")
    parser.add_argument('--out', help="results CSV path (overrides OUTPUT)")
    parser.add_argument('--workers', type=int, help="parallel scan workers (overrides WORKERS)")
    parser.add_argument('--seed', type=int, help="RNG seed for the oracle's random checks")
    parser.add_argument('--resume', help="snapshot .npz to continue an anneal from")
    parser.add_argument('--log-level', help="DEBUG, INFO, WARNING or ERROR")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    run_config = load_run_config(args.config) if args.config else RunConfig().validate()
    overrides = {}
    if args.out is not None:
        overrides['output'] = args.out
    if args.workers is not None:
        if args.workers < 1:
            raise UsageError(f"--workers must be >= 1, got {args.workers}")
        overrides['workers'] = args.workers
    if args.seed is not None:
        overrides['seed'] = args.seed
    return replace(run_config, **overrides) if overrides else run_config


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        run_config = resolve_config(args)
        if args.resume and args.command != 'anneal':
            raise UsageError("--resume only applies to the anneal command")
        logging.info(f"Starting {args.command} for model {run_config.model}")
        if args.command == 'anneal':
            cmd_anneal(run_config, resume=args.resume)
        elif args.command == 'scan':
            cmd_scan(run_config)
        elif args.command == 'ising-bench':
            _, summary = cmd_ising_bench(run_config)
            print(f"max_abs_err={summary['max_abs_err']:.6g} max_rel_err={summary['max_rel_err']:.6g} "
                  f"points={summary['points']} excluded={summary['excluded']}")
        elif args.command == 'exact-ising':
            cmd_exact_ising(run_config)
        else:
            cmd_oracle(run_config)
    except ThermoPepoError as e:
        logging.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logging.error(f"Unexpected failure: {e}", exc_info=True)
        return 2
    logging.info(f"{args.command} complete.")
    return 0


if __name__ == "__main__":
    sys.exit(run())
