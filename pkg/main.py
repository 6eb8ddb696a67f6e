"""
Command-line front end

    python main.py simulate --config configs/depolarizing.json --time 1 --epsilon 1e-3
    python main.py verify converge --out converge.csv

Exit codes: 0 ok, 2 config parse failure, 3 invalid arguments, 4 size cap
exceeded, 5 verification failure
"""

import io
import sys
import json
import logging
import argparse
from datetime import datetime

import numpy as np
import pandas as pd

from lindblad_model import CapExceededError
from model_config import ConfigParseError, load_model_config
from pauli_linalg import DensityMatrix
from simulation_engine import error_budget, oracle_cost_report, plan_simulation, run_plan
from simulation_params import get_simulation_params
from time_dependent import plan_timedep, run_timedep
from verification_suites import SUITES, run_suite, suite_passed

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INVALID = 3
EXIT_CAP = 4
EXIT_VERIFY = 5

FLOAT_FORMAT = '%.17g'

SIMULATE_COLUMNS = [
    'config', 'mode', 'T', 'epsilon', 'c0', 'seed', 'r', 'dt', 'taylor_K', 'taylor_err',
    'ham_sub', 'inner_steps', 'eps_H_budget', 'certified_eps_H', 'oracle_calls_A', 'oracle_calls_K',
    'error_bound', 'estimate', 'std_error', 'n_traj', 'prep_count',
]


class UsageError(ValueError):
    """Bad command-line arguments"""


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog='main.py', description="Randomized Lindblad simulation and verification")
    parser.add_argument('--log-level', default='WARNING', help="Logging level (default: WARNING)")
    parser.add_argument('--n-jobs', type=int, default=None, help="joblib workers for trajectory batches")
    sub = parser.add_subparsers(dest='command', required=True)

    sim = sub.add_parser('simulate', help="Simulate a model file")
    sim.add_argument('--config', required=True, help="Model config (JSON)")
    sim.add_argument('--time', type=float, default=1.0, dest='T', help="Total evolution time")
    sim.add_argument('--epsilon', type=float, default=1e-3, help="Target diamond-norm accuracy")
    sim.add_argument('--c0', type=float, default=0.0, help="Dissipator truncation constant")
    sim.add_argument('--mode', choices=['dm', 'traj'], default='dm')
    sim.add_argument('--ntraj', type=int, default=1000, help="Trajectories in traj mode")
    sim.add_argument('--seed', type=int, default=0, help="64-bit master seed")
    sim.add_argument('--json', action='store_true', help="Emit the result record as JSON instead of CSV")
    sim.add_argument('--out', default=None, help="Write the final density matrix (.npy) in dm mode")
    sim.add_argument('--taylor-k', type=int, default=None, help="Fix the truncation order")
    sim.add_argument('--ham-sub', choices=['exact', 'trotter'], default='exact')
    sim.add_argument('--stamp', action='store_true', help="Add a timestamp to JSON output")

    ver = sub.add_parser('verify', help="Run a verification suite")
    ver.add_argument('suite', help=f"One of {', '.join(SUITES)}")
    ver.add_argument('--seed', type=int, default=0)
    ver.add_argument('--instances', type=int, default=None, help="Override the suite's instance count")
    ver.add_argument('--commuting', action='store_true', help="thm3: use the commuting Z-field instance")
    ver.add_argument('--out', default=None, help="CSV path (stdout when omitted)")
    return parser


def _frame_to_csv(frame: pd.DataFrame) -> str:
    buf = io.StringIO()
    frame.to_csv(buf, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return buf.getvalue()


def cmd_simulate(args) -> dict:
    """Plan and run one model; returns the result record"""
    cfg = load_model_config(args.config)
    observable = cfg.observable_matrix()
    common = dict(epsilon=args.epsilon, c0=args.c0, mode=args.mode, n_traj=args.ntraj,
                  observable=observable, master_seed=args.seed, ham_kind=args.ham_sub, taylor_K=args.taylor_k)
    if cfg.is_time_dependent:
        plan = plan_timedep(cfg.hamiltonian_spec(), cfg.timedep_dissipator(), args.T, **common)
        outcome = run_timedep(plan, cfg.initial())
    else:
        plan = plan_simulation(cfg.to_lindblad_spec(), args.T, **common)
        outcome = run_plan(plan, cfg.initial())

    cost = oracle_cost_report(plan)
    record = {
        'config': str(args.config),
        'mode': plan.mode,
        'T': plan.T,
        'epsilon': plan.epsilon,
        'c0': plan.c0,
        'seed': plan.master_seed,
        'r': plan.r,
        'dt': plan.dt,
        'taylor_K': plan.taylor_K,
        'taylor_err': plan.taylor_err,
        'ham_sub': plan.ham_sub.kind,
        'inner_steps': plan.ham_sub.inner_steps,
        'eps_H_budget': plan.eps_H_budget,
        'certified_eps_H': plan.ham_sub.certified_bound,
        'oracle_calls_A': cost['oracle_calls_A'],
        'oracle_calls_K': cost['oracle_calls_K'],
        'error_bound': error_budget(plan)['gadget_error_bound'],
        'estimate': None,
        'std_error': None,
        'n_traj': None,
        'prep_count': None,
    }
    if isinstance(outcome, DensityMatrix):
        if observable is not None:
            record['estimate'] = outcome.expectation(observable)
        if args.out:
            np.save(args.out, outcome.matrix)
            record['final_state'] = str(args.out)
            logger.info(f"Final state written to {args.out}")
    else:
        record.update(estimate=outcome.estimate, std_error=outcome.std_error, n_traj=outcome.n_traj,
                      prep_count=outcome.prep_count)
        if args.out:
            logger.warning("--out only applies to density-matrix mode; ignored")
    record['cost'] = cost
    record['error_budget'] = error_budget(plan)
    if not isinstance(outcome, DensityMatrix):
        record['length_histogram'] = outcome.to_record()['length_histogram']
    return record


def format_simulate(record: dict, as_json: bool, stamp: bool = False) -> str:
    if as_json:
        data = dict(record)
        if stamp:
            data['timestamp'] = datetime.now().isoformat()
        return json.dumps(data, indent=2) + '\n'
    return _frame_to_csv(pd.DataFrame([{k: record.get(k) for k in SIMULATE_COLUMNS}], columns=SIMULATE_COLUMNS))


def cmd_verify(args) -> pd.DataFrame:
    options = {'commuting': True} if args.commuting and args.suite == 'thm3' else {}
    if args.instances is not None and args.instances < 1:
        raise UsageError(f"--instances must be positive, got {args.instances}")
    return run_suite(args.suite, seed=args.seed, instances=args.instances, **options)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID

    level = getattr(logging, str(args.log_level).upper(), None)
    if not isinstance(level, int):
        print(f"error: unknown log level {args.log_level!r}", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=level, stream=sys.stderr,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    if args.n_jobs is not None:
        get_simulation_params().set('n_jobs', args.n_jobs)

    try:
        if args.command == 'simulate':
            record = cmd_simulate(args)
            sys.stdout.write(format_simulate(record, args.json, args.stamp))
            return EXIT_OK

        table = cmd_verify(args)
        text = _frame_to_csv(table)
        if args.out:
            with open(args.out, 'w') as f:
                f.write(text)
            logger.info(f"Wrote {len(table)} rows to {args.out}")
        else:
            sys.stdout.write(text)
        if not suite_passed(table):
            failed = table.loc[~table['pass'], 'instance'].tolist()
            print(f"verification failed: {', '.join(map(str, failed))}", file=sys.stderr)
            return EXIT_VERIFY
        return EXIT_OK
    except ConfigParseError as e:
        logger.error(f"Config parse failure: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except CapExceededError as e:
        logger.error(f"Size cap exceeded: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CAP
    except ValueError as e:
        logger.error(f"Invalid parameters: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == '__main__':
    sys.exit(main())
