# -*- coding: utf-8 -*-

# gradflow: continuous-time proportional-integral distributed optimization
#   (c) 2026-present : gradflow developers

import argparse
import logging
import sys
import gradflow.experiment.experiment_utils as exp
from gradflow.experiment.verify_utils import faults, verify
from gradflow.simulation.simulation_utils import DivergenceError
from gradflow.utils.utilities import default_output_root

logger = logging.getLogger(__name__)

exit_success = 0
exit_validation = 1
exit_divergence = 2
exit_verify_failure = 3


def _agent_list(text):
    try:
        return [int(item) for item in text.split(',') if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError('agents should be a comma-separated list of indices, got ' + repr(text))


def build_parser():
    parser = argparse.ArgumentParser(
        prog='gradflow',
        description='Continuous-time P, I and PI distributed optimization experiments.',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  gradflow run --scenario line3_pi.json
  gradflow table table1 --workers 4
  gradflow table table2 --dt 0.05 --horizon 10000
  gradflow verify
  gradflow plotdata gradflow_output/line3-pi-0123456789/trajectory.csv --variable 1 --agents 0,2

The output root defaults to '%s', the environment variable GRADFLOW_OUT overrides it.
""" % default_output_root)
    parser.add_argument('-v', '--verbose', action='store_true', help='print debugging messages')
    commands = parser.add_subparsers(dest='command', required=True)

    run_parser = commands.add_parser('run', help='simulate a scenario and save its outputs')
    run_parser.add_argument('--scenario', required=True, help='path of the scenario JSON file')
    run_parser.add_argument('--out', help='output root directory')

    table_parser = commands.add_parser('table', help='reproduce a comparison table of P, I and PI')
    table_parser.add_argument('name', choices=sorted(exp.table_settings))
    table_parser.add_argument('--dt', type=float, help='time step, defaults to the table setting')
    table_parser.add_argument('--horizon', type=float, help='final time, defaults to the table setting')
    table_parser.add_argument('--workers', type=int, default=4, help='number of worker processes (default: 4)')
    table_parser.add_argument('--out', help='output root directory')

    verify_parser = commands.add_parser('verify', help='run the verification suite')
    verify_parser.add_argument('--fault', choices=faults, help='inject a fault, the matching check should fail')

    plot_parser = commands.add_parser('plotdata', help='convert a trajectory into a long-format CSV')
    plot_parser.add_argument('file', help='path of trajectory.csv, with its manifest.json next to it')
    plot_parser.add_argument('--variable', type=int, help='variable to select, all variables by default')
    plot_parser.add_argument('--agents', type=_agent_list, help='comma-separated agents, all trackers by default')
    plot_parser.add_argument('--output', help='path of the output CSV')
    return parser


def main(argv=None):
    """
    Command-line entry point.

    :param argv: list of arguments, sys.argv[1:] by default
    :return: the exit code, 0 on success, 1 for invalid input, 2 for a divergent integration and 3 when a
     verification check fails
    """
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as err:
        # argparse exits with 2 on usage errors, which is the divergence code here
        return exit_validation if err.code else exit_success
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        if args.command == 'run':
            result, destination = exp.run(args.scenario, out=args.out, verbose=args.verbose)
            logger.info('run %s finished (%s), outputs in %s', result.scenario.run_id, result.trajectory.reason,
                        destination)
            worst = result.metrics.worst
            logger.info('worst case: M_p %.2f%%, t_10 %.2f, t_1 %.2f, error %.2f%%', worst['overshoot_pct'],
                        worst['settle10'], worst['settle1'], worst['error_pct'])
        elif args.command == 'table':
            text, _, destination = exp.table(args.name, dt=args.dt, horizon=args.horizon, workers=args.workers,
                                             out=args.out, verbose=args.verbose)
            print(text)
            logger.info('table saved in %s', destination)
        elif args.command == 'verify':
            passed, results = verify(fault=args.fault)
            if not passed:
                logger.error('failed checks: %s', ', '.join(result.name for result in results if not result.passed))
                return exit_verify_failure
        else:
            output, nb_series = exp.plotdata(args.file, variable=args.variable, agents=args.agents,
                                             output=args.output)
            logger.info('%d series written to %s', nb_series, output)
    except DivergenceError as err:
        logger.error('%s', err)
        return exit_divergence
    except ValueError as err:
        logger.error('invalid input: %s', err)
        return exit_validation
    except OSError as err:
        logger.error('%s', err)
        return exit_validation
    return exit_success


if __name__ == '__main__':
    sys.exit(main())
