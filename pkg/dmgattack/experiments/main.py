# -*- coding: utf-8 -*-
#
# main.py
#

"""
Command-line interface of the evasion testbed.

Every subcommand reads a YAML parameter file (the defaults when omitted) and
applies flag overrides on top of it. Exit codes: 0 on success, 2 for a
configuration error and 3 when a trial stage fails.

Example:

    python -m dmgattack.experiments.main eval \
        --config dmgattack/experiments/parameter_files/default.yaml \
        --trials 10 --output results/default

"""

import os
import sys
import logging
import argparse

from dataclasses import replace

from ..dmg.dnslog import LogParseError, read_dns_log, write_dns_log
from ..dmg.graph import build_dmg, homogeneous_projection
from ..models.checkpoints import save_checkpoint, write_query_dataset
from ..models.query import QueryBudgetLedger, collect_query_dataset
from ..models.surrogate import train_surrogate
from ..models.target import label_vector, train_target
from ..synth.generator import generate_dns_log, read_labels, write_labels
from . import metrics, trial
from .config import ConfigError, config_from_dict, apply_overrides, load_config
from .utils import ioutil


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3

SWEEPS = ('roc', 'neighbors', 'share', 'cost')

# Flag destination -> dotted config key.
OVERRIDES = {
    'alpha': 'attack.alpha',
    'beta': 'attack.beta',
    'kf': 'attack.k_f',
    'ke': 'attack.k_e',
    'eps': 'attack.per_node_eps',
    'editable': 'attack.editable',
    'kinds': 'attack.kinds',
    'neighbor_weight': 'attack.neighbor_weight',
    'mode': 'attack.mode',
    'exhaust_budget': 'attack.exhaust_budget',
    'max_nodes': 'attack.max_nodes',
    'seed': 'synth.seed',
    'adversary_mode': 'adversary.mode',
    'size': 'adversary.size',
    'defense': 'defense.enabled',
    'trials': 'trials.n_trials',
    'n_jobs': 'trials.n_jobs',
}


def _parent_parser() -> argparse.ArgumentParser:

    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('--config', type=str, help='YAML parameter file')
    parser.add_argument('--output', type=str, default='.', help='Output directory')
    parser.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    parser.add_argument('-q', '--quiet', action='store_true', help='Warnings only')

    attack = parser.add_argument_group('overrides')
    attack.add_argument('--alpha', type=float, help='Self-term weight')
    attack.add_argument('--beta', type=float, help='Neighbor-term weight')
    attack.add_argument('--kf', type=float, help='Feature budget (total L2)')
    attack.add_argument('--ke', type=int, help='Edge flip budget')
    attack.add_argument('--eps', type=float, help='Per-node feature budget')
    attack.add_argument('--editable', type=int, nargs='+', help='Editable feature indices')
    attack.add_argument('--kinds', type=str, nargs='+', help='Editable edge kinds')
    attack.add_argument('--neighbor-weight', type=str, choices=('inv_degree', 'degree'))
    attack.add_argument('--mode', type=str, choices=('features', 'edges', 'joint'))
    attack.add_argument('--exhaust-budget', action='store_true', default=None,
                        help='Spend the whole edge budget')
    attack.add_argument('--max-nodes', type=int, help='Attacked-node limit')
    attack.add_argument('--seed', type=int, help='Synthetic log seed')
    attack.add_argument('--adversary-mode', type=str, choices=('sampled', 'created'))
    attack.add_argument('--size', type=int, help='Adversary size')
    attack.add_argument('--defense', type=str, nargs='+',
                        help='Defenses to enable: iforest, jaccard or none')
    attack.add_argument('--trials', type=int, help='Number of trials')
    attack.add_argument('--n-jobs', type=int, help='Parallel trials')
    return parser


def build_parser() -> argparse.ArgumentParser:

    parent = _parent_parser()
    parser = argparse.ArgumentParser(
        prog='dmgattack',
        description='Multi-instance evasion attacks on graph-based malicious domain detection',
    )
    commands = parser.add_subparsers(dest='command', required=True)

    commands.add_parser('synth', parents=[parent], help='Generate a labeled DNS log')

    graph = commands.add_parser('build-graph', parents=[parent], help='Build the DMG of a log')
    graph.add_argument('--log', type=str, required=True, help='DNS log file')

    train = commands.add_parser('train', parents=[parent],
                                help='Train the target and its surrogate')
    train.add_argument('--log', type=str, help='DNS log file, synthesized when omitted')
    train.add_argument('--labels', type=str, help='Label CSV of the log')

    for name, text in (('attack', 'Attack one trial and store the plan'),
                       ('defend', 'Attack one trial against the enabled defenses')):
        command = commands.add_parser(name, parents=[parent], help=text)
        command.add_argument('--index', type=int, default=0, help='Trial index')

    commands.add_parser('eval', parents=[parent], help='Run and summarize all trials')

    sweep = commands.add_parser('sweep', parents=[parent], help='Run a parameter sweep')
    sweep.add_argument('--kind', type=str, choices=SWEEPS, required=True)
    sweep.add_argument('--grid', type=float, nargs='+',
                       help='Attacked counts, adversary shares or adversary sizes')
    return parser


def _configure_logging(args) -> None:

    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(
        level=level, format='%(asctime)s %(name)s %(levelname)s: %(message)s'
    )


def resolve_config(args):
    """The parameter file, or the defaults, with flag overrides applied.

    A lone --alpha or --beta sets the other weight to its complement.
    """
    overrides = {
        key: getattr(args, dest) for dest, key in OVERRIDES.items()
        if getattr(args, dest, None) is not None
    }
    if 'attack.alpha' in overrides and 'attack.beta' not in overrides:
        overrides['attack.beta'] = 1.0 - overrides['attack.alpha']
    elif 'attack.beta' in overrides and 'attack.alpha' not in overrides:
        overrides['attack.alpha'] = 1.0 - overrides['attack.beta']

    if args.config is None:
        return apply_overrides(config_from_dict({}), overrides)
    return load_config(args.config, overrides)


def _synth(config, args) -> None:

    records, labels = generate_dns_log(config.synth)
    write_dns_log(os.path.join(args.output, 'dns.log'), records)
    write_labels(os.path.join(args.output, 'labels.csv'), labels)
    logger.info('Wrote %d records of %d domains to %s', len(records), len(labels), args.output)


def _build_graph(config, args) -> None:

    dmg = build_dmg(
        read_dns_log(args.log), config.graph.similarity_threshold, config.graph.ngram_n
    )
    with open(os.path.join(args.output, 'graph.json'), 'w') as outfile:
        outfile.write(dmg.to_json())
    logger.info('Wrote graph of %d nodes and %d edges', dmg.num_nodes, len(dmg.edges))


def _train(config, args) -> None:

    seeds = trial.trial_seeds(config, 0)
    if args.log is None:
        records, labels = generate_dns_log(replace(config.synth, seed=seeds.synth))
    else:
        if args.labels is None:
            raise ConfigError('--labels is required with --log')
        records, labels = read_dns_log(args.log), read_labels(args.labels)

    graph = config.graph
    dmg = build_dmg(records, graph.similarity_threshold, graph.ngram_n)
    target = train_target(
        homogeneous_projection(dmg), label_vector(dmg, labels),
        config.models.target, seeds.target,
    )

    surrogate_records, _ = generate_dns_log(
        replace(config.synth, seed=seeds.surrogate_log)
    )
    surrogate_projection = homogeneous_projection(
        build_dmg(surrogate_records, graph.similarity_threshold, graph.ngram_n)
    )
    ledger = QueryBudgetLedger(config.models.max_queries)
    queries = collect_query_dataset(target, surrogate_projection, ledger, seed=seeds.queries)
    surrogate = train_surrogate(
        queries, surrogate_projection, config.models.surrogate, seeds.queries
    )

    save_checkpoint(os.path.join(args.output, 'target.json'), target)
    save_checkpoint(os.path.join(args.output, 'surrogate.json'), surrogate)
    write_query_dataset(os.path.join(args.output, 'queries.csv'), queries)
    write_dns_log(os.path.join(args.output, 'surrogate.log'), surrogate_records)


def _attack(config, args, defend: bool) -> None:

    context = trial.prepare_trial(config, args.index)
    crafted = trial.plan_trial_attack(context)
    defense = config.defense if defend else replace(config.defense, enabled=())
    report = trial.attack_trial(context, defense=defense, crafted=crafted)

    if not defend:
        with open(os.path.join(args.output, 'plan.json'), 'w') as outfile:
            outfile.write(crafted.plan.to_json())
        write_dns_log(os.path.join(args.output, 'mutated.log'), crafted.mutated)
    ioutil.write_report(os.path.join(args.output, 'report.json'), report)


def _eval(config, args) -> int:

    reports = trial.run_trials(config, args.output, verbose=int(args.verbose))
    failed = [report for report in reports if report['status'] != 'ok']
    for report in failed:
        logger.error(
            'Trial %d failed at stage %s: %s',
            report['trial_index'], report['stage'], report['error'],
        )
    return EXIT_STAGE if len(failed) == len(reports) else EXIT_OK


def _sweep(config, args) -> None:

    if args.kind != 'neighbors' and not args.grid:
        raise ConfigError(f'--grid is required for the {args.kind} sweep')

    if args.kind == 'roc':
        table = trial.roc_sweep(config, [int(value) for value in args.grid])
        logger.info(
            'Success ratio trend over attacked count: %.3f',
            metrics.trend(table['attacked_count'], table['success_ratio']),
        )
    elif args.kind == 'neighbors':
        table = trial.neighbor_impact(config)
    elif args.kind == 'share':
        table = trial.adversary_share_sweep(config, args.grid)
    else:
        table = trial.cost_scaling(config, [int(value) for value in args.grid])

    ioutil.write_final_results(os.path.join(args.output, f'sweep_{args.kind}.csv'), table)


def main(argv=None) -> int:

    args = build_parser().parse_args(argv)
    _configure_logging(args)

    try:
        config = resolve_config(args)
        os.makedirs(args.output, exist_ok=True)

        if args.command == 'synth':
            _synth(config, args)
        elif args.command == 'build-graph':
            _build_graph(config, args)
        elif args.command == 'train':
            _train(config, args)
        elif args.command in ('attack', 'defend'):
            _attack(config, args, defend=args.command == 'defend')
        elif args.command == 'eval':
            return _eval(config, args)
        else:
            _sweep(config, args)
    except ConfigError as error:
        logger.error('Configuration error: %s', error)
        return EXIT_CONFIG
    except (LogParseError, OSError) as error:
        logger.error('Cannot read input: %s', error)
        return EXIT_CONFIG
    except trial.StageError as error:
        logger.error('Stage %s failed: %s', error.stage, error.message)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
