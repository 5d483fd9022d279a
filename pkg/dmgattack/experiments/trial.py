# -*- coding: utf-8 -*-
#
# trial.py
#

"""
End-to-end attack trials and the sweeps built on them.

A trial generates a DNS log, trains the target on its graph, trains the
surrogate from target queries on an independent log, crafts the attack on
the adversary's domains, lets the defender re-ingest the mutated log and
compares the verdicts before and after. Trial reports are stored in a
temporary directory as they complete, so an aborted run re-enters from the
finished trials; the directory is removed once the summary is written.
"""

import os
import logging
import threading

from contextlib import contextmanager
from dataclasses import replace
from datetime import datetime
from typing import Dict, List, NamedTuple, Sequence, Tuple

import numpy as np
import pandas as pd
import psutil

from joblib import Parallel, delayed

from ..attack.features import FeatureBudget
from ..attack.plan import AttackPlan, craft_attack, verify_closed_loop
from ..defense.outliers import flag_outliers, iforest_fit, outlier_feature_rows
from ..defense.purification import jaccard_purify
from ..dmg.dnslog import DnsLogRecord
from ..dmg.graph import Dmg, HomogeneousProjection, build_dmg, homogeneous_projection
from ..models.query import (
    QueryBudgetLedger,
    collect_query_dataset,
    detector_verdicts,
)
from ..models.surrogate import SurrogateModel, train_surrogate
from ..models.target import TargetModel, label_vector, train_target
from ..synth.adversary import AdversarySubgraph, create_adversary, sample_adversary
from ..synth.generator import MALICIOUS, generate_dns_log
from . import metrics
from .config import AttackConfig, DefenseConfig, TrialConfig, config_hash
from .utils import ioutil


logger = logging.getLogger(__name__)

# Time limit for each trial to complete.
TIMEOUT = int(1e5)

TMP_TRIAL_DIR = 'tmp_trials'

# Report fields that differ between otherwise identical runs.
TIMING_FIELDS = (
    'prep_seconds', 'optimization_seconds', 'prep_rss_mb', 'optimization_rss_mb',
)


class StageError(RuntimeError):
    """A trial stage failed."""

    def __init__(self, stage: str, message: str):

        super().__init__(f'{stage}: {message}')
        self.stage = stage
        self.message = message


@contextmanager
def _stage(name: str):

    try:
        yield
    except StageError:
        raise
    except Exception as error:
        logger.error('Stage %s failed', name, exc_info=True)
        raise StageError(name, f'{type(error).__name__}: {error}') from error


class PhaseTimer:
    """Wall-clock seconds and peak resident memory (MB) of a phase.

    Resident memory is sampled from a background thread every `interval`
    seconds while the phase runs, and at its start and end.
    """

    def __init__(self, interval: float = 0.05):
        self.interval = interval

    def __enter__(self):

        self.seconds = float('nan')
        self.rss_mb = float('nan')
        self._peak = _rss_mb()
        self._done = threading.Event()
        self._sampler = threading.Thread(target=self._sample, daemon=True)
        self._start = datetime.now()
        self._sampler.start()
        return self

    def __exit__(self, *exc_info):

        self.seconds = (datetime.now() - self._start).total_seconds()
        self._done.set()
        self._sampler.join()
        self.rss_mb = max(self._peak, _rss_mb())
        return False

    def _sample(self):

        while not self._done.wait(self.interval):
            self._peak = max(self._peak, _rss_mb())


def _rss_mb() -> float:
    return psutil.Process(os.getpid()).memory_info().rss / 2 ** 20


class TrialSeeds(NamedTuple):

    synth: int
    surrogate_log: int
    target: int
    queries: int
    adversary: int
    attack: int
    defense: int


def trial_seeds(config: TrialConfig, index: int) -> TrialSeeds:
    """Independent stage seeds derived from the config seeds and trial index."""

    sequence = np.random.SeedSequence(
        [config.synth.seed, config.trials.seed_base, index]
    )
    state = sequence.generate_state(len(TrialSeeds._fields))
    return TrialSeeds(*(int(value) for value in state))


class TrialContext(NamedTuple):
    """Everything up to the verdicts before the attack."""

    config: TrialConfig
    index: int
    seeds: TrialSeeds
    records: List[DnsLogRecord]
    labels: Dict[str, str]
    dmg: Dmg
    projection: HomogeneousProjection
    subgraph: AdversarySubgraph
    target: TargetModel
    surrogate: SurrogateModel
    queries_used: int
    verdicts_before: np.ndarray
    prep_seconds: float
    prep_rss_mb: float


def prepare_trial(config: TrialConfig, index: int) -> TrialContext:
    """Data, models, adversary and verdicts before the attack.

    Raises:
        StageError: A stage failed.

    """
    seeds = trial_seeds(config, index)
    graph = config.graph

    with _stage('synth'):
        records, labels = generate_dns_log(replace(config.synth, seed=seeds.synth))

    with _stage('graph'):
        dmg = build_dmg(records, graph.similarity_threshold, graph.ngram_n)

    exclude: Tuple[int, ...] = ()
    if config.adversary.mode == 'sampled':
        with _stage('adversary'):
            subgraph = sample_adversary(
                dmg, labels, config.adversary.size, seeds.adversary
            )
            exclude = subgraph.node_ids

    with _stage('target'):
        target = train_target(
            homogeneous_projection(dmg), label_vector(dmg, labels),
            config.models.target, seeds.target, exclude=exclude,
        )

    if config.adversary.mode == 'created':
        with _stage('adversary'):
            created = create_adversary(
                dmg, records, config.adversary.size, seeds.adversary,
                num_ips=config.adversary.num_ips,
                group_size=config.adversary.group_size,
            )
            records = list(records) + created.records
            dmg = created.dmg
            subgraph = created.subgraph
            labels = dict(labels)
            labels.update((name, MALICIOUS) for name in subgraph.names)

    with PhaseTimer() as prep, _stage('surrogate'):
        surrogate_records, _ = generate_dns_log(
            replace(config.synth, seed=seeds.surrogate_log)
        )
        surrogate_projection = homogeneous_projection(build_dmg(
            surrogate_records, graph.similarity_threshold, graph.ngram_n
        ))
        ledger = QueryBudgetLedger(config.models.max_queries)
        queries = collect_query_dataset(
            target, surrogate_projection, ledger, seed=seeds.queries
        )
        surrogate = train_surrogate(
            queries, surrogate_projection, config.models.surrogate, seeds.queries
        )

    with _stage('verdicts'):
        projection = homogeneous_projection(dmg)
        verdicts_before = detector_verdicts(target, projection, subgraph.node_ids)

    logger.info(
        'Trial %d prepared: %d adversary domains, %d detected before',
        index, subgraph.size, int(verdicts_before.sum()),
    )
    return TrialContext(
        config=config,
        index=index,
        seeds=seeds,
        records=records,
        labels=labels,
        dmg=dmg,
        projection=projection,
        subgraph=subgraph,
        target=target,
        surrogate=surrogate,
        queries_used=ledger.used,
        verdicts_before=np.array(verdicts_before),
        prep_seconds=prep.seconds,
        prep_rss_mb=prep.rss_mb,
    )


def _neighbor_flips(context: TrialContext, dmg_after: Dmg,
                    projection_after: HomogeneousProjection
                    ) -> List[Tuple[int, int]]:
    """Per adversary domain, its directly connected non-adversary domains
    with a benign verdict and how many of them are malicious after the
    attack."""

    dmg = context.dmg
    num_domains = len(dmg.domain_ids)
    benign_before = ~detector_verdicts(
        context.target, context.projection, dmg.domain_ids
    )
    adversary = set(context.subgraph.node_ids)

    flips = []
    for node in context.subgraph.node_ids:
        neighbors = [
            other for other in dmg.neighbors(node)
            if other < num_domains and other not in adversary and benign_before[other]
        ]
        if not neighbors:
            flips.append((0, 0))
            continue
        after_ids = [dmg_after.node_id('domain', dmg.name_of(other)) for other in neighbors]
        flipped = detector_verdicts(context.target, projection_after, after_ids)
        flips.append((len(neighbors), int(flipped.sum())))
    return flips


class CraftedAttack(NamedTuple):

    plan: AttackPlan
    mutated: List[DnsLogRecord]
    budget: FeatureBudget
    seconds: float
    rss_mb: float


def plan_trial_attack(context: TrialContext, attack: AttackConfig = None
                      ) -> CraftedAttack:
    """Craft and realize the attack of a prepared trial, checking the budgets.

    Raises:
        StageError: A stage failed.

    """
    config = context.config
    attack = config.attack if attack is None else attack
    subgraph = context.subgraph

    k_f = attack.per_node_eps * subgraph.size if attack.k_f is None else attack.k_f
    budget = FeatureBudget(k_f, attack.per_node_eps)

    with PhaseTimer() as optimization, _stage('attack'):
        plan, mutated = craft_attack(
            subgraph, context.records, context.surrogate.W,
            mode=attack.mode, weights=attack.weights, budget=budget,
            k_e=attack.k_e, kinds=attack.kinds, editable=attack.editable,
            seed=context.seeds.attack,
            neighbor_weight_mode=attack.neighbor_weight,
            max_nodes=attack.max_nodes, exhaust_budget=attack.exhaust_budget,
            similarity_threshold=config.graph.similarity_threshold,
            ngram_n=config.graph.ngram_n,
        )
    if plan.feature_spent > budget.k_f + 1e-9 or plan.edges_used > plan.k_e:
        raise StageError(
            'attack',
            f'budget exceeded: L2 {plan.feature_spent} of {budget.k_f}, '
            f'{plan.edges_used} of {plan.k_e} edge edits',
        )

    with _stage('realize'):
        mismatches = verify_closed_loop(plan, mutated)
    if mismatches:
        raise StageError(
            'realize',
            f'{len(mismatches)} closed-loop mismatches, first: {mismatches[0]}',
        )
    return CraftedAttack(plan, mutated, budget, optimization.seconds, optimization.rss_mb)


def attack_trial(context: TrialContext, attack: AttackConfig = None,
                 defense: DefenseConfig = None, crafted: CraftedAttack = None
                 ) -> dict:
    """Attack a prepared trial and report the outcome.

    Args:
        context: The prepared trial.
        attack: Attack settings, the config's by default.
        defense: Defense settings, the config's by default.
        crafted: An attack already planned with `plan_trial_attack`.

    Raises:
        StageError: A stage failed.

    """
    config = context.config
    attack = config.attack if attack is None else attack
    defense = config.defense if defense is None else defense
    size = context.subgraph.size

    if crafted is None:
        crafted = plan_trial_attack(context, attack)
    plan, mutated, budget = crafted.plan, crafted.mutated, crafted.budget

    with _stage('rebuild'):
        dmg_after = build_dmg(
            mutated, config.graph.similarity_threshold, config.graph.ngram_n
        )
        projection_after = homogeneous_projection(dmg_after)
        after_ids = [dmg_after.node_id('domain', name) for name in plan.planned_names]

    before = context.verdicts_before
    outlier_mask = np.zeros(size, dtype=bool)
    purified_mask = np.zeros(size, dtype=bool)
    purification_dropped = None

    with _stage('defense'):
        verdict_projection = projection_after
        if defense.uses('jaccard'):
            purification = jaccard_purify(projection_after, defense.jaccard_threshold)
            verdict_projection = purification.projection
            purified_mask = np.isin(after_ids, sorted(purification.flagged))
            purification_dropped = len(purification.dropped)

        classified = detector_verdicts(
            context.target, verdict_projection, after_ids
        ) | purified_mask

        if defense.uses('iforest'):
            domains = list(dmg_after.domain_ids)
            rows = outlier_feature_rows(dmg_after.features, defense.iforest_features)
            model = iforest_fit(
                rows, defense.n_trees, defense.subsample, seed=context.seeds.defense
            )
            flagged = flag_outliers(
                model, rows, min(defense.outlier_count, len(domains)), domains
            )
            outlier_mask = np.isin(after_ids, flagged)

    with _stage('metrics'):
        after = classified | outlier_mask
        attacked = plan.attacked_mask
        attacked_count = int(attacked.sum())
        neighbor_flips = _neighbor_flips(context, dmg_after, projection_after)
        node_nfr = [flipped / count for count, flipped in neighbor_flips if count]

        asr = metrics.compute_asr(before, after)
        nfr = metrics.compute_nfr(before, after)
        report = {
            'status': 'ok',
            'stage': None,
            'error': None,
            'config_hash': config_hash(config),
            'trial_index': context.index,
            'seeds': list(context.seeds),
            'adversary_mode': config.adversary.mode,
            'adversary_size': size,
            'attack_mode': attack.mode,
            'alpha': attack.alpha,
            'beta': attack.beta,
            'verdicts': [[bool(b), bool(a)] for b, a in zip(before, after)],
            'asr': asr,
            'asr_detected_base': asr,
            'asr_total_base': metrics.compute_asr(before, after, base='total'),
            'nfr': nfr,
            'success_ratio': metrics.success_ratio(before, after, attacked_count),
            'detected_before_ratio': float(np.mean(before)) if size else 0.0,
            'asr_outlier_adjusted': None,
            'outlier_flagged': None,
            'outlier_flagged_ratio': None,
            'purification_dropped': purification_dropped,
            'purification_flagged': int(purified_mask.sum()),
            'attacked_count': attacked_count,
            'feature_spent': plan.feature_spent,
            'k_f': budget.k_f,
            'edges_used': plan.edges_used,
            'k_e': plan.k_e,
            'queries_used': context.queries_used,
            'surrogate_validation_accuracy': context.surrogate.validation_accuracy,
            'target_test_accuracy': context.target.test_accuracy,
            'neighbor_flips': [list(item) for item in neighbor_flips],
            'neighbor_nfr': float(np.mean(node_nfr)) if node_nfr else None,
            'roc_points': [[attacked_count, nfr, asr]],
            'prep_seconds': context.prep_seconds,
            'optimization_seconds': crafted.seconds,
            'prep_rss_mb': context.prep_rss_mb,
            'optimization_rss_mb': crafted.rss_mb,
        }
        if defense.uses('iforest'):
            flagged_count = int(outlier_mask.sum())
            report['outlier_flagged'] = flagged_count
            report['asr_outlier_adjusted'] = metrics.outlier_adjusted_asr(
                metrics.compute_asr(before, classified), flagged_count, size
            )
            if attacked_count:
                report['outlier_flagged_ratio'] = (
                    int((outlier_mask & attacked).sum()) / attacked_count
                )

    logger.info(
        'Trial %d: ASR %.3f, NFR %.3f, %d attacked, %d edge edits',
        context.index, asr, nfr, attacked_count, plan.edges_used,
    )
    return report


def failed_report(config: TrialConfig, index: int, error: StageError) -> dict:

    return {
        'status': 'failed',
        'stage': error.stage,
        'error': error.message,
        'config_hash': config_hash(config),
        'trial_index': index,
    }


def run_trial(config: TrialConfig, index: int) -> dict:
    """Run one seeded trial; a failed stage yields a stage-tagged report."""

    try:
        return attack_trial(prepare_trial(config, index))
    except StageError as error:
        logger.warning('Trial %d failed at stage %s', index, error.stage)
        return failed_report(config, index, error)


def deterministic_view(report: dict) -> dict:
    """The report without run-dependent timing fields."""

    return {key: value for key, value in report.items() if key not in TIMING_FIELDS}


def _run_or_reload(config: TrialConfig, index: int, path_tempdir: str) -> dict:

    path_report = ioutil.prelim_report_path(path_tempdir, index)
    report = ioutil.read_prelim_report(path_report)
    if report is not None and report.get('status') == 'ok' and (
            report.get('config_hash') == config_hash(config)) and (
            report.get('trial_index') == index):
        logger.info('Trial %d already completed', index)
        return report

    start_time = datetime.now()
    report = run_trial(config, index)
    ioutil.write_prelim_report(path_report, report)
    logger.info('Trial %d processed in %s', index, datetime.now() - start_time)
    return report


def run_trials(config: TrialConfig, output_dir: str = None, n_jobs: int = None,
               verbose: int = 0) -> List[dict]:
    """Run all trials of a config, re-entering from stored reports.

    Args:
        config: Trial configuration.
        output_dir: Directory of `reports/` and `summary.csv`. Nothing is
            written beyond the temporary directory when None.
        n_jobs: Number of parallel trials, the config's by default.
        verbose: joblib verbosity.

    Returns:
        The reports ordered by trial index.

    """
    if n_jobs is None:
        n_jobs = config.trials.n_jobs

    chash = config_hash(config)
    root = os.getcwd() if output_dir is None else output_dir
    os.makedirs(root, exist_ok=True)
    path_tempdir = ioutil.setup_tempdir(f'{TMP_TRIAL_DIR}_{chash[:12]}', root=root)

    reports = Parallel(n_jobs=n_jobs, verbose=verbose, timeout=TIMEOUT)(
        delayed(_run_or_reload)(config, index, path_tempdir)
        for index in range(config.trials.n_trials)
    )

    if output_dir is not None:
        path_reports = ioutil.setup_tempdir('reports', root=output_dir)
        for report in reports:
            ioutil.write_report(
                os.path.join(path_reports, f'trial_{report["trial_index"]:03d}.json'),
                report,
            )
        completed = [report for report in reports if report['status'] == 'ok']
        if completed:
            summary = metrics.aggregate(reports)
            ioutil.write_final_results(os.path.join(output_dir, 'summary.csv'), summary)
            ioutil.write_final_results(
                os.path.join(output_dir, 'roc.csv'),
                metrics.roc_table([
                    tuple(point) for report in completed
                    for point in report['roc_points']
                ]),
            )
    # Every report is on disk now, no re-entry needed.
    ioutil.teardown_tempdir(path_tempdir)

    failed = sum(report['status'] != 'ok' for report in reports)
    logger.info(
        'Finished %d trials (%d failed), config %s', len(reports), failed, chash[:12]
    )
    return reports


def roc_sweep(config: TrialConfig, grid: Sequence[int]) -> pd.DataFrame:
    """Mean (NFR, ASR) per number of feature-attacked domains.

    The feature attack is truncated at each count of the grid; edge edits
    and defenses are off.

    Returns:
        Columns attacked_count, nfr, asr, success_ratio, n.

    """
    counts = sorted({int(count) for count in grid})
    if not counts or counts[0] < 0 or counts[-1] > config.adversary.size:
        raise ValueError(
            f'Grid must lie in [0, {config.adversary.size}], got {list(grid)}'
        )

    rows = []
    for index in range(config.trials.n_trials):
        try:
            context = prepare_trial(config, index)
        except StageError as error:
            logger.warning('Skipping trial %d: %s', index, error)
            continue
        for count in counts:
            attack = replace(config.attack, mode='features', max_nodes=count)
            try:
                report = attack_trial(context, attack, DefenseConfig())
            except StageError as error:
                logger.warning('Skipping count %d of trial %d: %s', count, index, error)
                continue
            rows.append((count, report['nfr'], report['asr'], report['success_ratio']))

    data = pd.DataFrame(rows, columns=['attacked_count', 'nfr', 'asr', 'success_ratio'])
    table = data.groupby('attacked_count').agg(
        nfr=('nfr', 'mean'), asr=('asr', 'mean'),
        success_ratio=('success_ratio', 'mean'), n=('asr', 'size'),
    ).reset_index()
    return table


def _parallel_reports(configs: Sequence[TrialConfig], n_jobs: int,
                      verbose: int = 0) -> List[List[dict]]:
    """All trials of several configs, grouped per config."""

    jobs = [
        (position, index) for position, config in enumerate(configs)
        for index in range(config.trials.n_trials)
    ]
    reports = Parallel(n_jobs=n_jobs, verbose=verbose, timeout=TIMEOUT)(
        delayed(run_trial)(configs[position], index) for position, index in jobs
    )
    grouped = [[] for _ in configs]
    for (position, _), report in zip(jobs, reports):
        grouped[position].append(report)
    return grouped


def _mean_of(reports: List[dict], metric: str) -> float:

    values = [
        report[metric] for report in reports
        if report['status'] == 'ok' and report.get(metric) is not None
    ]
    return float(np.mean(values)) if values else float('nan')


def neighbor_impact(config: TrialConfig, n_jobs: int = None) -> pd.DataFrame:
    """Mean flip rate of benign neighbors, per neighbor count and overall."""

    if n_jobs is None:
        n_jobs = config.trials.n_jobs
    reports = _parallel_reports([config], n_jobs)[0]
    return metrics.neighbor_nfr_table(
        tuple(item) for report in reports if report['status'] == 'ok'
        for item in report['neighbor_flips']
    )


def adversary_share_sweep(config: TrialConfig, shares: Sequence[float],
                          n_jobs: int = None) -> pd.DataFrame:
    """Mean ASR and NFR when the adversary owns a share of the malicious
    domain population."""

    if n_jobs is None:
        n_jobs = config.trials.n_jobs

    configs = []
    for share in shares:
        if not 0 < share <= 1:
            raise ValueError(f'Shares must lie in (0, 1], got {share}')
        size = max(1, int(round(share * config.synth.n_malicious_domains)))
        configs.append(replace(config, adversary=replace(config.adversary, size=size)))

    rows = []
    for share, share_config, reports in zip(
            shares, configs, _parallel_reports(configs, n_jobs)):
        rows.append({
            'share': share,
            'adversary_size': share_config.adversary.size,
            'asr': _mean_of(reports, 'asr'),
            'asr_total_base': _mean_of(reports, 'asr_total_base'),
            'nfr': _mean_of(reports, 'nfr'),
            'n': sum(report['status'] == 'ok' for report in reports),
        })
    return pd.DataFrame(rows)


def cost_scaling(config: TrialConfig, sizes: Sequence[int]) -> pd.DataFrame:
    """Preparation and optimization cost of one trial per adversary size."""

    rows = []
    for size in sizes:
        sized = replace(config, adversary=replace(config.adversary, size=int(size)))
        report = run_trial(sized, 0)
        if report['status'] != 'ok':
            logger.warning('No cost measurement for size %d: %s', size, report['error'])
            continue
        row = {'adversary_size': int(size)}
        row.update((name, report[name]) for name in TIMING_FIELDS)
        rows.append(row)
    return pd.DataFrame(rows, columns=['adversary_size', *TIMING_FIELDS])
