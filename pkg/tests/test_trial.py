# -*- coding: utf-8 -*-
#
# test_trial.py
#

import os
import time
import json

from dataclasses import replace

import numpy as np
import pytest
import yaml

from dmgattack.experiments import trial
from dmgattack.experiments.config import DefenseConfig, with_attack
from dmgattack.experiments.main import EXIT_CONFIG, EXIT_OK, EXIT_STAGE, main


SMALL_DOCUMENT = {
    'synth': {
        'n_benign_domains': 150,
        'n_malicious_domains': 150,
        'n_clients': 60,
        'n_ips': 40,
        'seed': 3,
    },
    'adversary': {'mode': 'sampled', 'size': 10},
    'models': {'target': {'epochs': 100}, 'max_queries': 200},
    'attack': {'mode': 'joint', 'k_e': 3},
    'trials': {'n_trials': 1},
}


def _write_config(tmp_path, document, name='trial.yaml'):

    path = tmp_path / name
    path.write_text(yaml.safe_dump(document))
    return str(path)


def test_trial_seeds(small_trial_config):

    first = trial.trial_seeds(small_trial_config, 0)
    assert first == trial.trial_seeds(small_trial_config, 0)
    assert first != trial.trial_seeds(small_trial_config, 1)
    assert len(set(first)) == len(first)


def test_trial_is_deterministic(small_trial_config):

    first = trial.run_trial(small_trial_config, 0)
    second = trial.run_trial(small_trial_config, 0)

    assert first['status'] == 'ok'
    assert trial.deterministic_view(first) == trial.deterministic_view(second)
    assert not set(trial.TIMING_FIELDS) & set(trial.deterministic_view(first))


def test_trial_report_respects_budgets(small_trial_config):

    report = trial.run_trial(small_trial_config, 1)

    assert report['status'] == 'ok'
    assert report['adversary_size'] == 10
    assert len(report['verdicts']) == 10
    assert report['queries_used'] <= small_trial_config.models.max_queries
    assert report['feature_spent'] <= report['k_f'] + 1e-9
    assert report['k_f'] == pytest.approx(10 * small_trial_config.attack.per_node_eps)
    assert report['edges_used'] <= 3
    assert 0.0 <= report['asr'] <= 1.0 and 0.0 <= report['nfr'] <= 1.0
    assert report['asr'] == report['asr_detected_base']
    assert report['asr_outlier_adjusted'] is None
    assert len(report['neighbor_flips']) == 10

    # Reports are stored as JSON.
    json.dumps(report)


def test_no_budget_means_no_change(small_trial_config):

    config = with_attack(small_trial_config, k_f=0.0, k_e=0)
    report = trial.run_trial(config, 0)

    assert report['status'] == 'ok'
    assert report['asr'] == 0.0 and report['nfr'] == 0.0
    assert report['attacked_count'] == 0
    assert all(before == after for before, after in report['verdicts'])


def test_trial_against_defenses(small_trial_config):

    context = trial.prepare_trial(small_trial_config, 0)
    defense = DefenseConfig(
        enabled=('iforest', 'jaccard'), outlier_count=5, subsample=64
    )
    report = trial.attack_trial(context, defense=defense)

    assert report['outlier_flagged'] is not None
    assert report['outlier_flagged'] <= 5
    assert 0.0 <= report['asr_outlier_adjusted'] <= 1.0
    assert report['purification_dropped'] is not None

    undefended = trial.attack_trial(context, defense=DefenseConfig())
    assert undefended['outlier_flagged'] is None
    assert undefended['purification_dropped'] is None


def test_created_adversary_trial(small_trial_config):

    config = replace(
        small_trial_config,
        adversary=replace(small_trial_config.adversary, mode='created'),
    )
    context = trial.prepare_trial(config, 0)
    assert context.subgraph.size == 10
    assert len(context.dmg.domain_ids) == 310

    report = trial.attack_trial(context)
    assert report['status'] == 'ok'
    assert report['adversary_mode'] == 'created'


def test_failed_stage_is_reported(small_trial_config):

    config = replace(
        small_trial_config,
        adversary=replace(small_trial_config.adversary, size=10000),
    )
    report = trial.run_trial(config, 0)
    assert report['status'] == 'failed'
    assert report['stage'] == 'adversary'

    with pytest.raises(trial.StageError) as info:
        trial.prepare_trial(config, 0)
    assert info.value.stage == 'adversary'


def test_run_trials_writes_results(tmp_path, small_trial_config):

    reports = trial.run_trials(small_trial_config, str(tmp_path), n_jobs=1)

    assert [report['trial_index'] for report in reports] == [0, 1]
    assert (tmp_path / 'reports' / 'trial_000.json').is_file()
    assert (tmp_path / 'reports' / 'trial_001.json').is_file()
    assert (tmp_path / 'summary.csv').is_file()
    assert (tmp_path / 'roc.csv').is_file()
    assert not [name for name in os.listdir(tmp_path) if name.startswith('tmp_trials')]

    stored = json.loads((tmp_path / 'reports' / 'trial_000.json').read_text())
    assert stored['asr'] == reports[0]['asr']


def test_roc_sweep(small_trial_config):

    config = replace(
        small_trial_config, trials=replace(small_trial_config.trials, n_trials=1)
    )
    table = trial.roc_sweep(config, [0, 10])

    assert list(table['attacked_count']) == [0, 10]
    start = table.iloc[0]
    assert start['asr'] == 0.0 and start['nfr'] == 0.0

    with pytest.raises(ValueError):
        trial.roc_sweep(config, [11])


def test_cli_rejects_bad_configs(tmp_path):

    assert main(['eval', '--config', str(tmp_path / 'missing.yaml'), '-q']) == EXIT_CONFIG

    path = _write_config(tmp_path, {'attack': {'k_g': 3}})
    assert main(['eval', '--config', path, '--output', str(tmp_path), '-q']) == EXIT_CONFIG

    path = _write_config(tmp_path, SMALL_DOCUMENT)
    assert main(['eval', '--config', path, '--ke', '-1', '-q']) == EXIT_CONFIG


def test_cli_failed_trials(tmp_path):

    path = _write_config(tmp_path, SMALL_DOCUMENT)
    code = main([
        'eval', '--config', path, '--size', '10000',
        '--output', str(tmp_path / 'out'), '-q',
    ])
    assert code == EXIT_STAGE


def test_cli_synth_and_graph(tmp_path):

    path = _write_config(tmp_path, SMALL_DOCUMENT)
    output = str(tmp_path / 'out')

    assert main(['synth', '--config', path, '--output', output, '-q']) == EXIT_OK
    assert os.path.isfile(os.path.join(output, 'dns.log'))
    assert os.path.isfile(os.path.join(output, 'labels.csv'))

    code = main([
        'build-graph', '--config', path, '--log', os.path.join(output, 'dns.log'),
        '--output', output, '-q',
    ])
    assert code == EXIT_OK
    with open(os.path.join(output, 'graph.json')) as infile:
        graph = json.load(infile)
    assert graph['similarity_threshold'] == 0.5


@pytest.fixture
def single_trial_config(small_trial_config):
    return replace(
        small_trial_config, trials=replace(small_trial_config.trials, n_trials=1)
    )


def test_neighbor_impact_without_budget_is_zero(single_trial_config):

    config = with_attack(single_trial_config, k_f=0.0, k_e=0)
    table = trial.neighbor_impact(config, n_jobs=1)

    assert list(table.columns) == ['neighbors', 'nodes', 'mean_nfr']
    assert 0 not in list(table['neighbors'])
    assert (table['mean_nfr'] == 0.0).all()


def test_neighbor_counts_are_direct_domain_neighbors(single_trial_config):

    context = trial.prepare_trial(single_trial_config, 0)
    report = trial.attack_trial(context, defense=DefenseConfig())

    dmg = context.dmg
    num_domains = len(dmg.domain_ids)
    adversary = set(context.subgraph.node_ids)
    for node, (count, flipped) in zip(context.subgraph.node_ids, report['neighbor_flips']):
        direct = [
            other for other in dmg.neighbors(node)
            if other < num_domains and other not in adversary
        ]
        assert count <= len(direct)
        assert 0 <= flipped <= count


def test_neighbor_counts_do_not_depend_on_weights(single_trial_config):

    self_only = trial.run_trial(with_attack(single_trial_config, alpha=1.0, beta=0.0), 0)
    coordinated = trial.run_trial(with_attack(single_trial_config, alpha=0.5, beta=0.5), 0)

    assert self_only['status'] == coordinated['status'] == 'ok'
    assert self_only['seeds'] == coordinated['seeds']
    assert ([count for count, _ in self_only['neighbor_flips']]
            == [count for count, _ in coordinated['neighbor_flips']])


def test_adversary_share_sweep(single_trial_config):

    table = trial.adversary_share_sweep(single_trial_config, [0.02, 0.05], n_jobs=1)

    assert list(table['adversary_size']) == [3, 8]
    assert list(table.columns) == [
        'share', 'adversary_size', 'asr', 'asr_total_base', 'nfr', 'n'
    ]
    assert (table['n'] == 1).all()
    assert table['asr'].between(0, 1).all()

    with pytest.raises(ValueError):
        trial.adversary_share_sweep(single_trial_config, [0.0])
    with pytest.raises(ValueError):
        trial.adversary_share_sweep(single_trial_config, [1.5])


def test_cost_scaling(single_trial_config):

    table = trial.cost_scaling(single_trial_config, [5, 10])

    assert list(table['adversary_size']) == [5, 10]
    assert list(table.columns) == ['adversary_size', *trial.TIMING_FIELDS]
    assert (table[list(trial.TIMING_FIELDS)] >= 0).all().all()
    assert (table['prep_rss_mb'] > 0).all()


def test_roc_sweep_grid(single_trial_config):

    grid = [0, 2, 4, 6, 8, 10]
    table = trial.roc_sweep(single_trial_config, grid)

    assert list(table['attacked_count']) == grid
    assert table['asr'].between(0, 1).all() and table['nfr'].between(0, 1).all()
    assert table['asr'].iloc[-1] >= table['asr'].iloc[0] == 0.0


def test_phase_timer_keeps_peak_memory():

    start = trial._rss_mb()
    with trial.PhaseTimer(interval=0.01) as timer:
        block = np.ones(100 * 2 ** 20 // 8)
        time.sleep(0.3)
        del block

    assert timer.seconds >= 0.3
    assert timer.rss_mb >= start + 80
    assert not timer._sampler.is_alive()
