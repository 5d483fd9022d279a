# -*- coding: utf-8 -*-
#
# conftest.py
#

"""
Shared fixtures: the three-domain worked example and small synthetic graphs.
"""

import pytest

from dmgattack.dmg.dnslog import DnsLogRecord
from dmgattack.dmg.graph import build_dmg, homogeneous_projection
from dmgattack.experiments.config import config_from_dict
from dmgattack.synth.generator import SynthConfig, generate_dns_log


V1 = 'www.b.rwth-aachen.de'
V2 = 'writes.bnxd.rwth-aachen.de'
V3 = 'dekh1her76avy0qnelivijwd1.ddns.net'

I1 = '10.0.0.1'
I2 = '10.0.0.2'


def edge_set(named_edges, kinds=('apex', 'resolve', 'similar')):
    """Named edges of the given kinds as (frozenset of endpoints, kind)."""

    return {
        (frozenset((u, v)), kind) for u, v, kind in named_edges if kind in kinds
    }


@pytest.fixture
def worked_records():

    return [
        DnsLogRecord(1, 'c1', V1, I1),
        DnsLogRecord(2, 'c2', V2, I2),
        DnsLogRecord(3, 'c3', V3, I1),
    ]


@pytest.fixture
def worked_dmg(worked_records):
    return build_dmg(worked_records)


@pytest.fixture(scope='session')
def small_synth_config():

    return SynthConfig(
        n_benign_domains=150,
        n_malicious_domains=150,
        n_clients=60,
        n_ips=40,
        seed=3,
    )


@pytest.fixture(scope='session')
def small_log(small_synth_config):
    return generate_dns_log(small_synth_config)


@pytest.fixture(scope='session')
def small_dmg(small_log):

    records, _ = small_log
    return build_dmg(records)


@pytest.fixture(scope='session')
def small_projection(small_dmg):
    return homogeneous_projection(small_dmg)


@pytest.fixture
def small_trial_config():
    """Trial settings that run in seconds."""

    return config_from_dict({
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
        'trials': {'n_trials': 2},
    })
