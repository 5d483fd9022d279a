# -*- coding: utf-8 -*-
#
# test_config.py
#

import os
import glob

import pytest

from dmgattack.experiments.config import (
    ConfigError,
    TrialConfig,
    apply_overrides,
    config_from_dict,
    config_hash,
    load_config,
    with_attack,
)
from dmgattack.experiments.main import build_parser, resolve_config


PARAMETER_FILES = sorted(glob.glob(os.path.join(
    os.path.dirname(__file__), '..', 'dmgattack', 'experiments',
    'parameter_files', '*.yaml',
)))


def test_parameter_files_are_found():
    assert len(PARAMETER_FILES) >= 6


@pytest.mark.parametrize('path', PARAMETER_FILES, ids=os.path.basename)
def test_parameter_files_load(path):

    config = load_config(path)
    assert isinstance(config, TrialConfig)
    assert len(config_hash(config)) == 64


def test_default_parameter_file():

    path = [path for path in PARAMETER_FILES if path.endswith('default.yaml')][0]
    config = load_config(path)

    assert config.attack.k_f is None
    assert config.attack.kinds == ('apex', 'resolve', 'similar')
    assert config.defense.enabled == ()
    assert config.adversary.size == 100
    assert config.graph.similarity_threshold == 0.5


def test_unknown_keys_are_rejected():

    with pytest.raises(ConfigError):
        config_from_dict({'attack': {'k_g': 3}})
    with pytest.raises(ConfigError):
        config_from_dict({'attacks': {}})
    with pytest.raises(ConfigError):
        config_from_dict({'models': {'target': {'layers': 3}}})


def test_invalid_values_are_rejected():

    with pytest.raises(ConfigError):
        config_from_dict({'attack': {'alpha': 0.7, 'beta': 0.7}})
    with pytest.raises(ConfigError):
        config_from_dict({'attack': {'k_e': -1}})
    with pytest.raises(ConfigError):
        config_from_dict({'graph': {'similarity_threshold': 0.0}})
    with pytest.raises(ConfigError):
        config_from_dict({'defense': {'enabled': ['firewall']}})
    with pytest.raises(ConfigError):
        config_from_dict({'adversary': 'sampled'})


def test_none_spellings():

    config = config_from_dict({
        'attack': {'k_f': 'none', 'max_nodes': None},
        'defense': {'enabled': 'none'},
    })
    assert config.attack.k_f is None and config.attack.max_nodes is None
    assert config.defense.enabled == ()

    config = config_from_dict({'defense': {'enabled': 'iforest'}})
    assert config.defense.uses('iforest') and not config.defense.uses('jaccard')


def test_empty_document_gives_defaults():
    assert config_from_dict(None) == TrialConfig()


def test_overrides():

    config = apply_overrides(TrialConfig(), {
        'attack.k_e': 5,
        'models.target.epochs': 50,
        'trials.n_trials': None,
    })
    assert config.attack.k_e == 5
    assert config.models.target.epochs == 50
    assert config.trials.n_trials == TrialConfig().trials.n_trials

    with pytest.raises(ConfigError):
        apply_overrides(TrialConfig(), {'attack.k_g': 5})
    with pytest.raises(ConfigError):
        apply_overrides(TrialConfig(), {'attack.k_e.value': 5})
    with pytest.raises(ConfigError):
        apply_overrides(TrialConfig(), {'attack.k_e': -5})


def test_load_config_with_overrides(tmp_path):

    path = tmp_path / 'trial.yaml'
    path.write_text('attack:\n  mode: features\n  k_f: 2.5\n')
    config = load_config(str(path), {'attack.k_f': 4.0})
    assert config.attack.mode == 'features'
    assert config.attack.k_f == 4.0


def test_unreadable_files(tmp_path):

    with pytest.raises(ConfigError):
        load_config(str(tmp_path / 'missing.yaml'))

    path = tmp_path / 'broken.yaml'
    path.write_text('attack: [unclosed\n')
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_config_hash():

    config = TrialConfig()
    assert config_hash(config) == config_hash(TrialConfig())
    assert config_hash(config) != config_hash(apply_overrides(config, {'attack.k_e': 3}))


def test_with_attack():

    config = with_attack(TrialConfig(), k_f=0.0, k_e=0)
    assert config.attack.k_f == 0.0 and config.attack.k_e == 0
    assert config.synth == TrialConfig().synth
    assert config.attack.weights.alpha == 0.5

    with pytest.raises(ConfigError):
        with_attack(TrialConfig(), mode='labels')
    with pytest.raises(ConfigError):
        with_attack(TrialConfig(), budget=3)


@pytest.mark.parametrize('flags, alpha, beta', [
    (['--beta', '0'], 1.0, 0.0),
    (['--alpha', '0.25'], 0.25, 0.75),
    (['--alpha', '0.3', '--beta', '0.7'], 0.3, 0.7),
    ([], 0.5, 0.5),
])
def test_single_weight_flag_sets_its_complement(flags, alpha, beta):

    config = resolve_config(build_parser().parse_args(['eval', *flags]))
    assert config.attack.alpha == pytest.approx(alpha)
    assert config.attack.beta == pytest.approx(beta)


def test_inconsistent_weight_flags_are_rejected():

    with pytest.raises(ConfigError):
        resolve_config(build_parser().parse_args(['eval', '--alpha', '0.3', '--beta', '0.3']))
