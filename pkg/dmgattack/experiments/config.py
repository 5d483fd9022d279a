# -*- coding: utf-8 -*-
#
# config.py
#

"""
Trial configuration: one dataclass per concern, loaded from YAML parameter
files and overridden from the command line.
"""

import json
import hashlib
import logging

from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from typing import Any, Dict, Optional, Tuple

import yaml

from ..attack.features import DEFAULT_NODE_EPS
from ..attack.objectives import NEIGHBOR_WEIGHT_MODES, PerturbationWeights
from ..attack.plan import ATTACK_MODES
from ..attack.state import EDITABLE_EDGE_KINDS
from ..defense.outliers import DEFAULT_NUM_TREES, DEFAULT_SUBSAMPLE, FEATURE_VIEWS
from ..defense.purification import DEFAULT_JACCARD_THRESHOLD
from ..dmg.features import EDITABLE_INDICES
from ..dmg.graph import DEFAULT_SIMILARITY_THRESHOLD
from ..models.query import DEFAULT_MAX_QUERIES
from ..models.surrogate import SurrogateHyper
from ..models.target import TrainingHyper
from ..synth.generator import SynthConfig


logger = logging.getLogger(__name__)

ADVERSARY_MODES = ('sampled', 'created')

DEFENSES = ('iforest', 'jaccard')


class ConfigError(ValueError):
    """Unknown key or out-of-range value in a trial configuration."""


@dataclass(frozen=True)
class GraphConfig:

    similarity_threshold: float = DEFAULT_SIMILARITY_THRESHOLD
    ngram_n: int = 2

    def __post_init__(self):

        if not 0 < self.similarity_threshold <= 1:
            raise ValueError(
                f'similarity_threshold must be in (0, 1], got {self.similarity_threshold}'
            )
        if self.ngram_n < 1:
            raise ValueError(f'ngram_n must be >= 1, got {self.ngram_n}')


@dataclass(frozen=True)
class AdversaryConfig:

    mode: str = 'sampled'
    size: int = 100
    num_ips: int = 5
    group_size: int = 20

    def __post_init__(self):

        if self.mode not in ADVERSARY_MODES:
            raise ValueError(
                f'Adversary mode must be one of {ADVERSARY_MODES}, got {self.mode!r}'
            )
        if self.size < 1:
            raise ValueError(f'Adversary size must be >= 1, got {self.size}')
        if self.num_ips < 1 or self.group_size < 1:
            raise ValueError('num_ips and group_size must be >= 1')


@dataclass(frozen=True)
class ModelConfig:

    target: TrainingHyper = field(default_factory=TrainingHyper)
    surrogate: SurrogateHyper = field(default_factory=SurrogateHyper)
    max_queries: int = DEFAULT_MAX_QUERIES

    def __post_init__(self):

        if self.max_queries < 2:
            raise ValueError(f'max_queries must be >= 2, got {self.max_queries}')


@dataclass(frozen=True)
class AttackConfig:
    """Attack settings; k_f None means per_node_eps times the adversary size."""

    mode: str = 'joint'
    alpha: float = 0.5
    beta: float = 0.5
    k_f: Optional[float] = None
    per_node_eps: float = DEFAULT_NODE_EPS
    k_e: int = 20
    kinds: Tuple[str, ...] = EDITABLE_EDGE_KINDS
    editable: Tuple[int, ...] = EDITABLE_INDICES
    neighbor_weight: str = 'inv_degree'
    max_nodes: Optional[int] = None
    exhaust_budget: bool = False

    def __post_init__(self):

        if self.mode not in ATTACK_MODES:
            raise ValueError(f'Attack mode must be one of {ATTACK_MODES}, got {self.mode!r}')
        PerturbationWeights(self.alpha, self.beta)
        if self.k_f is not None and self.k_f < 0:
            raise ValueError(f'k_f must be >= 0, got {self.k_f}')
        if self.per_node_eps <= 0:
            raise ValueError(f'per_node_eps must be > 0, got {self.per_node_eps}')
        if self.k_e < 0:
            raise ValueError(f'k_e must be >= 0, got {self.k_e}')
        unknown = set(self.kinds) - set(EDITABLE_EDGE_KINDS)
        if unknown:
            raise ValueError(f'Edge kinds {sorted(unknown)} are not editable')
        unknown = set(self.editable) - set(EDITABLE_INDICES)
        if unknown:
            raise ValueError(f'Feature indices {sorted(unknown)} are not editable')
        if self.neighbor_weight not in NEIGHBOR_WEIGHT_MODES:
            raise ValueError(
                f'neighbor_weight must be one of {NEIGHBOR_WEIGHT_MODES}, '
                f'got {self.neighbor_weight!r}'
            )
        if self.max_nodes is not None and self.max_nodes < 0:
            raise ValueError(f'max_nodes must be >= 0, got {self.max_nodes}')

    @property
    def weights(self) -> PerturbationWeights:
        return PerturbationWeights(self.alpha, self.beta)


@dataclass(frozen=True)
class DefenseConfig:

    enabled: Tuple[str, ...] = ()
    outlier_count: int = 100
    iforest_features: str = 'all'
    n_trees: int = DEFAULT_NUM_TREES
    subsample: int = DEFAULT_SUBSAMPLE
    jaccard_threshold: float = DEFAULT_JACCARD_THRESHOLD

    def __post_init__(self):

        unknown = set(self.enabled) - set(DEFENSES) - {'none'}
        if unknown:
            raise ValueError(f'Unknown defenses {sorted(unknown)}')
        if self.outlier_count < 0:
            raise ValueError(f'outlier_count must be >= 0, got {self.outlier_count}')
        if self.iforest_features not in FEATURE_VIEWS:
            raise ValueError(
                f'iforest_features must be one of {FEATURE_VIEWS}, '
                f'got {self.iforest_features!r}'
            )
        if self.n_trees < 1 or self.subsample < 2:
            raise ValueError('n_trees must be >= 1 and subsample >= 2')
        if not 0 <= self.jaccard_threshold <= 1:
            raise ValueError(
                f'jaccard_threshold must be in [0, 1], got {self.jaccard_threshold}'
            )

    def uses(self, defense: str) -> bool:
        return defense in self.enabled


@dataclass(frozen=True)
class TrialsConfig:

    n_trials: int = 30
    seed_base: int = 0
    n_jobs: int = 1

    def __post_init__(self):

        if self.n_trials < 1:
            raise ValueError(f'n_trials must be >= 1, got {self.n_trials}')
        if self.n_jobs == 0:
            raise ValueError('n_jobs must be non-zero')


@dataclass(frozen=True)
class TrialConfig:

    synth: SynthConfig = field(default_factory=SynthConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    models: ModelConfig = field(default_factory=ModelConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    defense: DefenseConfig = field(default_factory=DefenseConfig)
    trials: TrialsConfig = field(default_factory=TrialsConfig)


def _build(cls, values: Dict[str, Any], section: str):
    """Instantiate a config dataclass from a mapping, nested sections included."""

    if values is None:
        values = {}
    if not isinstance(values, dict):
        raise ConfigError(f'Section {section!r} must be a mapping, got {values!r}')

    known = {item.name: item for item in fields(cls)}
    unknown = sorted(set(values) - set(known))
    if unknown:
        raise ConfigError(f'Unknown keys in {section!r}: {unknown}')

    kwargs = {}
    defaults = cls()
    for name, value in values.items():
        current = getattr(defaults, name)
        if is_dataclass(current):
            kwargs[name] = _build(type(current), value, f'{section}.{name}')
        elif isinstance(current, tuple):
            if value is None or value == 'none':
                kwargs[name] = ()
            elif isinstance(value, str):
                kwargs[name] = (value,)
            else:
                kwargs[name] = tuple(value)
        elif isinstance(value, list):
            raise ConfigError(f'{section}.{name} takes a single value, got {value}')
        elif value == 'none':
            # Parameter files spell None as 'none'.
            kwargs[name] = None
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as error:
        raise ConfigError(f'Invalid {section!r}: {error}') from error


def config_from_dict(document: Dict[str, Any]) -> TrialConfig:

    if document is None:
        document = {}
    return _build(TrialConfig, document, 'config')


def load_config(path_to_file: str, overrides: Dict[str, Any] = None
                ) -> TrialConfig:
    """Read a YAML parameter file and apply dotted-key overrides.

    Raises:
        ConfigError: Unreadable file, unknown keys or invalid values.

    """
    try:
        with open(path_to_file, 'r') as infile:
            document = yaml.safe_load(infile)
    except (OSError, yaml.YAMLError) as error:
        raise ConfigError(f'Cannot read {path_to_file}: {error}') from error

    config = config_from_dict(document)
    if overrides:
        config = apply_overrides(config, overrides)
    logger.debug('Loaded config %s (%s)', path_to_file, config_hash(config)[:12])
    return config


def apply_overrides(config: TrialConfig, overrides: Dict[str, Any]
                    ) -> TrialConfig:
    """Replace values addressed by dotted keys, e.g. `attack.k_e`."""

    document = config_to_dict(config)
    for key, value in overrides.items():
        if value is None:
            continue
        *path, name = key.split('.')
        section = document
        for part in path:
            if not isinstance(section.get(part), dict):
                raise ConfigError(f'Unknown config section in {key!r}')
            section = section[part]
        if name not in section:
            raise ConfigError(f'Unknown config key {key!r}')
        section[name] = value
    return config_from_dict(document)


def config_to_dict(config: TrialConfig) -> Dict[str, Any]:
    return asdict(config)


def config_hash(config: TrialConfig) -> str:
    """SHA-256 of the canonical sorted-key JSON of the config."""

    canonical = json.dumps(
        config_to_dict(config), sort_keys=True, separators=(',', ':')
    )
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def with_attack(config: TrialConfig, **changes) -> TrialConfig:
    """Copy of the config with changed attack settings."""

    try:
        return replace(config, attack=replace(config.attack, **changes))
    except (TypeError, ValueError) as error:
        raise ConfigError(f'Invalid attack settings {changes}: {error}') from error
