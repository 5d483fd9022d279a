# -*- coding: utf-8 -*-
#
# generator.py
#

"""
Seeded generator of DNS logs with planted benign and malicious structure.

Benign domains come from a dictionary-word name model hosted on a shared
benign address pool. Malicious domains are grouped under algorithmic apexes,
share a small address pool and stems, carry digits and are queried mostly by a
subset of infected clients. `malicious_clustering` scales how strongly the
malicious domains share these signals.
"""

import math
import logging
import ipaddress

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from ..dmg.dnslog import DnsLogRecord
from ..dmg.features import apex_of


logger = logging.getLogger(__name__)

BENIGN = 'benign'
MALICIOUS = 'malicious'

WORDS = (
    'apple', 'river', 'garden', 'cloud', 'stone', 'market', 'travel', 'health',
    'school', 'music', 'photo', 'press', 'story', 'forest', 'coffee', 'bread',
    'light', 'bright', 'ocean', 'planet', 'energy', 'motor', 'sport', 'field',
    'green', 'silver', 'golden', 'north', 'south', 'city', 'house', 'home',
    'bank', 'trust', 'union', 'media', 'daily', 'times', 'world', 'local',
    'family', 'kitchen', 'design', 'studio', 'craft', 'paper', 'book', 'library',
    'museum', 'theater', 'cinema', 'radio', 'focus', 'vision', 'smart', 'simple',
    'rapid', 'secure', 'open', 'public', 'civic', 'social', 'nature', 'animal',
    'flower', 'winter', 'summer', 'spring', 'autumn', 'harbor', 'bridge',
    'tower', 'castle', 'valley', 'mountain', 'island', 'lake', 'beach', 'sunny',
    'happy', 'clever', 'maple', 'cedar', 'pine', 'oak', 'willow', 'meadow',
    'orchard', 'farm', 'dairy', 'bakery', 'pizza', 'pasta', 'salad', 'tea',
    'wine', 'beer', 'shoe', 'fashion', 'style', 'beauty', 'dental', 'clinic',
    'care', 'pet', 'garage', 'repair', 'build', 'tools', 'supply', 'office',
    'learn', 'academy', 'college', 'science', 'research', 'labs', 'network',
    'software', 'digital', 'online', 'server', 'hosting', 'games', 'play',
)

SERVICES = (
    'mail', 'shop', 'blog', 'cdn', 'api', 'news', 'docs', 'img', 'static',
    'portal', 'login', 'support', 'm',
)

BENIGN_TLDS = ('com', 'org', 'net', 'de', 'io', 'info', 'edu', 'co.uk')

MALICIOUS_TLDS = ('net', 'xyz', 'top', 'info', 'cc', 'biz', 'ru', 'club')

CONSONANTS = 'bcdfghjklmnpqrstvwxz'

ALPHANUMERIC = 'abcdefghijklmnopqrstuvwxyz0123456789'

# First address of the synthetic 10.0.0.0/8 pool.
ADDRESS_BASE = int(ipaddress.IPv4Address('10.0.0.0'))


@dataclass(frozen=True)
class SynthConfig:
    """Size and structure of a synthetic DNS log."""

    n_benign_domains: int = 2000
    n_malicious_domains: int = 2000
    n_clients: int = 800
    n_ips: int = 400
    malicious_clustering: float = 0.8
    seed: int = 0
    max_queries_per_domain: int = 3
    malicious_ip_share: float = 0.2
    infected_client_share: float = 0.2
    start_timestamp: int = 1600000000

    def __post_init__(self):

        for name in ('n_benign_domains', 'n_malicious_domains', 'n_clients',
                     'n_ips'):
            if getattr(self, name) < 0:
                raise ValueError(f'{name} must be >= 0, got {getattr(self, name)}')
        if not 0.0 <= self.malicious_clustering <= 1.0:
            raise ValueError(
                'malicious_clustering must be in [0, 1], got '
                f'{self.malicious_clustering}'
            )
        if self.max_queries_per_domain < 1:
            raise ValueError('max_queries_per_domain must be >= 1')

        num_domains = self.n_benign_domains + self.n_malicious_domains
        if num_domains > 0 and (self.n_ips < 1 or self.n_clients < 1):
            raise ValueError('Domains need at least one IP and one client')
        if self.n_benign_domains > 0 and self.n_malicious_domains > 0 and (
                self.n_ips < 2):
            raise ValueError('Benign and malicious pools need >= 2 IPs')


def _random_string(rng, alphabet: str, size: int) -> str:
    return ''.join(rng.choice(list(alphabet), size=size))


def _algorithmic_label(rng, min_size: int, max_size: int) -> str:
    """Random alphanumeric label containing at least one digit."""

    size = int(rng.integers(min_size, max_size + 1))
    label = _random_string(rng, ALPHANUMERIC, size)
    if not any(char.isdigit() for char in label):
        pos = int(rng.integers(size))
        label = label[:pos] + str(int(rng.integers(10))) + label[pos + 1:]
    return label


def _address_pool(rng, n_ips: int) -> List[str]:

    offsets = rng.choice(2 ** 24 - 2, size=n_ips, replace=False) + 1
    return [str(ipaddress.IPv4Address(ADDRESS_BASE + int(offset)))
            for offset in offsets]


def _benign_names(config: SynthConfig, rng, taken: set) -> List[str]:

    names = []
    while len(names) < config.n_benign_domains:
        words = [str(word) for word in rng.choice(WORDS, size=2, replace=False)]
        draw = rng.random()
        if draw < 0.6:
            body = words[0]
        elif draw < 0.75:
            body = '-'.join(words)
        else:
            body = ''.join(words)
        apex = f'{body}.{rng.choice(BENIGN_TLDS)}'

        num_hosts = int(rng.integers(1, 4))
        for _ in range(num_hosts):
            draw = rng.random()
            if draw < 0.45:
                name = f'www.{apex}'
            elif draw < 0.75:
                name = f'{rng.choice(SERVICES)}.{apex}'
            else:
                name = apex
            if name in taken or len(names) >= config.n_benign_domains:
                continue
            taken.add(name)
            names.append(name)
    return names


def _malicious_names(config: SynthConfig, rng, taken: set
                     ) -> Tuple[List[str], List[int]]:
    """Malicious names with their group assignments."""

    num_domains = config.n_malicious_domains
    if num_domains == 0:
        return [], []

    clustering = config.malicious_clustering
    num_groups = max(1, math.ceil(num_domains * (1.0 - clustering) / 2.0))

    apexes, stems = [], []
    for _ in range(num_groups):
        label = _random_string(rng, CONSONANTS, int(rng.integers(6, 11)))
        apexes.append(f'{label}.{rng.choice(MALICIOUS_TLDS)}')
        stems.append(_random_string(rng, ALPHANUMERIC, int(rng.integers(4, 7))))

    names, groups = [], []
    while len(names) < num_domains:
        group = len(names) % num_groups
        if rng.random() < clustering:
            label = stems[group] + _algorithmic_label(rng, 3, 6)
        else:
            label = _algorithmic_label(rng, 8, 16)

        draw = rng.random()
        if draw < 0.15:
            sub = f'{label}.{label}'
        elif draw < 0.25:
            sub = f'{label}.{rng.choice(list(CONSONANTS))}'
        elif draw < 0.35:
            sub = f'www.{label}'
        else:
            sub = label

        name = f'{sub}.{apexes[group]}'
        if name in taken:
            continue
        taken.add(name)
        names.append(name)
        groups.append(group)
    return names, groups


def generate_dns_log(config: SynthConfig
                     ) -> Tuple[List[DnsLogRecord], Dict[str, str]]:
    """Generate a DNS log and the ground-truth label of every domain.

    Returns:
        (tuple): Records and a mapping from domain name to `benign` or
            `malicious`.

    """
    rng = np.random.default_rng(config.seed)

    num_domains = config.n_benign_domains + config.n_malicious_domains
    if num_domains == 0:
        return [], {}

    addresses = _address_pool(rng, config.n_ips)
    if config.n_malicious_domains == 0:
        num_malicious_ips = 0
    elif config.n_benign_domains == 0:
        num_malicious_ips = config.n_ips
    else:
        num_malicious_ips = int(np.clip(
            round(config.n_ips * config.malicious_ip_share), 1, config.n_ips - 1
        ))
    malicious_ips = addresses[:num_malicious_ips]
    benign_ips = addresses[num_malicious_ips:]

    clients = [f'c{index:05d}' for index in range(config.n_clients)]
    num_infected = max(1, round(config.n_clients * config.infected_client_share))
    infected = list(rng.permutation(clients)[:num_infected])

    taken = set()
    benign_names = _benign_names(config, rng, taken)
    malicious_names, groups = _malicious_names(config, rng, taken)

    resolution = {}
    for name in benign_names:
        # Hosts of one apex share a server.
        apex_key = apex_of(name)
        if apex_key not in resolution:
            resolution[apex_key] = benign_ips[int(rng.integers(len(benign_ips)))]
        resolution[name] = resolution[apex_key]

    if malicious_names:
        num_groups = max(groups) + 1
        group_ips = [
            list(rng.choice(malicious_ips, size=min(2, len(malicious_ips)),
                            replace=False))
            for _ in range(num_groups)
        ]
        for name, group in zip(malicious_names, groups):
            if rng.random() < config.malicious_clustering:
                pool = group_ips[group]
            else:
                pool = malicious_ips
            resolution[name] = str(pool[int(rng.integers(len(pool)))])

    labels = {name: BENIGN for name in benign_names}
    labels.update({name: MALICIOUS for name in malicious_names})

    ordered = list(rng.permutation(benign_names + malicious_names))

    records = []
    timestamp = config.start_timestamp
    for name in ordered:
        if labels[name] == MALICIOUS and (
                rng.random() < config.malicious_clustering):
            pool = infected
        else:
            pool = clients
        num_queries = int(rng.integers(
            1, min(config.max_queries_per_domain, len(pool)) + 1
        ))
        for client in rng.choice(pool, size=num_queries, replace=False):
            timestamp += int(rng.integers(1, 30))
            records.append(
                DnsLogRecord(timestamp, str(client), str(name), resolution[name])
            )

    logger.info(
        'Generated %d records: %d benign, %d malicious domains',
        len(records), len(benign_names), len(malicious_names),
    )
    return records, labels


def write_labels(path_to_file: str, labels: Dict[str, str]) -> None:
    """Write labels as a two-column CSV `qname,label`."""

    data = pd.DataFrame(
        sorted(labels.items()), columns=['qname', 'label']
    )
    data.to_csv(path_to_file, index=False)


def read_labels(path_to_file: str) -> Dict[str, str]:

    data = pd.read_csv(path_to_file, dtype=str)
    return dict(zip(data['qname'], data['label']))
