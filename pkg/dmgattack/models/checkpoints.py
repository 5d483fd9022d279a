# -*- coding: utf-8 -*-
#
# checkpoints.py
#

"""
JSON checkpoints of trained models and CSV query datasets.
"""

import json

from dataclasses import asdict

import numpy as np
import pandas as pd

from .surrogate import SurrogateModel
from .target import TargetModel, TrainingHyper


SCHEMA_VERSION = 1


def _check_schema(document: dict, kind: str) -> None:

    if document.get('schema_version') != SCHEMA_VERSION:
        raise ValueError(
            f'Unsupported checkpoint schema {document.get("schema_version")!r}, '
            f'expected {SCHEMA_VERSION}'
        )
    if document.get('kind') != kind:
        raise ValueError(f'Checkpoint holds a {document.get("kind")!r}, not {kind!r}')


def target_to_json(model: TargetModel) -> str:

    document = {
        'schema_version': SCHEMA_VERSION,
        'kind': 'target',
        'seed': model.seed,
        'hyper': asdict(model.hyper),
        'train_accuracy': model.train_accuracy,
        'test_accuracy': model.test_accuracy,
        'weights': {
            key: getattr(model, key).tolist() for key in ('W1', 'b1', 'W2', 'b2')
        },
    }
    return json.dumps(document, sort_keys=True)


def target_from_json(text: str) -> TargetModel:

    document = json.loads(text)
    _check_schema(document, 'target')

    weights = {
        key: np.asarray(value, dtype=float)
        for key, value in document['weights'].items()
    }
    return TargetModel(
        hyper=TrainingHyper(**document['hyper']),
        seed=document['seed'],
        train_accuracy=document['train_accuracy'],
        test_accuracy=document['test_accuracy'],
        **weights,
    )


def surrogate_to_json(model: SurrogateModel) -> str:

    document = {
        'schema_version': SCHEMA_VERSION,
        'kind': 'surrogate',
        'fingerprint': model.fingerprint,
        'training_accuracy': model.training_accuracy,
        'validation_accuracy': model.validation_accuracy,
        'W': np.asarray(model.W).tolist(),
    }
    return json.dumps(document, sort_keys=True)


def surrogate_from_json(text: str) -> SurrogateModel:

    document = json.loads(text)
    _check_schema(document, 'surrogate')

    W = np.asarray(document['W'], dtype=float)
    W.setflags(write=False)
    return SurrogateModel(
        W=W,
        fingerprint=document['fingerprint'],
        training_accuracy=document['training_accuracy'],
        validation_accuracy=document['validation_accuracy'],
    )


def save_checkpoint(path_to_file: str, model) -> None:

    if isinstance(model, TargetModel):
        text = target_to_json(model)
    elif isinstance(model, SurrogateModel):
        text = surrogate_to_json(model)
    else:
        raise TypeError(f'Cannot checkpoint a {type(model).__name__}')

    with open(path_to_file, 'w') as outfile:
        outfile.write(text)


def load_checkpoint(path_to_file: str):
    """Load a target or surrogate checkpoint."""

    with open(path_to_file, 'r') as infile:
        text = infile.read()

    kind = json.loads(text).get('kind')
    if kind == 'target':
        return target_from_json(text)
    if kind == 'surrogate':
        return surrogate_from_json(text)
    raise ValueError(f'Unknown checkpoint kind {kind!r}')


def write_query_dataset(path_to_file: str, query_dataset: pd.DataFrame) -> None:
    query_dataset.loc[:, ['node_id', 'label']].to_csv(path_to_file, index=False)


def read_query_dataset(path_to_file: str) -> pd.DataFrame:

    query_dataset = pd.read_csv(path_to_file, dtype={'node_id': int, 'label': str})
    unknown = set(query_dataset['label']) - {'benign', 'malicious'}
    if unknown:
        raise ValueError(f'Unknown labels in query dataset: {sorted(unknown)}')
    return query_dataset
