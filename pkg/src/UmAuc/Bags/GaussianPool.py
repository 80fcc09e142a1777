from dataclasses import dataclass
import math
from typing import Tuple

import numpy as np
from scipy.special import ndtr

from ..Exceptions import InvalidParameterError

## A labeled pool of instances. The training split is what bags are drawn from;
## the test split is held out and never enters a bag.
@dataclass(frozen = True)
class LabeledPool:
    train_features: np.ndarray
    train_labels: np.ndarray
    test_features: np.ndarray
    test_labels: np.ndarray

    @property
    def dimension(self) -> int:
        return self.train_features.shape[1]

## Two isotropic Gaussian classes with a shared standard deviation.
## This is the desk-scale stand-in dataset; its Bayes AUC is known in closed form.
@dataclass(frozen = True)
class GaussianPoolSpec:
    dimension: int = 2
    mean_positive: Tuple[float, ...] = (1.0, 1.0)
    mean_negative: Tuple[float, ...] = (-1.0, -1.0)
    sigma: float = 1.0
    n_train: int = 4000
    n_test: int = 1000
    positive_fraction: float = 0.5

    def __post_init__(self):
        if len(self.mean_positive) != self.dimension or len(self.mean_negative) != self.dimension:
            raise InvalidParameterError(f'Class means must have dimension {self.dimension}.')
        if self.sigma <= 0:
            raise InvalidParameterError(f'sigma must be positive, got {self.sigma}.')
        if self.n_train < 2 or self.n_test < 2:
            raise InvalidParameterError('The pool needs at least 2 training and 2 test instances.')
        if not (0.0 < self.positive_fraction < 1.0):
            raise InvalidParameterError(f'The positive fraction must be in (0, 1), got {self.positive_fraction}.')

    ## Builds a spec with the default means extended to the given dimension:
    ## the positive mean is (+1, ..., +1) and the negative mean (-1, ..., -1).
    @staticmethod
    def with_dimension(dimension: int, **kwargs) -> 'GaussianPoolSpec':
        return GaussianPoolSpec(
            dimension = dimension,
            mean_positive = (1.0,) * dimension,
            mean_negative = (-1.0,) * dimension,
            **kwargs)

    ## \return The best achievable AUC, Phi(|mu+ - mu-| / (sigma * sqrt(2))).
    def bayes_auc(self) -> float:
        distance = np.linalg.norm(np.array(self.mean_positive) - np.array(self.mean_negative))
        return float(ndtr(distance / (self.sigma * math.sqrt(2.0))))

    def to_dict(self) -> dict:
        return {
            'dimension': self.dimension,
            'mean_positive': list(self.mean_positive),
            'mean_negative': list(self.mean_negative),
            'sigma': self.sigma,
            'n_train': self.n_train,
            'n_test': self.n_test,
            'positive_fraction': self.positive_fraction}

    @staticmethod
    def from_dict(values: dict) -> 'GaussianPoolSpec':
        values = dict(values)
        for key in ('mean_positive', 'mean_negative'):
            if key in values:
                values[key] = tuple(float(entry) for entry in values[key])
        unknown_keys = set(values) - set(GaussianPoolSpec.__dataclass_fields__)
        if unknown_keys:
            raise InvalidParameterError(f'Unknown Gaussian pool keys: {sorted(unknown_keys)}.')
        return GaussianPoolSpec(**values)

    ## Parses the command-line form "gaussian" or "gaussian:key=value,key=value".
    ## A "d" key changes the dimension and resets the means to +/-1 vectors.
    @staticmethod
    def parse(text: str) -> 'GaussianPoolSpec':
        name, _, arguments = text.partition(':')
        if name.strip().lower() != 'gaussian':
            raise InvalidParameterError(f'Unknown pool specification "{text}".')
        values = {}
        for argument in filter(None, arguments.split(',')):
            key, separator, value = argument.partition('=')
            if not separator:
                raise InvalidParameterError(f'Pool argument "{argument}" is not of the form key=value.')
            key = key.strip()
            if key in ('d', 'dimension'):
                values['dimension'] = int(value)
            elif key in ('n_train', 'n_test'):
                values[key] = int(value)
            elif key in ('sigma', 'positive_fraction'):
                values[key] = float(value)
            else:
                raise InvalidParameterError(f'Unknown pool argument "{key}".')
        dimension = values.pop('dimension', 2)
        return GaussianPoolSpec.with_dimension(dimension, **values)

## Generates the labeled pool. Both splits contain exactly the requested counts,
## with round(positive_fraction * n) positives in each. The test split is drawn
## first, so pools that differ only in n_train share the same test split.
def generate_pool(spec: GaussianPoolSpec, rng_seed: int) -> LabeledPool:
    rng = np.random.default_rng(rng_seed)
    test_features, test_labels = _draw_split(spec, spec.n_test, rng)
    train_features, train_labels = _draw_split(spec, spec.n_train, rng)
    return LabeledPool(train_features, train_labels, test_features, test_labels)

def _draw_split(spec: GaussianPoolSpec, count: int, rng: np.random.Generator):
    positive_count = min(max(1, round(spec.positive_fraction * count)), count - 1)
    negative_count = count - positive_count
    positives = np.array(spec.mean_positive) + spec.sigma * rng.standard_normal((positive_count, spec.dimension))
    negatives = np.array(spec.mean_negative) + spec.sigma * rng.standard_normal((negative_count, spec.dimension))
    features = np.concatenate([positives, negatives], axis = 0)
    labels = np.concatenate([np.ones(positive_count, dtype = np.int8), -np.ones(negative_count, dtype = np.int8)])

    # SHUFFLE THE SPLIT.
    order = rng.permutation(count)
    return features[order], labels[order]
