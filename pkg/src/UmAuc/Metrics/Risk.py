from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from ..Exceptions import InvalidParameterError, UmAucError
from .Auc import UndefinedAucError

class EmptyBagError(UmAucError, ValueError):
    pass

## A pairwise surrogate for the ranking error, evaluated at the
## score difference z = f(x) - f(x') of a (higher-ranked, lower-ranked) pair.
##  - ZERO_ONE: 1 if z < 0, else 0. Ties cost nothing.
##  - SQUARE: (1 - z)^2.
##  - MARGIN_SQUARE: (margin - z)^2.
@dataclass(frozen = True)
class SurrogateLoss:
    class Kind(Enum):
        ZERO_ONE = 'zero_one'
        SQUARE = 'square'
        MARGIN_SQUARE = 'margin_square'

    kind: Kind = Kind.SQUARE
    margin: float = 1.0

    def __post_init__(self):
        if self.kind == SurrogateLoss.Kind.MARGIN_SQUARE and self.margin <= 0:
            raise InvalidParameterError(f'The margin must be positive, got {self.margin}.')

    def __call__(self, z):
        z = np.asarray(z, dtype = np.float64)
        if self.kind == SurrogateLoss.Kind.ZERO_ONE:
            return (z < 0).astype(np.float64)
        elif self.kind == SurrogateLoss.Kind.SQUARE:
            return (1.0 - z) ** 2
        return (self.margin - z) ** 2

ZERO_ONE = SurrogateLoss(SurrogateLoss.Kind.ZERO_ONE)
SQUARE = SurrogateLoss(SurrogateLoss.Kind.SQUARE)

## \return The mean loss over every pair (x in upper, x' in lower) of l(f(x) - f(x')).
def mean_pairwise_loss(upper_scores, lower_scores, loss: SurrogateLoss) -> float:
    upper_scores = np.asarray(upper_scores, dtype = np.float64).ravel()
    lower_scores = np.asarray(lower_scores, dtype = np.float64).ravel()
    if upper_scores.size == 0 or lower_scores.size == 0:
        raise EmptyBagError('Pairwise risks need both sides to be non-empty.')
    return float(np.mean(loss(upper_scores[:, None] - lower_scores[None, :])))

## The empirical PN risk: the mean loss over all (positive, negative) pairs.
def empirical_pn_risk(scores, labels, loss: SurrogateLoss) -> float:
    scores = np.asarray(scores, dtype = np.float64)
    labels = np.asarray(labels)
    positives = scores[labels == 1]
    negatives = scores[labels == -1]
    if positives.size == 0 or negatives.size == 0:
        raise UndefinedAucError(f'The PN risk is undefined with {positives.size} positives and {negatives.size} negatives.')
    return mean_pairwise_loss(positives, negatives, loss)

## The empirical U^2 risk between two bags, treating the higher-ranked bag i
## as pseudo-positive and bag j as pseudo-negative.
def empirical_u2_risk(bag_i_scores, bag_j_scores, loss: SurrogateLoss) -> float:
    return mean_pairwise_loss(bag_i_scores, bag_j_scores, loss)

## The empirical U^m risk, sum over i < j of z_ij times the U^2 risk of bags i and j.
## \param[in] bag_scores - The scores of each bag, in bag id order.
## \param[in] weights - An (m, m) array; only entries above the diagonal are used.
##            Pairs with zero weight are skipped.
def empirical_um_risk(bag_scores: Sequence, weights, loss: SurrogateLoss) -> float:
    m_bags = len(bag_scores)
    weights = np.asarray(weights, dtype = np.float64)
    if weights.shape != (m_bags, m_bags):
        raise InvalidParameterError(f'Expected an ({m_bags}, {m_bags}) weight matrix, got {weights.shape}.')
    pair_weights = weights[np.triu_indices(m_bags, k = 1)]
    if np.any(pair_weights < 0):
        raise InvalidParameterError('Pair weights z_ij must be non-negative.')
    if not np.any(pair_weights > 0):
        raise InvalidParameterError('At least one pair weight z_ij must be positive.')

    risk = 0.0
    for i in range(m_bags):
        for j in range(i + 1, m_bags):
            if weights[i, j] > 0:
                risk += weights[i, j] * empirical_u2_risk(bag_scores[i], bag_scores[j], loss)
    return risk

## The empirical risk of surrogate label k computed directly on the pooled
## split: bags 1..k against bags k+1..m.
## \param[in] scores - Pooled scores (for the head of label k).
## \param[in] bag_ids - The 1-based bag id of each score.
def empirical_label_risk(scores, bag_ids, k: int, loss: SurrogateLoss) -> float:
    scores = np.asarray(scores, dtype = np.float64)
    bag_ids = np.asarray(bag_ids)
    return mean_pairwise_loss(scores[bag_ids <= k], scores[bag_ids > k], loss)
