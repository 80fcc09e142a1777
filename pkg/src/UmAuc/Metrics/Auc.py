from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from ..Exceptions import InvalidParameterError, UmAucError

class UndefinedAucError(UmAucError, ValueError):
    pass

## One scored instance with its binary label.
@dataclass(frozen = True)
class ScoredSample:
    score: float
    label: int

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise InvalidParameterError(f'Scores must be finite, got {self.score}.')
        if self.label not in (1, -1):
            raise InvalidParameterError(f'Labels must be +1 or -1, got {self.label}.')

## \return (scores, labels) as float and integer arrays from a list of ScoredSample.
def unpack_samples(samples):
    scores = np.array([sample.score for sample in samples], dtype = np.float64)
    labels = np.array([sample.label for sample in samples], dtype = np.int64)
    return scores, labels

## Computes the AUC, the fraction of (positive, negative) pairs in which the
## positive instance is scored higher, with half credit for ties.
## This uses the rank-sum (Mann-Whitney) form with average ranks for ties,
## which equals the pairwise count exactly.
## \param[in] scores - The scores.
## \param[in] labels - +1/-1 labels in the same order.
def auc_exact(scores, labels) -> float:
    scores = np.asarray(scores, dtype = np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise InvalidParameterError(f'Got {scores.size} scores but {labels.size} labels.')
    if not np.all(np.isfinite(scores)):
        raise InvalidParameterError('Scores must be finite.')
    if not np.all((labels == 1) | (labels == -1)):
        raise InvalidParameterError('Labels must be +1 or -1.')
    is_positive = (labels == 1)
    positive_count = int(is_positive.sum())
    negative_count = int((labels == -1).sum())
    if positive_count == 0 or negative_count == 0:
        raise UndefinedAucError(f'AUC is undefined with {positive_count} positives and {negative_count} negatives.')

    ranks = rankdata(scores, method = 'average')
    u_statistic = ranks[is_positive].sum() - positive_count * (positive_count + 1) / 2.0
    return float(u_statistic / (positive_count * negative_count))

## Computes the AUC of a list of ScoredSample.
def auc_of_samples(samples) -> float:
    return auc_exact(*unpack_samples(samples))

## Computes the macro AUC over the m - 1 surrogate labels.
## Label k treats bags 1..k as positive and bags k+1..m as negative,
## and is scored by head k.
## \param[in] head_scores - An (n, m - 1) array; column k - 1 holds head k's scores.
## \param[in] bag_ids - The 1-based bag id of each row.
def macro_auc(head_scores, bag_ids) -> float:
    head_scores = np.asarray(head_scores, dtype = np.float64)
    if head_scores.ndim == 1:
        head_scores = head_scores[:, None]
    bag_ids = np.asarray(bag_ids)
    label_count = head_scores.shape[1]
    if label_count < 1:
        raise UndefinedAucError('Macro AUC needs at least one label.')
    return float(np.mean(label_aucs(head_scores, bag_ids)))

## \return The AUC of each head against its surrogate label.
def label_aucs(head_scores, bag_ids) -> np.ndarray:
    head_scores = np.asarray(head_scores, dtype = np.float64)
    if head_scores.ndim == 1:
        head_scores = head_scores[:, None]
    bag_ids = np.asarray(bag_ids)
    aucs = np.empty(head_scores.shape[1])
    for k in range(1, head_scores.shape[1] + 1):
        surrogate_labels = np.where(bag_ids <= k, 1, -1)
        aucs[k - 1] = auc_exact(head_scores[:, k - 1], surrogate_labels)
    return aucs
