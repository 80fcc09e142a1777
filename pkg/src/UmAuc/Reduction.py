## Turns a ranked bag collection into m - 1 binary labelling problems.
##
## Label k (k = 1..m-1) marks every instance of bags 1..k as positive and every
## instance of bags k+1..m as negative, so an instance of bag i carries the
## label vector (i - 1 zeros, then m - i ones). Minimizing the per-label risks
## of this multi-label problem minimizes the U^m risk with the pair weights
## z_ij that build_plan() derives from the bag sizes.
from dataclasses import dataclass
import json
from typing import List

import numpy as np

from .Exceptions import InvalidParameterError

## \return The 0/1 surrogate label vector of an instance of the given bag.
##         Bit k (1-based) is 1 iff bag_id <= k.
def surrogate_labels(bag_id: int, m_bags: int) -> np.ndarray:
    if m_bags < 2:
        raise InvalidParameterError(f'At least 2 bags are required, got m={m_bags}.')
    if not (1 <= bag_id <= m_bags):
        raise InvalidParameterError(f'Bag id {bag_id} is outside 1..{m_bags}.')
    return (bag_id <= np.arange(1, m_bags)).astype(np.int8)

## \return An (n, m - 1) 0/1 matrix of surrogate label vectors for pooled bag ids.
def surrogate_label_matrix(bag_ids, m_bags: int) -> np.ndarray:
    bag_ids = np.asarray(bag_ids)
    if bag_ids.size and (bag_ids.min() < 1 or bag_ids.max() > m_bags):
        raise InvalidParameterError(f'Bag ids must be within 1..{m_bags}.')
    return (bag_ids[:, None] <= np.arange(1, m_bags)[None, :]).astype(np.int8)

## \return The surrogate labels as +1/-1 signs, shape (n, m - 1).
def surrogate_signs(bag_ids, m_bags: int) -> np.ndarray:
    return 2.0 * surrogate_label_matrix(bag_ids, m_bags) - 1.0

## The sizes-derived quantities of the multi-label reduction.
@dataclass(frozen = True, eq = False)
class ReductionPlan:
    sizes: tuple
    ## p_k for k = 1..m-1, the share of the pooled sample in bags 1..k.
    mixing_fractions: np.ndarray
    ## An (m, m) upper-triangular array of the implied U^m weights z_ij.
    pair_weights: np.ndarray

    @property
    def m_bags(self) -> int:
        return len(self.sizes)

    @property
    def label_count(self) -> int:
        return len(self.sizes) - 1

    ## \return r_ijk = n_i n_j / (sum_{l<=k} n_l * sum_{l>k} n_l) for i <= k < j
    ##         (all 1-based), and 0 for any other triple.
    def r(self, i: int, j: int, k: int) -> float:
        if not (1 <= i <= k < j <= self.m_bags):
            return 0.0
        sizes = np.array(self.sizes, dtype = np.float64)
        upper_total = sizes[:k].sum()
        lower_total = sizes[k:].sum()
        return float(sizes[i - 1] * sizes[j - 1] / (upper_total * lower_total))

    ## \return An (m, m) array whose (i-1, j-1) entry is r_ijk.
    def label_weights(self, k: int) -> np.ndarray:
        if not (1 <= k < self.m_bags):
            raise InvalidParameterError(f'Label {k} is outside 1..{self.m_bags - 1}.')
        sizes = np.array(self.sizes, dtype = np.float64)
        weights = np.zeros((self.m_bags, self.m_bags))
        weights[:k, k:] = np.outer(sizes[:k], sizes[k:]) / (sizes[:k].sum() * sizes[k:].sum())
        return weights

    def to_dict(self) -> dict:
        z_pairs = []
        for i in range(self.m_bags):
            for j in range(i + 1, self.m_bags):
                z_pairs.append([i + 1, j + 1, float(self.pair_weights[i, j])])
        return {
            'm': self.m_bags,
            'sizes': list(self.sizes),
            'p': [float(p) for p in self.mixing_fractions],
            'z_pairs': z_pairs}

    ## Writes the debugging dump of this plan.
    def to_json(self, filepath: str):
        with open(filepath, 'w') as json_file:
            json.dump(self.to_dict(), json_file, indent = 2)

## Builds the reduction plan from the bag sizes n_1..n_m (in bag id order).
def build_plan(sizes: List[int]) -> ReductionPlan:
    if len(sizes) < 2:
        raise InvalidParameterError(f'A reduction needs at least 2 bags, got {len(sizes)}.')
    if any(size < 1 for size in sizes):
        raise InvalidParameterError(f'Every bag needs at least one instance, got sizes {list(sizes)}.')

    # COMPUTE THE MIXING FRACTIONS.
    m_bags = len(sizes)
    size_array = np.array(sizes, dtype = np.float64)
    cumulative = np.cumsum(size_array)
    total = cumulative[-1]
    mixing_fractions = cumulative[:-1] / total

    # COMPUTE THE IMPLIED PAIR WEIGHTS.
    # z_ij = sum over k with i <= k < j of r_ijk / (m - 1).
    pair_weights = np.zeros((m_bags, m_bags))
    for k in range(1, m_bags):
        upper_total = cumulative[k - 1]
        lower_total = total - upper_total
        pair_weights[:k, k:] += np.outer(size_array[:k], size_array[k:]) / (upper_total * lower_total)
    pair_weights /= (m_bags - 1)

    mixing_fractions.setflags(write = False)
    pair_weights.setflags(write = False)
    return ReductionPlan(tuple(int(size) for size in sizes), mixing_fractions, pair_weights)

## Aggregates head scores into the final ranking score, the mean over heads.
## \param[in] head_scores - A length-(m-1) vector, or an (n, m-1) matrix of
##            per-instance head scores.
def aggregate_scores(head_scores):
    head_scores = np.asarray(head_scores, dtype = np.float64)
    if head_scores.ndim == 0 or head_scores.shape[-1] == 0:
        raise InvalidParameterError('Cannot aggregate an empty vector of head scores.')
    aggregate = head_scores.mean(axis = -1)
    if aggregate.ndim == 0:
        return float(aggregate)
    return aggregate
