## The direct pairwise solver for the weighted U^m risk.
##
## It minimizes sum over i < j of z_ij / (n_i n_j) sum_{x in U_i, x' in U_j} (1 - f(x) + f(x'))^2
## by gradient descent, touching every cross-bag pair each step. It only exists
## to check the min-max solver on small problems, so it refuses problems above
## a pair budget.
from dataclasses import dataclass, field
import logging
from typing import List, Optional

import numpy as np

from .Bags.Bag import BagCollection
from .Exceptions import InvalidParameterError, UmAucError
from .Metrics.Risk import SQUARE, empirical_um_risk
from .Reduction import build_plan
from .Scorers.Optimizer import SgdOptimizer
from .Scorers.Scorer import Scorer
from .TrainConfig import checked_config_values

logger = logging.getLogger(__name__)

DEFAULT_PAIR_CAP = 4_000_000

class PairBudgetExceededError(UmAucError):
    pass

@dataclass(frozen = True)
class PairwiseConfig:
    ## An (m, m) array of pair weights z_ij, or None for the weights implied by the bag sizes.
    weights: Optional[tuple] = None
    epochs: int = 200
    lr: float = 0.05
    momentum: float = 0.0
    weight_decay: float = 0.0
    ## Full-batch gradient descent; otherwise batch_pairs random pairs per step.
    full_batch: bool = True
    batch_pairs: int = 4096
    pair_cap: int = DEFAULT_PAIR_CAP
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise InvalidParameterError(f'epochs must be non-negative, got {self.epochs}.')
        if self.lr <= 0:
            raise InvalidParameterError(f'lr must be positive, got {self.lr}.')
        if self.batch_pairs < 1 or self.pair_cap < 1:
            raise InvalidParameterError('batch_pairs and pair_cap must be positive.')
        if self.weights is not None:
            weights = np.asarray(self.weights, dtype = np.float64)
            upper = weights[np.triu_indices(weights.shape[0], k = 1)]
            if np.any(upper < 0) or not np.any(upper > 0):
                raise InvalidParameterError('Pair weights must be non-negative and not all zero.')

    def to_dict(self) -> dict:
        values = dict(self.__dict__)
        if self.weights is not None:
            values['weights'] = np.asarray(self.weights).tolist()
        return values

    @classmethod
    def from_dict(cls, values: dict):
        values = checked_config_values(cls, values)
        if values.get('weights') is not None:
            values['weights'] = tuple(tuple(row) for row in values['weights'])
        return cls(**values)

## Records the pairwise risk after every epoch.
@dataclass
class PairwiseTrace:
    risks: List[float] = field(default_factory = list)

## \return The gradient of the weighted pairwise square risk with respect to
##         every score, per bag.
## \param[in] bag_scores - The scores of each bag, in bag id order.
## \param[in] weights - The (m, m) pair weights.
def pairwise_score_gradients(bag_scores, weights) -> List[np.ndarray]:
    gradients = [np.zeros(len(scores)) for scores in bag_scores]
    m_bags = len(bag_scores)
    for i in range(m_bags):
        for j in range(i + 1, m_bags):
            if weights[i, j] == 0:
                continue
            residuals = 1.0 - bag_scores[i][:, None] + bag_scores[j][None, :]
            scale = weights[i, j] / residuals.size
            gradients[i] -= 2 * scale * residuals.sum(axis = 1)
            gradients[j] += 2 * scale * residuals.sum(axis = 0)
    return gradients

## \return The weighted pairwise square risk and its per-score gradients.
def pairwise_risk(bag_scores, weights):
    return empirical_um_risk(bag_scores, weights, SQUARE), pairwise_score_gradients(bag_scores, weights)

## Trains a single-head model on the weighted pairwise square risk.
## \return The trained model (updated in place) and the risk trace.
def train_pairwise(collection: BagCollection, model: Scorer, config: PairwiseConfig):
    # VERIFY THE PROBLEM SIZE.
    if model.head_count != 1:
        raise InvalidParameterError(f'The pairwise solver trains a single-head model, got {model.head_count} heads.')
    sizes = np.array(collection.sizes, dtype = np.int64)
    pair_count = int((np.sum(sizes) ** 2 - np.sum(sizes ** 2)) // 2)
    if pair_count > config.pair_cap:
        raise PairBudgetExceededError(f'The collection has {pair_count} cross-bag pairs, above the pairwise solver cap of {config.pair_cap}.')
    if config.weights is None:
        weights = build_plan(collection.sizes).pair_weights
    else:
        weights = np.asarray(config.weights, dtype = np.float64)
        if weights.shape != (collection.m_bags, collection.m_bags):
            raise InvalidParameterError(f'Expected ({collection.m_bags}, {collection.m_bags}) pair weights, got {weights.shape}.')

    # TRAIN.
    features, _ = collection.pooled()
    boundaries = np.cumsum([0] + collection.sizes)
    optimizer = SgdOptimizer(config.momentum, config.weight_decay)
    rng = np.random.default_rng(config.seed)
    trace = PairwiseTrace()
    logger.info(f'Training the pairwise baseline on {pair_count} pairs for {config.epochs} epochs')
    for epoch in range(config.epochs):
        scores = model.forward(features)[:, 0]
        bag_scores = [scores[boundaries[i]:boundaries[i + 1]] for i in range(collection.m_bags)]
        if config.full_batch:
            risk, gradients = pairwise_risk(bag_scores, weights)
            upstream = np.concatenate(gradients)
            parameter_gradients = model.backward(features, upstream[:, None])
            optimizer.step(model, parameter_gradients, config.lr)
        else:
            risk = empirical_um_risk(bag_scores, weights, SQUARE)
            steps = max(1, int(np.ceil(pair_count / config.batch_pairs)))
            for _ in range(steps):
                upstream = _sampled_pair_gradients(features, boundaries, weights, model, config.batch_pairs, rng)
                optimizer.step(model, model.backward(features, upstream[:, None]), config.lr)
        trace.risks.append(risk)
        logger.debug(f'Pairwise epoch {epoch + 1}: risk {risk:.6f}')
    return model, trace

## An unbiased estimate of the pairwise score gradient from randomly drawn pairs.
## A pair (i, j) is drawn with probability proportional to z_ij, then one
## instance from each bag uniformly.
def _sampled_pair_gradients(features, boundaries, weights, model: Scorer, batch_pairs: int, rng: np.random.Generator):
    m_bags = len(boundaries) - 1
    upper_i, upper_j = np.triu_indices(m_bags, k = 1)
    pair_weights = weights[upper_i, upper_j]
    total_weight = pair_weights.sum()
    chosen_pairs = rng.choice(len(pair_weights), size = batch_pairs, p = pair_weights / total_weight)
    i = upper_i[chosen_pairs]
    j = upper_j[chosen_pairs]
    upper_rows = boundaries[i] + rng.integers(0, boundaries[i + 1] - boundaries[i])
    lower_rows = boundaries[j] + rng.integers(0, boundaries[j + 1] - boundaries[j])
    upper_scores = model.forward(features[upper_rows])[:, 0]
    lower_scores = model.forward(features[lower_rows])[:, 0]
    residuals = 1.0 - upper_scores + lower_scores
    upstream = np.zeros(len(features))
    np.add.at(upstream, upper_rows, -2 * total_weight * residuals / batch_pairs)
    np.add.at(upstream, lower_rows, 2 * total_weight * residuals / batch_pairs)
    return upstream
