import logging
from typing import List

import numpy as np

from ..Exceptions import InvalidParameterError, UmAucError
from .Bag import Bag, BagCollection

logger = logging.getLogger(__name__)

class SingleClassPoolError(UmAucError, ValueError):
    pass

## Draws m bags from a labeled pool.
##
## Each instance of bag i is drawn by first flipping a pi_i-coin for its class,
## then picking uniformly with replacement from that class's part of the pool,
## so the instances of a bag are i.i.d. from pi_i p_P + (1 - pi_i) p_N.
## \param[in] pool_features - An (N, d) array.
## \param[in] pool_labels - A length-N array of +1/-1 labels.
## \param[in] priors - The class prior of each bag.
## \param[in] sizes - The number of instances in each bag.
## \return The bags sorted by descending prior and numbered 1..m in that order.
##         Bags with equal priors keep their input order.
def synthesize_bags(pool_features, pool_labels, priors: List[float], sizes: List[int], rng_seed: int) -> BagCollection:
    # VERIFY THE POOL.
    pool_features = np.asarray(pool_features, dtype = np.float64)
    pool_labels = np.asarray(pool_labels)
    positive_pool = pool_features[pool_labels == 1]
    negative_pool = pool_features[pool_labels == -1]
    if len(positive_pool) == 0 or len(negative_pool) == 0:
        raise SingleClassPoolError('single-class pool: the pool must contain both positive and negative instances.')
    if len(priors) != len(sizes):
        raise InvalidParameterError(f'Got {len(priors)} priors but {len(sizes)} sizes.')
    if any(size < 1 for size in sizes):
        raise InvalidParameterError(f'Every bag needs at least one instance, got sizes {sizes}.')

    # DRAW THE BAGS.
    rng = np.random.default_rng(rng_seed)
    drawn = []
    for prior, size in zip(priors, sizes):
        is_positive = rng.random(size) < prior
        positive_picks = rng.integers(len(positive_pool), size = size)
        negative_picks = rng.integers(len(negative_pool), size = size)
        features = np.where(is_positive[:, None], positive_pool[positive_picks], negative_pool[negative_picks])
        labels = np.where(is_positive, 1, -1).astype(np.int8)
        drawn.append((float(prior), features, labels))
        logger.debug(f'Drew a bag of {size} instances with prior {prior:.4f} ({int(is_positive.sum())} positive).')

    # NUMBER THE BAGS BY DESCENDING PRIOR.
    order = np.argsort(-np.array(priors, dtype = np.float64), kind = 'stable')
    bags = []
    for rank, index in enumerate(order, start = 1):
        prior, features, labels = drawn[index]
        bags.append(Bag(rank, features, labels, prior))
    return BagCollection(bags)
