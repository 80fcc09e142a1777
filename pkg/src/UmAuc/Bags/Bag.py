from dataclasses import dataclass
from typing import Iterator, List, Optional

import numpy as np

from ..Exceptions import UmAucError

## DEFINE BAG-RELATED ERRORS.
class BagValidationError(UmAucError, ValueError):
    pass

## Raised when the asserted prior order does not hold.
class BagOrderingError(BagValidationError):
    pass

## Raised when the asserted priors are all the same, in which case
## no ranking information can be recovered from the bags.
class DegeneratePriorsError(BagValidationError):
    pass

## The hidden label value used when an instance does not come from a labeled pool.
NO_LABEL = 0

## A single feature vector, optionally with the label of the pool it was drawn from.
@dataclass(frozen = True)
class Instance:
    features: np.ndarray
    hidden_label: Optional[int] = None

## One unlabeled sample set U_i.
##
## The hidden labels are kept so synthesized bags can be evaluated,
## but they are stored privately and can only be reached through
## reveal_hidden_labels(). Training code only ever reads the features,
## the rank position (id) and the size.
class Bag:
    ## \param[in] id - The 1-based rank position of this bag. Bag 1 has the largest prior.
    ## \param[in] features - An (n, d) array of instances.
    ## \param[in] hidden_labels - An optional length-n array of +1/-1 labels,
    ##            with NO_LABEL (0) for instances that have no label.
    ## \param[in] true_prior - The prior used when this bag was synthesized, if known.
    def __init__(self, id: int, features, hidden_labels = None, true_prior: Optional[float] = None):
        # VERIFY THE FEATURES.
        features = np.array(features, dtype = np.float64)
        if features.ndim != 2:
            raise BagValidationError(f'Bag {id} features must be a 2-D array, got shape {features.shape}.')
        if features.shape[0] == 0:
            raise BagValidationError(f'Bag {id} is empty.')
        features.setflags(write = False)
        self.id = int(id)
        self._features = features

        # VERIFY THE HIDDEN LABELS.
        if hidden_labels is not None:
            hidden_labels = np.array(hidden_labels, dtype = np.int8)
            if hidden_labels.shape != (features.shape[0],):
                raise BagValidationError(f'Bag {id} has {features.shape[0]} instances but {hidden_labels.size} hidden labels.')
            if not np.isin(hidden_labels, (-1, NO_LABEL, 1)).all():
                raise BagValidationError(f'Bag {id} hidden labels must be +1, -1 or unlabeled.')
            hidden_labels.setflags(write = False)
        self._hidden_labels = hidden_labels

        # VERIFY THE PRIOR.
        if true_prior is not None:
            true_prior = float(true_prior)
            if not (0.0 <= true_prior <= 1.0):
                raise BagValidationError(f'Bag {id} prior {true_prior} is outside [0, 1].')
        self.true_prior = true_prior

    @property
    def features(self) -> np.ndarray:
        return self._features

    @property
    def size(self) -> int:
        return self._features.shape[0]

    @property
    def dimension(self) -> int:
        return self._features.shape[1]

    @property
    def has_hidden_labels(self) -> bool:
        return self._hidden_labels is not None

    ## \return The hidden labels of this bag, for evaluation and diagnostics only.
    ## Labels are +1/-1, or NO_LABEL for instances that carry none.
    def reveal_hidden_labels(self) -> Optional[np.ndarray]:
        return self._hidden_labels

    ## \return The fraction of labeled instances that are positive, or None
    ## if this bag carries no labels.
    def realized_positive_fraction(self) -> Optional[float]:
        if self._hidden_labels is None:
            return None
        labeled = self._hidden_labels[self._hidden_labels != NO_LABEL]
        if labeled.size == 0:
            return None
        return float(np.mean(labeled == 1))

    def instances(self) -> Iterator[Instance]:
        for index in range(self.size):
            label = None
            if self._hidden_labels is not None and self._hidden_labels[index] != NO_LABEL:
                label = int(self._hidden_labels[index])
            yield Instance(self._features[index], label)

    ## \return A copy of this bag with a different prior.
    def with_true_prior(self, true_prior: Optional[float]) -> 'Bag':
        return Bag(self.id, self._features, self._hidden_labels, true_prior)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Bag):
            return NotImplemented
        labels_match = (self._hidden_labels is None and other._hidden_labels is None) or \
            (self._hidden_labels is not None and other._hidden_labels is not None and
             np.array_equal(self._hidden_labels, other._hidden_labels))
        return self.id == other.id and \
            self.true_prior == other.true_prior and \
            labels_match and \
            np.array_equal(self._features, other._features)

    def __repr__(self) -> str:
        return f'Bag(id={self.id}, size={self.size}, true_prior={self.true_prior})'

## An ordered collection U_1, ..., U_m of bags whose class priors are
## known to be in descending order. Only the order is ever used for training.
class BagCollection:
    ## \param[in] bags - The bags. They are sorted by id; the ids must be a permutation of 1..m.
    def __init__(self, bags: List[Bag]):
        # VERIFY THERE ARE ENOUGH BAGS.
        if len(bags) < 2:
            raise BagValidationError(f'A bag collection needs at least 2 bags, got {len(bags)}.')
        bags = sorted(bags, key = lambda bag: bag.id)
        ids = [bag.id for bag in bags]
        if ids != list(range(1, len(bags) + 1)):
            raise BagValidationError(f'Bag ids must be a permutation of 1..{len(bags)}, got {ids}.')

        # VERIFY THE DIMENSIONS AGREE.
        dimensions = {bag.dimension for bag in bags}
        if len(dimensions) != 1:
            raise BagValidationError(f'Bags have different feature dimensions: {sorted(dimensions)}.')

        # VERIFY THE PRIOR ORDER.
        # Bags without a known prior are trusted to be in the asserted order.
        priors = [bag.true_prior for bag in bags]
        if all(prior is not None for prior in priors):
            for upper, lower in zip(bags, bags[1:]):
                if upper.true_prior < lower.true_prior:
                    raise BagOrderingError(
                        f'Bag {upper.id} has prior {upper.true_prior} but bag {lower.id} below it has prior {lower.true_prior}.')
            if not priors[0] > priors[-1]:
                raise DegeneratePriorsError(f'All bags have the same prior {priors[0]}; the ranking problem is unsolvable.')

        self.bags: List[Bag] = bags

    @property
    def m_bags(self) -> int:
        return len(self.bags)

    @property
    def dimension(self) -> int:
        return self.bags[0].dimension

    @property
    def sizes(self) -> List[int]:
        return [bag.size for bag in self.bags]

    @property
    def total_size(self) -> int:
        return sum(self.sizes)

    @property
    def true_priors(self) -> Optional[List[float]]:
        priors = [bag.true_prior for bag in self.bags]
        if any(prior is None for prior in priors):
            return None
        return priors

    @property
    def has_hidden_labels(self) -> bool:
        return all(bag.has_hidden_labels for bag in self.bags)

    ## \return The bag with the given 1-based id.
    def bag(self, bag_id: int) -> Bag:
        return self.bags[bag_id - 1]

    ## Stacks all the bags into one pooled sample.
    ## \return (features, bag_ids), where bag_ids[i] is the id of the bag
    ##         that pooled instance i came from.
    def pooled(self):
        features = np.concatenate([bag.features for bag in self.bags], axis = 0)
        bag_ids = np.concatenate([np.full(bag.size, bag.id, dtype = np.int64) for bag in self.bags])
        return features, bag_ids

    ## \return The pooled hidden labels, in the same order as pooled().
    def pooled_hidden_labels(self) -> np.ndarray:
        if not self.has_hidden_labels:
            raise BagValidationError('Not every bag in this collection carries hidden labels.')
        return np.concatenate([bag.reveal_hidden_labels() for bag in self.bags])

    ## \return A copy with the given true priors (listed by bag id).
    def with_true_priors(self, true_priors: Optional[List[float]]) -> 'BagCollection':
        if true_priors is None:
            return BagCollection([bag.with_true_prior(None) for bag in self.bags])
        if len(true_priors) != self.m_bags:
            raise BagValidationError(f'Expected {self.m_bags} priors, got {len(true_priors)}.')
        return BagCollection([bag.with_true_prior(prior) for bag, prior in zip(self.bags, true_priors)])

    def __iter__(self):
        return iter(self.bags)

    def __len__(self) -> int:
        return len(self.bags)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BagCollection):
            return NotImplemented
        return self.bags == other.bags
