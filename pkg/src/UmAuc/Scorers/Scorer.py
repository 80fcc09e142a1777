from collections import OrderedDict
from typing import Dict, Iterator, Tuple

import numpy as np

from ..Exceptions import UmAucError
from ..Reduction import aggregate_scores

class ShapeMismatchError(UmAucError, ValueError):
    pass

## Gradients with the same names and shapes as a model's parameters.
class GradientBuffer:
    def __init__(self, shapes: Dict[str, Tuple[int, ...]]):
        self.gradients: Dict[str, np.ndarray] = OrderedDict(
            (name, np.zeros(shape)) for name, shape in shapes.items())
        ## How many backward passes have been added into this buffer since it was zeroed.
        self.accumulation_count = 0

    def zero(self):
        for gradient in self.gradients.values():
            gradient.fill(0.0)
        self.accumulation_count = 0

    ## Adds another buffer of the same layout into this one.
    def accumulate(self, other: 'GradientBuffer'):
        for name, gradient in other.gradients.items():
            self.gradients[name] += gradient
        self.accumulation_count += max(1, other.accumulation_count)

    def scale(self, factor: float):
        for gradient in self.gradients.values():
            gradient *= factor

    @property
    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(gradient)) for gradient in self.gradients.values())

    def __getitem__(self, name: str) -> np.ndarray:
        return self.gradients[name]

    def items(self):
        return self.gradients.items()

## A differentiable map from feature vectors to head scores.
## Subclasses hold their parameters in an ordered name -> array mapping and
## implement the batch forward and backward passes by hand.
class Scorer:
    ## The model kind written into checkpoints.
    kind = None

    def __init__(self, input_dimension: int, head_count: int):
        self.input_dimension = input_dimension
        self.head_count = head_count
        self.parameters: Dict[str, np.ndarray] = OrderedDict()

    ## Computes the head scores.
    ## \param[in] x - A length-d feature vector, or an (n, d) batch.
    ## \return A length-(m-1) vector of head scores, or an (n, m-1) matrix for a batch.
    def forward(self, x) -> np.ndarray:
        batch, is_single = self._as_batch(x)
        scores = self._forward_batch(batch)[0]
        return scores[0] if is_single else scores

    ## Computes the gradient of sum_k upstream_k g_k(x) with respect to every
    ## parameter, summed over the batch.
    ## \param[in] x - A feature vector or batch, as for forward().
    ## \param[in] upstream - d(loss)/d(head scores), shaped like forward(x).
    def backward(self, x, upstream) -> GradientBuffer:
        batch, is_single = self._as_batch(x)
        upstream = np.asarray(upstream, dtype = np.float64)
        if is_single:
            upstream = upstream[None, :] if upstream.ndim == 1 else upstream
        if upstream.shape != (batch.shape[0], self.head_count):
            raise ShapeMismatchError(f'Upstream gradient has shape {upstream.shape}, expected {(batch.shape[0], self.head_count)}.')
        _, cache = self._forward_batch(batch)
        buffer = self.zero_gradients()
        self._backward_batch(batch, upstream, cache, buffer)
        buffer.accumulation_count = 1
        return buffer

    def zero_gradients(self) -> GradientBuffer:
        return GradientBuffer(self.parameter_shapes)

    @property
    def parameter_shapes(self) -> Dict[str, Tuple[int, ...]]:
        return OrderedDict((name, parameter.shape) for name, parameter in self.parameters.items())

    @property
    def parameter_count(self) -> int:
        return int(sum(parameter.size for parameter in self.parameters.values()))

    @property
    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(parameter)) for parameter in self.parameters.values())

    ## \return An independent copy of this model, for evaluation while training continues.
    def snapshot(self) -> 'Scorer':
        copy = self.__class__.__new__(self.__class__)
        copy.__dict__.update(self.__dict__)
        copy.parameters = OrderedDict((name, parameter.copy()) for name, parameter in self.parameters.items())
        return copy

    def named_parameters(self) -> Iterator[Tuple[str, np.ndarray]]:
        return iter(self.parameters.items())

    ## The hyperparameters needed to rebuild an empty model of this shape.
    def architecture(self) -> dict:
        return {'input_dimension': self.input_dimension, 'head_count': self.head_count}

    def _as_batch(self, x):
        x = np.asarray(x, dtype = np.float64)
        is_single = (x.ndim == 1)
        batch = x[None, :] if is_single else x
        if batch.ndim != 2 or batch.shape[1] != self.input_dimension:
            raise ShapeMismatchError(f'Expected features of dimension {self.input_dimension}, got shape {x.shape}.')
        return batch, is_single

    def _forward_batch(self, batch: np.ndarray):
        raise NotImplementedError

    def _backward_batch(self, batch: np.ndarray, upstream: np.ndarray, cache, buffer: GradientBuffer):
        raise NotImplementedError

## Draws parameters uniformly in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
def uniform_fan_in(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size = shape)

## The final ranking scorer f: the mean of a multi-head model's heads.
class AggregatedScorer:
    def __init__(self, model: Scorer):
        self.model = model

    ## \return f(x) for a single vector, or a length-n vector for a batch.
    def score(self, x):
        return aggregate_scores(self.model.forward(x))

    __call__ = score
