import numpy as np

from .Scorer import GradientBuffer, Scorer, uniform_fan_in

## One linear map per head: g(x) = W x + bias, with W of shape (m - 1, d).
class LinearScorer(Scorer):
    kind = 'linear'

    ## \param[in] seed - Seeds the initialization. None leaves every parameter at zero.
    def __init__(self, input_dimension: int, head_count: int, seed = None):
        super().__init__(input_dimension, head_count)
        if seed is None:
            self.parameters['weight'] = np.zeros((head_count, input_dimension))
            self.parameters['bias'] = np.zeros(head_count)
        else:
            rng = np.random.default_rng(seed)
            self.parameters['weight'] = uniform_fan_in(rng, (head_count, input_dimension), input_dimension)
            self.parameters['bias'] = uniform_fan_in(rng, (head_count,), input_dimension)

    def _forward_batch(self, batch: np.ndarray):
        return batch @ self.parameters['weight'].T + self.parameters['bias'], None

    def _backward_batch(self, batch: np.ndarray, upstream: np.ndarray, cache, buffer: GradientBuffer):
        buffer['weight'][...] = upstream.T @ batch
        buffer['bias'][...] = upstream.sum(axis = 0)
