from typing import Sequence

import numpy as np

from ..Exceptions import InvalidParameterError
from .Scorer import GradientBuffer, Scorer, uniform_fan_in

DEFAULT_HIDDEN_WIDTHS = (64, 64)

def relu(values: np.ndarray) -> np.ndarray:
    return np.maximum(values, 0.0)

## A multi-layer perceptron with a shared rectifier trunk and one affine head
## per surrogate label. With hidden widths (64, 64) the trunk is
## d -> 64 -> 64 and the heads map the last 64 units to m - 1 scores.
##
## Parameters are named trunk_weight_<l>/trunk_bias_<l> for trunk layer l
## (0-based) and head_weight/head_bias for the stacked heads.
class MlpScorer(Scorer):
    kind = 'mlp'

    ## \param[in] hidden_widths - The widths of the trunk layers after the input.
    ## \param[in] seed - Seeds the initialization. None leaves every parameter at zero.
    def __init__(self, input_dimension: int, head_count: int, hidden_widths: Sequence[int] = DEFAULT_HIDDEN_WIDTHS, seed = None):
        super().__init__(input_dimension, head_count)
        hidden_widths = tuple(int(width) for width in hidden_widths)
        if len(hidden_widths) == 0 or any(width < 1 for width in hidden_widths):
            raise InvalidParameterError(f'The trunk needs at least one layer of positive width, got {hidden_widths}.')
        self.hidden_widths = hidden_widths

        # CREATE THE TRUNK AND HEAD PARAMETERS.
        rng = np.random.default_rng(seed) if seed is not None else None
        widths = (input_dimension,) + hidden_widths
        for layer, (fan_in, fan_out) in enumerate(zip(widths, widths[1:])):
            self.parameters[f'trunk_weight_{layer}'] = self._initial((fan_out, fan_in), fan_in, rng)
            self.parameters[f'trunk_bias_{layer}'] = self._initial((fan_out,), fan_in, rng)
        self.parameters['head_weight'] = self._initial((head_count, widths[-1]), widths[-1], rng)
        self.parameters['head_bias'] = self._initial((head_count,), widths[-1], rng)

    @property
    def layer_count(self) -> int:
        return len(self.hidden_widths)

    def architecture(self) -> dict:
        architecture = super().architecture()
        architecture['hidden_widths'] = list(self.hidden_widths)
        return architecture

    @staticmethod
    def _initial(shape, fan_in: int, rng) -> np.ndarray:
        if rng is None:
            return np.zeros(shape)
        return uniform_fan_in(rng, shape, fan_in)

    def _forward_batch(self, batch: np.ndarray):
        # RUN THE TRUNK.
        # The cache keeps each layer's input and pre-activation for the backward pass.
        cache = []
        activations = batch
        for layer in range(self.layer_count):
            pre_activations = activations @ self.parameters[f'trunk_weight_{layer}'].T + self.parameters[f'trunk_bias_{layer}']
            cache.append((activations, pre_activations))
            activations = relu(pre_activations)

        # RUN THE HEADS.
        scores = activations @ self.parameters['head_weight'].T + self.parameters['head_bias']
        return scores, (cache, activations)

    def _backward_batch(self, batch: np.ndarray, upstream: np.ndarray, cache, buffer: GradientBuffer):
        layer_cache, trunk_output = cache

        # BACKPROPAGATE THROUGH THE HEADS.
        buffer['head_weight'][...] = upstream.T @ trunk_output
        buffer['head_bias'][...] = upstream.sum(axis = 0)
        d_activations = upstream @ self.parameters['head_weight']

        # BACKPROPAGATE THROUGH THE TRUNK.
        for layer in reversed(range(self.layer_count)):
            layer_input, pre_activations = layer_cache[layer]
            d_pre_activations = d_activations * (pre_activations > 0)
            buffer[f'trunk_weight_{layer}'][...] = d_pre_activations.T @ layer_input
            buffer[f'trunk_bias_{layer}'][...] = d_pre_activations.sum(axis = 0)
            d_activations = d_pre_activations @ self.parameters[f'trunk_weight_{layer}']
