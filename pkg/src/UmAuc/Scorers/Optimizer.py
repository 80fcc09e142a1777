import logging
from typing import Dict, Optional

import numpy as np

from ..Exceptions import InvalidParameterError, UmAucError
from .Scorer import GradientBuffer, Scorer

logger = logging.getLogger(__name__)

class NonFiniteGradientError(UmAucError):
    pass

## Stochastic gradient descent with momentum and weight decay:
##   g <- grad + weight_decay * param
##   v <- momentum * v + g
##   param <- param - lr * v
class SgdOptimizer:
    def __init__(self, momentum: float = 0.0, weight_decay: float = 0.0):
        if not (0.0 <= momentum < 1.0):
            raise InvalidParameterError(f'Momentum must be in [0, 1), got {momentum}.')
        if weight_decay < 0:
            raise InvalidParameterError(f'Weight decay must be non-negative, got {weight_decay}.')
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocities: Optional[Dict[str, np.ndarray]] = None

    ## Updates the model parameters in place.
    def step(self, model: Scorer, gradients: GradientBuffer, lr: float) -> Scorer:
        # VERIFY THE STEP.
        if lr <= 0:
            raise InvalidParameterError(f'The learning rate must be positive, got {lr}.')
        if not gradients.is_finite:
            non_finite = [name for name, gradient in gradients.items() if not np.all(np.isfinite(gradient))]
            raise NonFiniteGradientError(f'Non-finite gradients in parameters {non_finite}; aborting the update.')
        if self.velocities is None:
            self.velocities = {name: np.zeros_like(parameter) for name, parameter in model.parameters.items()}

        # UPDATE EVERY PARAMETER.
        for name, parameter in model.parameters.items():
            direction = gradients[name] + self.weight_decay * parameter
            if self.momentum > 0:
                velocity = self.velocities[name]
                velocity *= self.momentum
                velocity += direction
                direction = velocity
            parameter -= lr * direction
        return model

## Applies one SGD update to the model.
## Momentum carries across steps only when the same optimizer is passed in each time.
def sgd_step(model: Scorer, gradients: GradientBuffer, lr: float, momentum: float = 0.0, weight_decay: float = 0.0,
        optimizer: Optional[SgdOptimizer] = None) -> Scorer:
    if optimizer is None:
        optimizer = SgdOptimizer(momentum, weight_decay)
    return optimizer.step(model, gradients, lr)
