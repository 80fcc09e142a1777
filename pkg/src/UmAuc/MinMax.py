## The square-surrogate saddle-point objective of one surrogate label.
##
## For a label with pseudo-positive scores s+ and pseudo-negative scores s-,
## the mean pairwise square loss splits exactly into
##   A = mean (s+ - a)^2,  B = mean (s- - b)^2,  C = (margin - a + b)^2
## where a and b are the side means. C is replaced by its variational form
## max over alpha of 2 alpha (margin - a + b) - alpha^2, which turns the
## pairwise objective into an expectation over single samples z = (x, y):
##   H = (1-p)(s-a)^2 [y=+1] + p(s-b)^2 [y=-1] - p(1-p) alpha^2
##       + 2 alpha (p(1-p) margin + p s [y=-1] - (1-p) s [y=+1])
## with p the pseudo-positive share of the pooled sample. Its mean over the
## pooled sample is p(1-p) (A + B + C) at the optimal (a, b, alpha).
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .Exceptions import InvalidParameterError, UmAucError
from .Metrics.Risk import EmptyBagError

DEFAULT_MARGIN = 1.0

## The auxiliary saddle-point variables of every surrogate label.
## a and b track the pseudo-positive and pseudo-negative mean scores and are
## minimized over; alpha is maximized over and kept non-negative in margin mode.
@dataclass(eq = False)
class MinMaxState:
    a: np.ndarray
    b: np.ndarray
    alpha: np.ndarray
    margin: float = DEFAULT_MARGIN
    constrained: bool = True
    step_count: int = 0
    epoch_count: int = 0

    def __post_init__(self):
        self.a = np.array(self.a, dtype = np.float64)
        self.b = np.array(self.b, dtype = np.float64)
        self.alpha = np.array(self.alpha, dtype = np.float64)
        if not (self.a.shape == self.b.shape == self.alpha.shape) or self.a.ndim != 1:
            raise InvalidParameterError('a, b and alpha must be vectors of the same length.')
        if self.constrained and self.margin <= 0:
            raise InvalidParameterError(f'The margin must be positive in margin mode, got {self.margin}.')
        if self.constrained:
            self.alpha = np.maximum(self.alpha, 0.0)

    ## \return A state with every auxiliary variable at zero.
    @staticmethod
    def zeros(label_count: int, margin: float = DEFAULT_MARGIN, constrained: bool = True) -> 'MinMaxState':
        return MinMaxState(np.zeros(label_count), np.zeros(label_count), np.zeros(label_count), margin, constrained)

    @property
    def label_count(self) -> int:
        return self.a.size

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b)) and np.all(np.isfinite(self.alpha)))

    ## \return An independent copy that can be shared read-only with evaluation code.
    def snapshot(self) -> 'MinMaxState':
        return MinMaxState(self.a.copy(), self.b.copy(), self.alpha.copy(), self.margin, self.constrained, self.step_count, self.epoch_count)

    ## Sets alpha to its closed-form maximizer at the current (a, b).
    def reset_alpha(self):
        self.alpha = optimal_alpha(self.a, self.b, self.margin, self.constrained)

## The per-sample quantities of one label: the surrogate bit and the mixing fraction.
@dataclass(frozen = True)
class PerSampleContext:
    label: int
    y: int
    p: float

    def __post_init__(self):
        if self.y not in (1, -1):
            raise InvalidParameterError(f'The surrogate bit must be +1 or -1, got {self.y}.')
        if not (0.0 < self.p < 1.0):
            raise InvalidParameterError(f'The mixing fraction must be in (0, 1), got {self.p}.')

class SquareLossDecomposition(NamedTuple):
    a: float
    b: float
    A: float
    B: float
    C: float
    total: float

## Splits the mean pairwise square loss mean (margin - s+ + s-)^2 into A + B + C.
def decompose_square_loss(positive_scores, negative_scores, margin: float = DEFAULT_MARGIN) -> SquareLossDecomposition:
    positive_scores = np.asarray(positive_scores, dtype = np.float64).ravel()
    negative_scores = np.asarray(negative_scores, dtype = np.float64).ravel()
    if positive_scores.size == 0 or negative_scores.size == 0:
        raise EmptyBagError('Both sides of the decomposition must be non-empty.')
    a = float(positive_scores.mean())
    b = float(negative_scores.mean())
    A = float(np.mean((positive_scores - a) ** 2))
    B = float(np.mean((negative_scores - b) ** 2))
    C = (margin - a + b) ** 2
    return SquareLossDecomposition(a, b, A, B, C, A + B + C)

## The maximizer over alpha of 2 alpha (margin - a + b) - alpha^2.
## Unconstrained, this is margin - a + b, which is 1 - a + b at the default margin.
## In constrained (margin) mode alpha is restricted to alpha >= 0.
## Works elementwise on arrays.
def optimal_alpha(a, b, margin: float = DEFAULT_MARGIN, constrained: bool = True):
    alpha = margin - np.asarray(a, dtype = np.float64) + np.asarray(b, dtype = np.float64)
    if constrained:
        alpha = np.maximum(alpha, 0.0)
    if np.ndim(alpha) == 0:
        return float(alpha)
    return alpha

## Evaluates H elementwise. Every argument broadcasts, so this serves both a
## single sample and an (n, m - 1) batch of scores with per-label (a, b, alpha, p).
## \param[in] signs - The surrogate bits, +1 or -1.
def h_values(scores, signs, p, a, b, alpha, margin: float = DEFAULT_MARGIN):
    scores = np.asarray(scores, dtype = np.float64)
    is_positive = (np.asarray(signs) > 0)
    is_negative = ~is_positive
    return (1 - p) * (scores - a) ** 2 * is_positive \
        + p * (scores - b) ** 2 * is_negative \
        - p * (1 - p) * alpha ** 2 \
        + 2 * alpha * (p * (1 - p) * margin + p * scores * is_negative - (1 - p) * scores * is_positive)

class HGradients(NamedTuple):
    score: np.ndarray
    a: np.ndarray
    b: np.ndarray
    alpha: np.ndarray

## The exact partial derivatives of H, elementwise with the same broadcasting
## as h_values(). The dual ascent direction is +alpha.
def h_value_gradients(scores, signs, p, a, b, alpha, margin: float = DEFAULT_MARGIN) -> HGradients:
    scores = np.asarray(scores, dtype = np.float64)
    is_positive = (np.asarray(signs) > 0)
    is_negative = ~is_positive
    positive_residual = (1 - p) * (scores - a) * is_positive
    negative_residual = p * (scores - b) * is_negative
    d_score = 2 * positive_residual + 2 * negative_residual + 2 * alpha * (p * is_negative - (1 - p) * is_positive)
    d_a = -2 * positive_residual
    d_b = -2 * negative_residual
    d_alpha = -2 * p * (1 - p) * alpha + 2 * (p * (1 - p) * margin + p * scores * is_negative - (1 - p) * scores * is_positive)
    return HGradients(d_score, d_a, d_b, d_alpha)

## H for one sample of label ctx.label (1-based) under the given state.
def h_sample(context: PerSampleContext, score: float, state: MinMaxState) -> float:
    index = context.label - 1
    return float(h_values(score, context.y, context.p, state.a[index], state.b[index], state.alpha[index], state.margin))

## The partial derivatives of h_sample() with respect to the score, a, b and alpha.
def h_gradients(context: PerSampleContext, score: float, state: MinMaxState) -> HGradients:
    index = context.label - 1
    gradients = h_value_gradients(score, context.y, context.p, state.a[index], state.b[index], state.alpha[index], state.margin)
    return HGradients(*(float(value) for value in gradients))

class MinMaxStateError(UmAucError):
    pass

## Computes (a_k, b_k, alpha_k) in closed form from the full pooled sample:
## a_k and b_k are the mean head-k scores of the pseudo-positive and
## pseudo-negative sides, and alpha_k is the inner maximizer at those means.
## \param[in] head_scores - An (n, m - 1) array of head scores.
## \param[in] signs - An (n, m - 1) array of surrogate bits.
def batch_exact_state(head_scores, signs, margin: float = DEFAULT_MARGIN, constrained: bool = True) -> MinMaxState:
    head_scores = np.asarray(head_scores, dtype = np.float64)
    is_positive = (np.asarray(signs) > 0)
    positive_counts = is_positive.sum(axis = 0)
    negative_counts = (~is_positive).sum(axis = 0)
    if np.any(positive_counts == 0) or np.any(negative_counts == 0):
        raise MinMaxStateError('Every label needs both pseudo-positive and pseudo-negative samples.')
    a = (head_scores * is_positive).sum(axis = 0) / positive_counts
    b = (head_scores * ~is_positive).sum(axis = 0) / negative_counts
    return MinMaxState(a, b, optimal_alpha(a, b, margin, constrained), margin, constrained)
