## The min-max training loop.
##
## Every epoch shuffles the pooled instances of all bags and walks through them
## in minibatches. Each instance contributes the per-sample objective H to every
## surrogate label with its own surrogate bit; the scorer and the (a, b) means
## descend, alpha ascends. The final ranking score is the mean of the heads.
import csv
from dataclasses import dataclass, field
import logging
import time
from typing import Iterator, List, NamedTuple, Optional, Tuple

import numpy as np

from .Bags.Bag import BagCollection
from .Exceptions import InvalidParameterError, UmAucError
from .Metrics.Auc import auc_exact, macro_auc
from .MinMax import MinMaxState, batch_exact_state, h_value_gradients, h_values, optimal_alpha
from .Reduction import ReductionPlan, build_plan, surrogate_signs
from .Scorers.Checkpoint import write_checkpoint
from .Scorers.Optimizer import SgdOptimizer
from .Scorers.Scorer import AggregatedScorer, Scorer
from .TrainConfig import TrainConfig

logger = logging.getLogger(__name__)

## Keeps the surrogate-label draws of label sampling independent of the batch order draws.
LABEL_SAMPLING_STREAM = 1

class NonFiniteLossError(UmAucError):
    pass

## The metrics recorded at one evaluation point.
@dataclass
class TrainLogEntry:
    epoch: int
    train_macro_auc: float
    test_auc: Optional[float]
    label_losses: List[float]
    ## Training time of this epoch, without evaluation.
    seconds: float = 0.0

    ## \return The entry without its wall time, for determinism comparisons.
    def metrics(self) -> tuple:
        return (self.epoch, self.train_macro_auc, self.test_auc, tuple(self.label_losses))

@dataclass
class TrainLog:
    label_count: int
    entries: List[TrainLogEntry] = field(default_factory = list)

    def append(self, entry: TrainLogEntry):
        if self.entries and entry.epoch <= self.entries[-1].epoch:
            raise ValueError(f'Log entries must have increasing epochs; got {entry.epoch} after {self.entries[-1].epoch}.')
        self.entries.append(entry)

    ## \return Every entry without wall times.
    def metric_rows(self) -> List[tuple]:
        return [entry.metrics() for entry in self.entries]

    @property
    def final(self) -> Optional[TrainLogEntry]:
        return self.entries[-1] if self.entries else None

    def header(self, include_timing: bool = True) -> List[str]:
        columns = ['epoch', 'train_macro_auc', 'test_auc'] + [f'loss_k{k}' for k in range(1, self.label_count + 1)]
        if include_timing:
            columns.append('seconds')
        return columns

    def rows(self, include_timing: bool = True) -> List[List[str]]:
        rows = []
        for entry in self.entries:
            row = [str(entry.epoch), repr(entry.train_macro_auc), 'NA' if entry.test_auc is None else repr(entry.test_auc)]
            row.extend(repr(loss) for loss in entry.label_losses)
            if include_timing:
                row.append(f'{entry.seconds:.6f}')
            rows.append(row)
        return rows

    ## Writes the log as CSV, one row per evaluation point.
    def to_csv(self, filepath: str, include_timing: bool = True):
        with open(filepath, 'w', newline = '') as csv_file:
            writer = csv.writer(csv_file, lineterminator = '\n')
            writer.writerow(self.header(include_timing))
            writer.writerows(self.rows(include_timing))

class TrainResult(NamedTuple):
    model: Scorer
    scorer: AggregatedScorer
    log: TrainLog
    state: MinMaxState

## Splits a seeded permutation of range(pool_size) into consecutive batches.
## Every index appears in exactly one batch; only the last batch may be short.
def minibatch_iter(pool_size: int, batch_size: int, seed: int, epoch: int) -> Iterator[np.ndarray]:
    if batch_size < 1:
        raise InvalidParameterError(f'batch_size must be positive, got {batch_size}.')
    order = np.random.default_rng([seed, epoch]).permutation(pool_size)
    for start in range(0, pool_size, batch_size):
        yield order[start:start + batch_size]

## Trains a multi-head scorer on a ranked bag collection.
## \param[in] collection - The bags. Only their features, ids and sizes are read.
## \param[in] model - A scorer with m - 1 heads. It is updated in place.
## \param[in] test - Optional labeled (features, +1/-1 labels) used to report test AUC.
## \param[in] checkpoint_path - Where to save the model if training aborts on a non-finite loss.
def train(collection: BagCollection, model: Scorer, config: TrainConfig,
        test: Optional[Tuple[np.ndarray, np.ndarray]] = None,
        checkpoint_path: Optional[str] = None) -> TrainResult:
    # VERIFY THE INPUTS.
    label_count = collection.m_bags - 1
    if model.head_count != label_count:
        raise InvalidParameterError(f'A collection of {collection.m_bags} bags needs a model with {label_count} heads, got {model.head_count}.')
    if model.input_dimension != collection.dimension:
        raise InvalidParameterError(f'The model expects dimension {model.input_dimension}, but the bags have dimension {collection.dimension}.')
    if config.batch_size > collection.total_size:
        raise InvalidParameterError(f'batch_size {config.batch_size} exceeds the {collection.total_size} pooled instances.')

    # POOL THE BAGS.
    features, bag_ids = collection.pooled()
    signs = surrogate_signs(bag_ids, collection.m_bags)
    plan: ReductionPlan = build_plan(collection.sizes)
    mixing_fractions = plan.mixing_fractions
    if test is not None:
        test_features = np.asarray(test[0], dtype = np.float64)
        test_labels = np.asarray(test[1])

    # TRAIN.
    state = MinMaxState.zeros(label_count, config.margin, config.constrained)
    optimizer = SgdOptimizer(config.momentum, config.weight_decay)
    log = TrainLog(label_count)
    label_scale = 1.0 / label_count if config.label_reduction == 'mean' else 1.0
    logger.info(f'Training a {model.kind} scorer on {collection.m_bags} bags ({collection.total_size} instances) for {config.epochs} epochs')
    for epoch in range(config.epochs):
        started = time.perf_counter()
        lr_primal, lr_dual = config.learning_rates(epoch)
        if config.batch_exact:
            exact_state = batch_exact_state(model.forward(features), signs, config.margin, config.constrained)
            state.a, state.b, state.alpha = exact_state.a, exact_state.b, exact_state.alpha

        label_rng = np.random.default_rng([config.seed, epoch, LABEL_SAMPLING_STREAM])
        loss_sums = np.zeros(label_count)
        for batch in minibatch_iter(len(features), config.batch_size, config.seed, epoch):
            # EVALUATE THE OBJECTIVE ON THE BATCH.
            batch_features = features[batch]
            batch_signs = signs[batch]
            scores = model.forward(batch_features)
            values = h_values(scores, batch_signs, mixing_fractions, state.a, state.b, state.alpha, config.margin)
            gradients = h_value_gradients(scores, batch_signs, mixing_fractions, state.a, state.b, state.alpha, config.margin)
            label_mask = _label_mask(len(batch), label_count, config.label_sampling, label_rng)
            sample_weights = label_mask / len(batch)
            loss = float(np.sum(values * sample_weights) * label_scale)
            if not np.isfinite(loss):
                _abort(model, state, checkpoint_path, f'Non-finite loss at epoch {epoch + 1}.')
            loss_sums += values.sum(axis = 0)

            # UPDATE THE SCORER.
            parameter_gradients = model.backward(batch_features, gradients.score * sample_weights * label_scale)
            optimizer.step(model, parameter_gradients, lr_primal)

            # UPDATE THE AUXILIARY VARIABLES.
            # Each label's (a, b, alpha) follow their own label's objective.
            if not config.batch_exact:
                state.a = state.a - lr_primal * np.sum(gradients.a * sample_weights, axis = 0)
                state.b = state.b - lr_primal * np.sum(gradients.b * sample_weights, axis = 0)
                state.alpha = state.alpha + lr_dual * np.sum(gradients.alpha * sample_weights, axis = 0)
                if config.constrained:
                    state.alpha = np.maximum(state.alpha, 0.0)
            state.step_count += 1
            logger.debug(f'Epoch {epoch + 1} step {state.step_count}: loss {loss:.6f}')

        # RESET THE DUAL VARIABLES.
        if not config.batch_exact:
            state.alpha = optimal_alpha(state.a, state.b, config.margin, config.constrained)
        state.epoch_count = epoch + 1
        if not (state.is_finite and model.is_finite):
            _abort(model, state, checkpoint_path, f'Non-finite parameters after epoch {epoch + 1}.')
        seconds = time.perf_counter() - started

        # EVALUATE.
        is_last_epoch = (epoch + 1 == config.epochs)
        if (epoch + 1) % config.eval_every == 0 or is_last_epoch:
            head_scores = model.forward(features)
            train_macro_auc = macro_auc(head_scores, bag_ids)
            test_auc = None
            if test is not None:
                test_auc = auc_exact(AggregatedScorer(model).score(test_features), test_labels)
            label_losses = [float(loss) for loss in loss_sums / len(features)]
            log.append(TrainLogEntry(epoch + 1, train_macro_auc, test_auc, label_losses, seconds))
            test_text = '' if test_auc is None else f', test AUC {test_auc:.4f}'
            logger.info(f'Epoch {epoch + 1}/{config.epochs}: train macro-AUC {train_macro_auc:.4f}{test_text}')

    return TrainResult(model, AggregatedScorer(model), log, state)

## \return The (batch, label) weights: all ones, or in sampled mode one label per
##         instance weighted by the label count so the expectation is unchanged.
def _label_mask(batch_size: int, label_count: int, label_sampling: str, rng: np.random.Generator) -> np.ndarray:
    if label_sampling == 'all':
        return np.ones((batch_size, label_count))
    chosen = rng.integers(label_count, size = batch_size)
    mask = np.zeros((batch_size, label_count))
    mask[np.arange(batch_size), chosen] = label_count
    return mask

def _abort(model: Scorer, state: MinMaxState, checkpoint_path: Optional[str], message: str):
    if checkpoint_path is not None:
        write_checkpoint(checkpoint_path, model, state)
        message += f' The last state was saved to {checkpoint_path}.'
    logger.error(message)
    raise NonFiniteLossError(message)
