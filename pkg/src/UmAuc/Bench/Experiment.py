## Runs grids of training runs and collects their test AUCs.
##
## A cell is one combination of prior distribution, bag count, imbalance
## regime, training-set size and solver. Every cell is repeated with the seeds
## seed, seed + 1, ...; repeat r of every cell draws the same labeled pool, so
## cells that differ only in the solver train on identical bags.
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import logging
import os
import time
from typing import List, Optional, Tuple

import numpy as np

from ..Baseline import PairwiseConfig, PairwiseTrace, train_pairwise
from ..Bags.BagFiles import MissingBagFileError, read_bags, read_labeled_csv
from ..Bags.GaussianPool import GaussianPoolSpec, generate_pool
from ..Bags.Imbalance import ImbalanceSpec, apply_imbalance
from ..Bags.Priors import PriorSpec, sample_priors
from ..Bags.Synthesis import synthesize_bags
from ..Exceptions import InvalidParameterError
from ..Metrics.Auc import auc_exact
from ..Scorers.Checkpoint import MODEL_KINDS, create_scorer
from ..Scorers.MlpScorer import DEFAULT_HIDDEN_WIDTHS
from ..Scorers.Scorer import AggregatedScorer
from ..TrainConfig import TrainConfig, checked_config_values
from ..Trainer import TrainLog, train

logger = logging.getLogger(__name__)

MINMAX_SOLVER = 'minmax'
PAIRWISE_SOLVER = 'pairwise'
SOLVERS = (MINMAX_SOLVER, PAIRWISE_SOLVER)

## The prior label of cells whose bags are read from files.
BAG_FILES_PRIOR = 'files'
## The labeled test split that `umauc synth` writes next to the manifest.
TEST_FILENAME = 'test.csv'

## Independent random streams derived from a run seed.
PRIOR_STREAM = 1
SIZE_STREAM = 2
SYNTHESIS_STREAM = 3

## \return A seed for one random stream of a run, independent of the other streams.
def derived_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])

@dataclass(frozen = True)
class ExperimentSpec:
    name: str = 'experiment'
    pool: GaussianPoolSpec = field(default_factory = GaussianPoolSpec)
    ## Trains on the bags in this directory instead of synthesizing bags from the pool.
    bag_directory: Optional[str] = None
    priors: Tuple[str, ...] = ('D_u',)
    m_values: Tuple[int, ...] = (10,)
    imbalances: Tuple[str, ...] = ('none',)
    ## Replaces the pool's n_train per cell when set.
    n_train_values: Optional[Tuple[int, ...]] = None
    repeats: int = 3
    solvers: Tuple[str, ...] = (MINMAX_SOLVER,)
    model: str = 'linear'
    hidden_widths: Tuple[int, ...] = DEFAULT_HIDDEN_WIDTHS
    train: TrainConfig = field(default_factory = TrainConfig)
    pairwise: PairwiseConfig = field(default_factory = PairwiseConfig)
    seed: int = 0
    ## Cells run on this many threads. Results do not depend on it.
    workers: int = 1

    def __post_init__(self):
        if self.repeats < 1:
            raise InvalidParameterError(f'repeats must be at least 1, got {self.repeats}.')
        if self.workers < 1:
            raise InvalidParameterError(f'workers must be at least 1, got {self.workers}.')
        if not self.solvers or any(solver not in SOLVERS for solver in self.solvers):
            raise InvalidParameterError(f'Solvers must be a non-empty subset of {SOLVERS}, got {self.solvers}.')
        if self.model not in MODEL_KINDS:
            raise InvalidParameterError(f'Unknown model kind "{self.model}".')
        if self.bag_directory is None:
            if not self.priors or not self.m_values or not self.imbalances:
                raise InvalidParameterError('An experiment needs at least one prior distribution, bag count and imbalance regime.')
            for m_bags in self.m_values:
                for prior in self.priors:
                    PriorSpec.parse(prior, m_bags)
            for imbalance in self.imbalances:
                ImbalanceSpec.parse(imbalance)
            for n_train in (self.n_train_values or ()):
                if n_train < max(self.m_values):
                    raise InvalidParameterError(f'n_train={n_train} is too small for {max(self.m_values)} bags.')

    ## \return Every cell of the grid, in a fixed order.
    def cells(self) -> List['ExperimentCell']:
        if self.bag_directory is not None:
            m_bags = read_bags(self.bag_directory).m_bags
            return [ExperimentCell(BAG_FILES_PRIOR, m_bags, 'files', 0, solver) for solver in self.solvers]

        cells = []
        for prior in self.priors:
            for m_bags in self.m_values:
                for imbalance in self.imbalances:
                    for n_train in (self.n_train_values or (self.pool.n_train,)):
                        for solver in self.solvers:
                            cells.append(ExperimentCell(prior, m_bags, imbalance, n_train, solver))
        return cells

    @property
    def seeds(self) -> List[int]:
        return [self.seed + repeat for repeat in range(self.repeats)]

    def to_dict(self) -> dict:
        return {
            'name': self.name,
            'pool': self.pool.to_dict(),
            'bag_directory': self.bag_directory,
            'priors': list(self.priors),
            'm_values': list(self.m_values),
            'imbalances': list(self.imbalances),
            'n_train_values': None if self.n_train_values is None else list(self.n_train_values),
            'repeats': self.repeats,
            'solvers': list(self.solvers),
            'model': self.model,
            'hidden_widths': list(self.hidden_widths),
            'train': self.train.to_dict(),
            'pairwise': self.pairwise.to_dict(),
            'seed': self.seed,
            'workers': self.workers}

    @classmethod
    def from_dict(cls, values: dict):
        values = checked_config_values(cls, values)
        if 'pool' in values:
            values['pool'] = GaussianPoolSpec.from_dict(values['pool'])
        if 'train' in values:
            values['train'] = TrainConfig.from_dict(values['train'])
        if 'pairwise' in values:
            values['pairwise'] = PairwiseConfig.from_dict(values['pairwise'])
        for key in ('priors', 'm_values', 'imbalances', 'n_train_values', 'solvers', 'hidden_widths'):
            if values.get(key) is not None:
                values[key] = tuple(values[key])
        return cls(**values)

@dataclass(frozen = True)
class ExperimentCell:
    prior: str
    m_bags: int
    imbalance: str
    n_train: int
    solver: str

    ## A filename-safe identifier of the cell.
    @property
    def key(self) -> str:
        name = f'{self.prior}_m{self.m_bags}_{self.imbalance}_n{self.n_train}_{self.solver}'
        return ''.join(character if character.isalnum() or character in ('.', '_', '-') else '_' for character in name)

## The outcome of one repeat of one cell.
@dataclass
class RunRecord:
    repeat: int
    seed: int
    test_auc: float
    priors: Optional[List[float]]
    sizes: List[int]
    seconds: float
    ## The training log of a min-max run.
    log: Optional[TrainLog] = None
    ## The risk trace of a pairwise run.
    trace: Optional[PairwiseTrace] = None

@dataclass
class CellResult:
    cell: ExperimentCell
    runs: List[RunRecord] = field(default_factory = list)
    ## Why the cell was aborted, if it was.
    diagnostic: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.diagnostic is not None

    @property
    def test_aucs(self) -> List[float]:
        return [run.test_auc for run in self.runs]

    @property
    def mean_test_auc(self) -> Optional[float]:
        if self.failed or not self.runs:
            return None
        return float(np.mean(self.test_aucs))

    ## The sample standard deviation over repeats; 0 for a single repeat.
    @property
    def std_test_auc(self) -> Optional[float]:
        if self.failed or not self.runs:
            return None
        if len(self.runs) == 1:
            return 0.0
        return float(np.std(self.test_aucs, ddof = 1))

## Runs every cell of an experiment.
## A cell whose run fails is aborted with a diagnostic; the other cells continue.
def run_experiment(spec: ExperimentSpec):
    from .Report import ExperimentReport

    cells = spec.cells()
    logger.info(f'Running experiment "{spec.name}": {len(cells)} cells x {spec.repeats} repeats')
    started = time.perf_counter()
    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers = spec.workers) as executor:
            results = list(executor.map(lambda cell: run_cell(spec, cell), cells))
    else:
        results = [run_cell(spec, cell) for cell in cells]
    wall_seconds = time.perf_counter() - started

    bayes_auc = spec.pool.bayes_auc() if spec.bag_directory is None else None
    return ExperimentReport(spec, results, bayes_auc, wall_seconds)

## Runs every repeat of one cell, stopping at the first failure.
def run_cell(spec: ExperimentSpec, cell: ExperimentCell) -> CellResult:
    result = CellResult(cell)
    for repeat, seed in enumerate(spec.seeds):
        try:
            result.runs.append(run_once(spec, cell, repeat, seed))
        except Exception as error:
            result.diagnostic = f'repeat {repeat} (seed {seed}) failed: {type(error).__name__}: {error}'
            logger.warning(f'Aborting cell {cell.key}: {result.diagnostic}')
            break
    if not result.failed:
        logger.info(f'Cell {cell.key}: mean test AUC {result.mean_test_auc:.4f} +/- {result.std_test_auc:.4f}')
    return result

## Synthesizes (or reads) the bags of one repeat and trains on them.
def run_once(spec: ExperimentSpec, cell: ExperimentCell, repeat: int, seed: int) -> RunRecord:
    # GET THE BAGS AND THE TEST SPLIT.
    priors = None
    if spec.bag_directory is not None:
        collection = read_bags(spec.bag_directory)
        test_features, test_labels = _read_test_split(spec.bag_directory)
    else:
        pool = generate_pool(replace(spec.pool, n_train = cell.n_train), seed)
        priors = sample_priors(PriorSpec.parse(cell.prior, cell.m_bags), derived_seed(seed, PRIOR_STREAM))
        sizes = apply_imbalance(ImbalanceSpec.parse(cell.imbalance), cell.m_bags, cell.n_train, derived_seed(seed, SIZE_STREAM))
        collection = synthesize_bags(pool.train_features, pool.train_labels, priors, sizes, derived_seed(seed, SYNTHESIS_STREAM))
        test_features, test_labels = pool.test_features, pool.test_labels
    logger.debug(f'Cell {cell.key} repeat {repeat}: bag sizes {collection.sizes}')

    # TRAIN.
    started = time.perf_counter()
    if cell.solver == MINMAX_SOLVER:
        model = create_scorer(spec.model, collection.dimension, collection.m_bags - 1, spec.hidden_widths, seed)
        config = spec.train.with_overrides(seed = seed, batch_size = min(spec.train.batch_size, collection.total_size))
        result = train(collection, model, config)
        test_auc = auc_exact(AggregatedScorer(result.model).score(test_features), test_labels)
        return RunRecord(repeat, seed, test_auc, priors, collection.sizes, time.perf_counter() - started, log = result.log)

    model = create_scorer(spec.model, collection.dimension, 1, spec.hidden_widths, seed)
    model, trace = train_pairwise(collection, model, replace(spec.pairwise, seed = seed))
    test_auc = auc_exact(model.forward(test_features)[:, 0], test_labels)
    return RunRecord(repeat, seed, test_auc, priors, collection.sizes, time.perf_counter() - started, trace = trace)

def _read_test_split(directory_path: str):
    test_path = os.path.join(directory_path, TEST_FILENAME)
    if not os.path.exists(test_path):
        raise MissingBagFileError(f'No labeled test split found at {test_path}.')
    return read_labeled_csv(test_path)
