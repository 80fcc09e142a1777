## The prepared studies behind `umauc reproduce`.
##  - priors: every class prior distribution against several bag counts.
##  - imbalance: shrinking half of the bags by tau, and random bag sizes.
##  - excess-risk: the gap to the Bayes AUC as the training set grows.
##  - equivalence: the min-max trainer against the pairwise solver on the same bags.
from dataclasses import replace
import logging
from typing import Optional, Sequence

from ..Baseline import PairwiseConfig
from ..Bags.GaussianPool import GaussianPoolSpec
from ..Bags.Priors import PriorKind
from ..Exceptions import InvalidParameterError
from ..TrainConfig import TrainConfig
from .Experiment import MINMAX_SOLVER, PAIRWISE_SOLVER, ExperimentSpec, run_experiment
from .Report import ExperimentReport

logger = logging.getLogger(__name__)

SUITES = ('priors', 'imbalance', 'excess-risk', 'equivalence')

PRIOR_DISTRIBUTIONS = tuple(kind.short_name for kind in (PriorKind.UNIFORM, PriorKind.BIASED, PriorKind.CONCENTRATED, PriorKind.BIASED_CONCENTRATED))
DEFAULT_M_VALUES = (2, 4, 10, 50)
DEFAULT_TAUS = (0.8, 0.6, 0.4, 0.2)
DEFAULT_N_VALUES = (100, 400, 1600, 6400)

## The largest change in mean test AUC between tau = 0.8 and the smallest tau
## that still counts as robust.
IMBALANCE_TOLERANCE = 0.05
## How much the excess-risk gap may grow between neighbouring training sizes
## before the trend counts as broken. Covers test-split noise.
GAP_TOLERANCE = 1e-3
## The largest mean test AUC difference at which the two solvers agree.
SOLVER_AGREEMENT = 0.02
## The excess-risk study scores on a larger test split to keep its noise below the trend.
EXCESS_RISK_TEST_SIZE = 10000
## How far the biased-prior mean test AUC may exceed the uniform-prior one.
## Covers test-split and seed noise.
PRIOR_ORDER_TOLERANCE = 0.01
## The bag counts at which uniform priors must reach the Bayes AUC.
CONSISTENCY_M_VALUES = (2, 10)
CONSISTENCY_MINIMUM_AUC = 0.95
CONSISTENCY_MAXIMUM_GAP = 0.03
## The largest mean test AUC above the Bayes AUC that still counts as test-split noise.
BAYES_BOUND_TOLERANCE = 0.01

## Runs every prior distribution against several bag counts. Adds a check per m
## that biased priors rank no better than uniform priors, and a consistency check
## for uniform priors at each m in CONSISTENCY_M_VALUES.
def run_priors_suite(
        pool: Optional[GaussianPoolSpec] = None,
        m_values: Sequence[int] = DEFAULT_M_VALUES,
        repeats: int = 3,
        train: Optional[TrainConfig] = None,
        seed: int = 0,
        workers: int = 1,
        priors: Sequence[str] = PRIOR_DISTRIBUTIONS) -> ExperimentReport:
    spec = ExperimentSpec(
        name = 'priors',
        pool = pool or GaussianPoolSpec(),
        priors = tuple(priors),
        m_values = tuple(m_values),
        repeats = repeats,
        train = train or TrainConfig(),
        seed = seed,
        workers = workers)
    report = run_experiment(spec)

    # CHECK THAT BIASED PRIORS DO NOT BEAT UNIFORM PRIORS.
    uniform, biased = PriorKind.UNIFORM.short_name, PriorKind.BIASED.short_name
    if uniform in spec.priors and biased in spec.priors:
        for m_bags in spec.m_values:
            uniform_auc = report.mean_test_auc(prior = uniform, m_bags = m_bags)
            biased_auc = report.mean_test_auc(prior = biased, m_bags = m_bags)
            name = f'{biased} no better than {uniform} m={m_bags}'
            if uniform_auc is None or biased_auc is None:
                report.add_check(name, False, 'a cell failed')
                continue
            report.add_check(
                name,
                biased_auc <= uniform_auc + PRIOR_ORDER_TOLERANCE,
                f'AUC({biased})={biased_auc:.4f}, AUC({uniform})={uniform_auc:.4f}, tolerance {PRIOR_ORDER_TOLERANCE}')

    # CHECK CONSISTENCY AGAINST THE BAYES AUC.
    if uniform in spec.priors:
        for m_bags in spec.m_values:
            if m_bags not in CONSISTENCY_M_VALUES:
                continue
            name = f'consistency {uniform} m={m_bags}'
            results = report.find(prior = uniform, m_bags = m_bags)
            gap = report.gap(results[0]) if results else None
            if gap is None:
                report.add_check(name, False, 'a cell failed')
                continue
            mean_auc = results[0].mean_test_auc
            report.add_check(
                name,
                mean_auc >= CONSISTENCY_MINIMUM_AUC and gap <= CONSISTENCY_MAXIMUM_GAP,
                f'AUC={mean_auc:.4f} (minimum {CONSISTENCY_MINIMUM_AUC}), gap to Bayes={gap:.4f} (limit {CONSISTENCY_MAXIMUM_GAP})')
    return report

## Runs the base spec once per size reduction factor, plus the random-size regime.
## Adds a check per (prior, m) that the smallest tau stays within
## IMBALANCE_TOLERANCE of the largest.
def run_imbalance_sweep(base: ExperimentSpec, taus: Sequence[float] = DEFAULT_TAUS, include_random: bool = True) -> ExperimentReport:
    if not taus:
        raise InvalidParameterError('The imbalance sweep needs at least one tau.')
    imbalances = tuple(f'tau={tau:g}' for tau in taus) + (('random',) if include_random else ())
    report = run_experiment(replace(base, name = 'imbalance', imbalances = imbalances))

    # LOG THE RANDOM BAG SIZES.
    for result in report.find(imbalance = 'random'):
        for run in result.runs:
            logger.info(f'Random bag sizes for {result.cell.key} (seed {run.seed}): {run.sizes}')

    # CHECK THE ROBUSTNESS TREND.
    largest, smallest = f'tau={max(taus):g}', f'tau={min(taus):g}'
    for prior in base.priors:
        for m_bags in base.m_values:
            for solver in base.solvers:
                upper = report.find(prior = prior, m_bags = m_bags, imbalance = largest, solver = solver)
                lower = report.find(prior = prior, m_bags = m_bags, imbalance = smallest, solver = solver)
                upper_auc = upper[0].mean_test_auc if upper else None
                lower_auc = lower[0].mean_test_auc if lower else None
                if upper_auc is None or lower_auc is None:
                    report.add_check(f'imbalance robustness {prior} m={m_bags} {solver}', False, 'a cell failed')
                    continue
                difference = abs(upper_auc - lower_auc)
                report.add_check(
                    f'imbalance robustness {prior} m={m_bags} {solver}',
                    difference <= IMBALANCE_TOLERANCE,
                    f'|AUC({largest}) - AUC({smallest})| = {difference:.4f}, limit {IMBALANCE_TOLERANCE}')
    return report

## Trains on growing training sets. Checks that no cell beats the Bayes AUC, and
## that the gap to it does not grow with n and at least halves from the smallest
## to the largest n.
def run_excess_risk_trend(
        pool: Optional[GaussianPoolSpec] = None,
        n_values: Sequence[int] = DEFAULT_N_VALUES,
        m_bags: int = 4,
        repeats: int = 5,
        train: Optional[TrainConfig] = None,
        seed: int = 0,
        workers: int = 1) -> ExperimentReport:
    n_values = tuple(sorted(n_values))
    if len(n_values) < 2:
        raise InvalidParameterError('The excess-risk trend needs at least two training sizes.')
    pool = pool or replace(GaussianPoolSpec(), n_test = EXCESS_RISK_TEST_SIZE)
    spec = ExperimentSpec(
        name = 'excess-risk',
        pool = pool,
        priors = (PriorKind.UNIFORM.short_name,),
        m_values = (m_bags,),
        n_train_values = n_values,
        repeats = repeats,
        train = train or TrainConfig(),
        seed = seed,
        workers = workers)
    report = run_experiment(spec)

    # CHECK THAT NO CELL BEATS THE BAYES AUC.
    for n_train in n_values:
        result = report.find(n_train = n_train)[0]
        name = f'bayes bound n={n_train}'
        if result.mean_test_auc is None or report.bayes_auc is None:
            report.add_check(name, False, 'a cell failed')
            continue
        report.add_check(
            name,
            result.mean_test_auc <= report.bayes_auc + BAYES_BOUND_TOLERANCE,
            f'AUC={result.mean_test_auc:.4f}, Bayes AUC={report.bayes_auc:.4f}, tolerance {BAYES_BOUND_TOLERANCE}')

    # CHECK THE TREND.
    gaps = [report.gap(report.find(n_train = n_train)[0]) for n_train in n_values]
    if any(gap is None for gap in gaps):
        report.add_check('gap non-increasing in n', False, 'a cell failed')
        return report
    gap_text = ', '.join(f'gap({n_train})={gap:.4f}' for n_train, gap in zip(n_values, gaps))
    is_non_increasing = all(later <= earlier + GAP_TOLERANCE for earlier, later in zip(gaps, gaps[1:]))
    report.add_check('gap non-increasing in n', is_non_increasing, f'{gap_text}, tolerance {GAP_TOLERANCE}')
    report.add_check('gap at least halves', gaps[-1] < gaps[0] / 2, f'gap({n_values[-1]})={gaps[-1]:.4f} against gap({n_values[0]})/2={gaps[0] / 2:.4f}')
    return report

## Trains the min-max solver and the pairwise solver on identical bags.
def run_solver_equivalence(
        pool: Optional[GaussianPoolSpec] = None,
        m_bags: int = 3,
        n_train: int = 600,
        repeats: int = 3,
        train: Optional[TrainConfig] = None,
        pairwise: Optional[PairwiseConfig] = None,
        seed: int = 0,
        workers: int = 1) -> ExperimentReport:
    spec = ExperimentSpec(
        name = 'equivalence',
        pool = replace(pool or GaussianPoolSpec(), n_train = n_train),
        priors = (PriorKind.UNIFORM.short_name,),
        m_values = (m_bags,),
        repeats = repeats,
        solvers = (MINMAX_SOLVER, PAIRWISE_SOLVER),
        train = train or TrainConfig(),
        pairwise = pairwise or PairwiseConfig(),
        seed = seed,
        workers = workers)
    report = run_experiment(spec)

    minmax_auc = report.find(solver = MINMAX_SOLVER)[0].mean_test_auc
    pairwise_auc = report.find(solver = PAIRWISE_SOLVER)[0].mean_test_auc
    if minmax_auc is None or pairwise_auc is None:
        report.add_check('solver agreement', False, 'a cell failed')
    else:
        difference = abs(minmax_auc - pairwise_auc)
        report.add_check('solver agreement', difference <= SOLVER_AGREEMENT, f'|minmax - pairwise| = {difference:.4f}, limit {SOLVER_AGREEMENT}')
    return report

## Runs a suite by its command-line name. Unset arguments keep each suite's defaults.
def run_suite(
        name: str,
        pool: Optional[GaussianPoolSpec] = None,
        repeats: Optional[int] = None,
        train: Optional[TrainConfig] = None,
        seed: int = 0,
        workers: int = 1) -> ExperimentReport:
    common = {'train': train, 'seed': seed, 'workers': workers}
    if repeats is not None:
        common['repeats'] = repeats
    if name == 'priors':
        return run_priors_suite(pool, **common)
    elif name == 'imbalance':
        base = ExperimentSpec(
            name = 'imbalance',
            pool = pool or GaussianPoolSpec(),
            m_values = (10,),
            repeats = common.get('repeats', 3),
            train = train or TrainConfig(),
            seed = seed,
            workers = workers)
        return run_imbalance_sweep(base)
    elif name == 'excess-risk':
        return run_excess_risk_trend(pool, **common)
    elif name == 'equivalence':
        return run_solver_equivalence(pool, **common)
    raise InvalidParameterError(f'Unknown suite "{name}". Expected one of {SUITES}.')
