from dataclasses import dataclass
from enum import Enum
import logging
from typing import List, Optional, Tuple

import numpy as np

from ..Exceptions import InvalidParameterError
from .Bag import DegeneratePriorsError

logger = logging.getLogger(__name__)

## The number of times a sampled prior vector may be redrawn because all its
## entries came out identical before sampling gives up.
MAXIMUM_PRIOR_RESAMPLES = 1000

## The class prior distributions of the benchmark protocol, plus explicit lists.
class PriorKind(Enum):
    UNIFORM = 'uniform'
    BIASED = 'biased'
    CONCENTRATED = 'concentrated'
    BIASED_CONCENTRATED = 'biased_concentrated'
    EXPLICIT = 'explicit'

    ## \return The (a, b) shape parameters of the Beta law for this kind.
    @property
    def beta_parameters(self) -> Tuple[float, float]:
        return BETA_PARAMETERS[self]

    ## The short distribution names (D_u, D_b, ...) used in reports.
    @property
    def short_name(self) -> str:
        return SHORT_NAMES[self]

BETA_PARAMETERS = {
    PriorKind.UNIFORM: (1.0, 1.0),
    PriorKind.BIASED: (5.0, 1.0),
    PriorKind.CONCENTRATED: (5.0, 5.0),
    PriorKind.BIASED_CONCENTRATED: (5.0, 2.0),
}

SHORT_NAMES = {
    PriorKind.UNIFORM: 'D_u',
    PriorKind.BIASED: 'D_b',
    PriorKind.CONCENTRATED: 'D_c',
    PriorKind.BIASED_CONCENTRATED: 'D_bc',
    PriorKind.EXPLICIT: 'explicit',
}

## How to obtain the m class priors of a collection.
@dataclass(frozen = True)
class PriorSpec:
    kind: PriorKind
    m_bags: int
    values: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.m_bags < 2:
            raise InvalidParameterError(f'At least 2 bags are required, got m={self.m_bags}.')
        if self.kind == PriorKind.EXPLICIT:
            # VERIFY THE EXPLICIT LIST.
            if self.values is None:
                raise InvalidParameterError('An explicit prior spec needs a list of values.')
            if len(self.values) != self.m_bags:
                raise InvalidParameterError(f'Expected {self.m_bags} explicit priors, got {len(self.values)}.')
            for value in self.values:
                if not (0.0 <= value <= 1.0):
                    raise InvalidParameterError(f'Prior {value} is outside [0, 1].')
        elif self.values is not None:
            raise InvalidParameterError(f'Prior kind {self.kind.value} does not take explicit values.')

    ## Parses the command-line prior syntax. Accepted forms are a kind name
    ## ("uniform", "biased", "concentrated", "biased_concentrated"), its short
    ## name ("D_u", "D_b", "D_c", "D_bc"), or a comma-separated list of priors.
    @staticmethod
    def parse(text: str, m_bags: Optional[int] = None) -> 'PriorSpec':
        text = text.strip()
        for kind in PriorKind:
            if kind == PriorKind.EXPLICIT:
                continue
            if text.lower() in (kind.value, kind.short_name.lower()):
                if m_bags is None:
                    raise InvalidParameterError(f'Prior kind "{text}" needs a bag count.')
                return PriorSpec(kind, m_bags)

        # READ AN EXPLICIT LIST.
        try:
            values = tuple(float(value) for value in text.split(','))
        except ValueError:
            raise InvalidParameterError(f'Unknown prior specification "{text}".')
        if m_bags is not None and m_bags != len(values):
            raise InvalidParameterError(f'Expected {m_bags} explicit priors, got {len(values)}.')
        return PriorSpec(PriorKind.EXPLICIT, len(values), values)

    def to_dict(self) -> dict:
        return {
            'kind': self.kind.value,
            'm_bags': self.m_bags,
            'values': list(self.values) if self.values is not None else None}

## Samples (or passes through) the class priors of a collection.
## Beta draws are made as the ratio of two independent Gamma draws.
## \return m priors in [0, 1], sorted descending and not all equal.
##         Ties are kept in draw order.
def sample_priors(spec: PriorSpec, rng_seed: int) -> List[float]:
    # HANDLE EXPLICIT PRIORS.
    if spec.kind == PriorKind.EXPLICIT:
        values = np.array(spec.values, dtype = np.float64)
        if np.all(values == values[0]):
            raise DegeneratePriorsError(f'degenerate priors: all {spec.m_bags} explicit priors equal {values[0]}.')
        return _sort_descending(values)

    # SAMPLE THE PRIORS FROM THE BETA LAW.
    a, b = spec.kind.beta_parameters
    rng = np.random.default_rng(rng_seed)
    for attempt in range(MAXIMUM_PRIOR_RESAMPLES):
        gamma_a = rng.gamma(a, size = spec.m_bags)
        gamma_b = rng.gamma(b, size = spec.m_bags)
        priors = gamma_a / (gamma_a + gamma_b)
        if not np.all(priors == priors[0]):
            if attempt > 0:
                logger.debug(f'Sampled priors needed {attempt} redraws to be distinct.')
            return _sort_descending(priors)
    raise DegeneratePriorsError(f'degenerate priors: {MAXIMUM_PRIOR_RESAMPLES} draws from {spec.kind.value} were all identical.')

def _sort_descending(values: np.ndarray) -> List[float]:
    order = np.argsort(-values, kind = 'stable')
    return [float(value) for value in values[order]]
