from dataclasses import dataclass
from enum import Enum
import math
from typing import List, Optional

import numpy as np

from ..Exceptions import InvalidParameterError

## Products like 0.2 * 100 come out as 20.000000000000004 in floating point,
## which must still round up to 20 bags' worth of instances.
CEILING_TOLERANCE = 1e-9

class ImbalanceMode(Enum):
    NONE = 'none'
    SIZE_REDUCTION = 'size_reduction'
    RANDOM = 'random'

## How the bag sizes of a collection are chosen.
##  - NONE: every bag gets ceil(n_train / m) instances.
##  - SIZE_REDUCTION: ceil(m / 2) randomly chosen bags shrink to ceil(tau * n_train / m).
##  - RANDOM: sizes are a random composition of n_train into m positive parts.
@dataclass(frozen = True)
class ImbalanceSpec:
    mode: ImbalanceMode = ImbalanceMode.NONE
    tau: Optional[float] = None

    def __post_init__(self):
        if self.mode == ImbalanceMode.SIZE_REDUCTION:
            if self.tau is None or not (0.0 < self.tau <= 1.0):
                raise InvalidParameterError(f'The size reduction factor tau must be in (0, 1], got {self.tau}.')
        elif self.tau is not None:
            raise InvalidParameterError(f'Imbalance mode {self.mode.value} does not take tau.')

    ## Parses the command-line syntax "none", "tau=X" or "random".
    @staticmethod
    def parse(text: str) -> 'ImbalanceSpec':
        text = text.strip().lower()
        if text == ImbalanceMode.NONE.value:
            return ImbalanceSpec()
        if text == ImbalanceMode.RANDOM.value:
            return ImbalanceSpec(ImbalanceMode.RANDOM)
        if text.startswith('tau='):
            try:
                tau = float(text[len('tau='):])
            except ValueError:
                raise InvalidParameterError(f'Cannot read tau from "{text}".')
            return ImbalanceSpec(ImbalanceMode.SIZE_REDUCTION, tau)
        raise InvalidParameterError(f'Unknown imbalance specification "{text}". Expected none, tau=X or random.')

    @property
    def label(self) -> str:
        if self.mode == ImbalanceMode.SIZE_REDUCTION:
            return f'tau={self.tau:g}'
        return self.mode.value

    ## \return The balanced per-bag size ceil(n_train / m).
    @staticmethod
    def base_size(m_bags: int, n_train: int) -> int:
        return math.ceil(n_train / m_bags)

    def to_dict(self) -> dict:
        return {'mode': self.mode.value, 'tau': self.tau}

## \return The size of each of the m bags under the given imbalance regime.
def apply_imbalance(spec: ImbalanceSpec, m_bags: int, n_train: int, rng_seed: int) -> List[int]:
    # VERIFY THE ARGUMENTS.
    if m_bags < 2:
        raise InvalidParameterError(f'At least 2 bags are required, got m={m_bags}.')
    if n_train < m_bags:
        raise InvalidParameterError(f'Cannot split {n_train} instances into {m_bags} non-empty bags.')

    base_size = ImbalanceSpec.base_size(m_bags, n_train)
    rng = np.random.default_rng(rng_seed)
    if spec.mode == ImbalanceMode.NONE:
        return [base_size] * m_bags

    elif spec.mode == ImbalanceMode.SIZE_REDUCTION:
        # SHRINK HALF OF THE BAGS.
        reduced_size = max(1, math.ceil(spec.tau * (n_train / m_bags) - CEILING_TOLERANCE))
        reduced_bag_count = math.ceil(m_bags / 2)
        reduced_bags = rng.choice(m_bags, size = reduced_bag_count, replace = False)
        sizes = [base_size] * m_bags
        for index in reduced_bags:
            sizes[int(index)] = reduced_size
        return sizes

    elif spec.mode == ImbalanceMode.RANDOM:
        # CUT THE POOL AT m - 1 DISTINCT RANDOM POSITIONS.
        cut_points = np.sort(rng.choice(np.arange(1, n_train), size = m_bags - 1, replace = False))
        boundaries = np.concatenate(([0], cut_points, [n_train]))
        return [int(size) for size in np.diff(boundaries)]

    raise InvalidParameterError(f'Unknown imbalance mode {spec.mode}.')
