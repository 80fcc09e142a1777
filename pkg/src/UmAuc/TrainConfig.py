from dataclasses import asdict, dataclass, fields
import hashlib
import json

from .Exceptions import InvalidParameterError

## How the per-sample losses of one instance are spread over the surrogate labels.
LABEL_SAMPLING_MODES = ('all', 'sampled')
## How the per-label losses are combined into the minibatch loss.
LABEL_REDUCTIONS = ('mean', 'sum')

## The hyperparameters of a min-max training run.
## Every key can be set from a JSON config file and overridden on the command line.
@dataclass(frozen = True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 256
    lr_primal: float = 0.1
    lr_dual: float = 0.1
    ## Both learning rates are multiplied by lr_decay_factor every lr_decay_every epochs.
    lr_decay_every: int = 20
    lr_decay_factor: float = 0.5
    momentum: float = 0.0
    weight_decay: float = 0.0
    margin: float = 1.0
    ## Keeps alpha >= 0 (the margin variant of the objective).
    constrained: bool = True
    seed: int = 0
    eval_every: int = 1
    ## Recomputes (a, b, alpha) in closed form at the start of every epoch instead of
    ## updating them stochastically.
    batch_exact: bool = False
    label_sampling: str = 'all'
    label_reduction: str = 'mean'

    def __post_init__(self):
        if self.epochs < 0:
            raise InvalidParameterError(f'epochs must be non-negative, got {self.epochs}.')
        if self.batch_size < 1:
            raise InvalidParameterError(f'batch_size must be positive, got {self.batch_size}.')
        if self.lr_primal <= 0 or self.lr_dual <= 0:
            raise InvalidParameterError('Learning rates must be positive.')
        if self.lr_decay_every < 1 or not (0.0 < self.lr_decay_factor <= 1.0):
            raise InvalidParameterError('lr_decay_every must be positive and lr_decay_factor in (0, 1].')
        if not (0.0 <= self.momentum < 1.0):
            raise InvalidParameterError(f'momentum must be in [0, 1), got {self.momentum}.')
        if self.weight_decay < 0:
            raise InvalidParameterError(f'weight_decay must be non-negative, got {self.weight_decay}.')
        if self.margin <= 0:
            raise InvalidParameterError(f'margin must be positive, got {self.margin}.')
        if self.eval_every < 1:
            raise InvalidParameterError(f'eval_every must be positive, got {self.eval_every}.')
        if self.label_sampling not in LABEL_SAMPLING_MODES:
            raise InvalidParameterError(f'label_sampling must be one of {LABEL_SAMPLING_MODES}, got "{self.label_sampling}".')
        if self.label_reduction not in LABEL_REDUCTIONS:
            raise InvalidParameterError(f'label_reduction must be one of {LABEL_REDUCTIONS}, got "{self.label_reduction}".')

    ## \return The (primal, dual) learning rates for the given 0-based epoch.
    def learning_rates(self, epoch: int):
        decay = self.lr_decay_factor ** (epoch // self.lr_decay_every)
        return self.lr_primal * decay, self.lr_dual * decay

    def to_dict(self) -> dict:
        return asdict(self)

    ## Builds a config from a dictionary, rejecting unknown keys.
    @classmethod
    def from_dict(cls, values: dict):
        return cls(**checked_config_values(cls, values))

    @classmethod
    def from_json(cls, filepath: str):
        return cls.from_dict(read_json_config(filepath))

    ## \return A copy with the given keys replaced. Keys whose value is None are ignored.
    def with_overrides(self, **overrides):
        values = self.to_dict()
        values.update({key: value for key, value in overrides.items() if value is not None})
        return type(self).from_dict(values)

## \return The values, with every key checked against the dataclass fields.
def checked_config_values(config_class, values: dict) -> dict:
    if not isinstance(values, dict):
        raise InvalidParameterError(f'A {config_class.__name__} must be a JSON object.')
    known_keys = {config_field.name for config_field in fields(config_class)}
    unknown_keys = set(values) - known_keys
    if unknown_keys:
        raise InvalidParameterError(f'Unknown {config_class.__name__} keys: {sorted(unknown_keys)}.')
    return dict(values)

def read_json_config(filepath: str) -> dict:
    try:
        with open(filepath) as config_file:
            return json.load(config_file)
    except json.JSONDecodeError as error:
        raise InvalidParameterError(f'Config file {filepath} is not valid JSON: {error}')

## \return The SHA-256 hex digest of the canonical JSON form of a config dictionary.
def config_digest(values: dict) -> str:
    canonical = json.dumps(values, sort_keys = True, separators = (',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()
