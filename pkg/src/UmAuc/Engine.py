#! python3

## The umauc command-line program.
## Overall Design:
##  - Each subcommand reads its settings from built-in defaults, then an
##    optional JSON config file, then command-line flags, in increasing order
##    of precedence. Flags are the kebab-case forms of the config keys.
##  - Every subcommand that writes files also writes the settings it actually
##    used as effective_config.json, so any output can be regenerated.
##  - The last line on stdout is always "RESULT <json>" for scripting.
##    Progress and diagnostics go to stderr through the UmAuc logger.
##  - Exit codes: 0 on success, 2 on usage errors (including unreadable input
##    files), 1 when a run fails.

import argparse
from dataclasses import asdict, dataclass, fields
import json
import logging
import os
from pathlib import Path
import sys
from typing import List, Optional, Union, get_args, get_origin

import numpy as np
from asset_extraction_framework.Exceptions import BinaryParsingError

from UmAuc.Baseline import PairwiseConfig, train_pairwise
from UmAuc.Bags.BagFiles import MANIFEST_FILENAME, read_bags, read_labeled_csv, write_bags, write_labeled_csv
from UmAuc.Bags.GaussianPool import GaussianPoolSpec, generate_pool
from UmAuc.Bags.Imbalance import ImbalanceSpec, apply_imbalance
from UmAuc.Bags.Priors import PriorSpec, sample_priors
from UmAuc.Bags.Synthesis import synthesize_bags
from UmAuc.Bench.Experiment import PRIOR_STREAM, SIZE_STREAM, SYNTHESIS_STREAM, TEST_FILENAME, derived_seed
from UmAuc.Bench.Suites import SUITES, run_suite
from UmAuc.Exceptions import InvalidParameterError, UmAucError
from UmAuc.Metrics.Auc import auc_exact
from UmAuc.Scorers.Checkpoint import MODEL_KINDS, create_scorer, read_checkpoint, write_checkpoint
from UmAuc.Scorers.MlpScorer import DEFAULT_HIDDEN_WIDTHS
from UmAuc.Scorers.Scorer import AggregatedScorer
from UmAuc.TrainConfig import TrainConfig, checked_config_values, config_digest, read_json_config
from UmAuc.Trainer import train

APPLICATION_NAME = 'umauc'
APPLICATION_DESCRIPTION = 'Learns bipartite ranking scorers from unlabeled bags whose class priors are known only by order.'
EFFECTIVE_CONFIG_FILENAME = 'effective_config.json'
## The share of a labeled pool file held out as the test split.
TEST_SHARE = 0.2

EXIT_SUCCESS = 0
EXIT_RUNTIME_FAILURE = 1

## The settings of `umauc synth`.
@dataclass(frozen = True)
class SynthConfig:
    pool: str = 'gaussian'
    pool_file: Optional[str] = None
    m_bags: int = 10
    priors: str = 'D_u'
    imbalance: str = 'none'
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict):
        return cls(**checked_config_values(cls, values))

CONFIG_HELP = {
    # TRAINING.
    'epochs': 'Number of passes over the pooled bags.',
    'batch_size': 'Instances per minibatch.',
    'lr_primal': 'Learning rate of the scorer and the a, b means.',
    'lr_dual': 'Learning rate of the alpha ascent.',
    'lr_decay_every': 'Decay both learning rates every this many epochs.',
    'lr_decay_factor': 'Factor applied to both learning rates at each decay.',
    'momentum': 'SGD momentum for the scorer parameters.',
    'weight_decay': 'L2 weight decay for the scorer parameters.',
    'margin': 'Margin in place of 1 in the square surrogate.',
    'constrained': 'Keep alpha non-negative.',
    'seed': 'Random seed.',
    'eval_every': 'Evaluate every this many epochs (the last epoch is always evaluated).',
    'batch_exact': 'Recompute a, b and alpha in closed form at the start of every epoch.',
    'label_sampling': 'Which surrogate labels each instance contributes to: all, or one sampled label.',
    'label_reduction': 'Combine per-label losses by their mean or their sum.',
    # PAIRWISE BASELINE.
    'lr': 'Learning rate.',
    'full_batch': 'Use every cross-bag pair in every step.',
    'batch_pairs': 'Pairs per step when not using full batches.',
    'pair_cap': 'Refuse collections with more cross-bag pairs than this.',
    # SYNTHESIS.
    'pool': 'Pool specification, such as "gaussian" or "gaussian:d=5,n_train=8000,sigma=1.5".',
    'pool_file': 'Draw bags from a labeled CSV instead of a Gaussian pool. 20%% is held out for testing.',
    'm_bags': 'Number of bags.',
    'priors': 'Class prior distribution (D_u, D_b, D_c, D_bc) or an explicit comma-separated list.',
    'imbalance': 'Bag size regime: none, tau=X or random.',
}

## Adds one --kebab-case flag per config field. Every flag defaults to None so
## that only flags given on the command line override the config file.
def add_config_arguments(parser: argparse.ArgumentParser, config_class, skip = ()):
    for config_field in fields(config_class):
        if config_field.name in skip:
            continue
        flag = '--' + config_field.name.replace('_', '-')
        argument_type = config_field.type
        if get_origin(argument_type) is Union:
            argument_type = next(option for option in get_args(argument_type) if option is not type(None))
        help_text = f'{CONFIG_HELP.get(config_field.name, "")} (default: {config_field.default})'
        if argument_type is bool:
            parser.add_argument(flag, action = argparse.BooleanOptionalAction, default = None, help = help_text)
        else:
            parser.add_argument(flag, type = argument_type, default = None, help = help_text)

## \return The config built from defaults, then the config file, then the flags.
def resolve_config(config_class, arguments: argparse.Namespace, skip = ()):
    values = config_class().to_dict()
    if arguments.config is not None:
        values.update(read_json_config(arguments.config))
    overrides = {config_field.name: getattr(arguments, config_field.name, None) for config_field in fields(config_class) if config_field.name not in skip}
    values.update({key: value for key, value in overrides.items() if value is not None})
    return config_class.from_dict(values)

def parse_widths(text: str):
    try:
        return tuple(int(width) for width in text.split(','))
    except ValueError:
        raise argparse.ArgumentTypeError(f'Hidden widths must be comma-separated integers, got "{text}".')

class UmAucCommandLineArguments:
    def __init__(self, application_name: str, application_description: str):
        self.argument_parser = argparse.ArgumentParser(prog = application_name, description = application_description)
        self.argument_parser.add_argument('--debug', action = 'store_true', default = False, help = 'Log per-batch diagnostics.')
        subcommands = self.argument_parser.add_subparsers(dest = 'subcommand', metavar = 'subcommand')
        self.subcommand_parsers = {}

        # DEFINE THE SHARED FLAGS.
        # --debug is also accepted after the subcommand. Suppressing its default
        # there keeps a --debug given before the subcommand.
        common = argparse.ArgumentParser(add_help = False)
        common.add_argument('--debug', action = 'store_true', default = argparse.SUPPRESS, help = 'Log per-batch diagnostics.')
        common.add_argument('--config', default = None, help = 'JSON config file. Flags override its values.')

        # DEFINE THE SYNTH SUBCOMMAND.
        synth = self._add_subcommand(subcommands, 'synth', common, 'Synthesize ranked bags and a labeled test split.')
        synth.add_argument('--out', default = None, help = 'Directory to write the bags, manifest and test.csv into.')
        add_config_arguments(synth, SynthConfig)
        synth.add_argument('--m', dest = 'm_bags', type = int, default = None, help = 'Same as --m-bags.')

        # DEFINE THE TRAIN SUBCOMMAND.
        trainer = self._add_subcommand(subcommands, 'train', common, 'Train a multi-head scorer with the min-max solver.')
        self._add_training_io_arguments(trainer)
        add_config_arguments(trainer, TrainConfig)

        # DEFINE THE TRAIN-BASELINE SUBCOMMAND.
        baseline = self._add_subcommand(subcommands, 'train-baseline', common, 'Train a single-head scorer with the pairwise solver.')
        self._add_training_io_arguments(baseline)
        add_config_arguments(baseline, PairwiseConfig, skip = ('weights',))

        # DEFINE THE EVAL SUBCOMMAND.
        evaluator = self._add_subcommand(subcommands, 'eval', common, 'Compute the AUC of scores or of a trained checkpoint.')
        evaluator.add_argument('--scores', default = None, help = 'File with one score per line.')
        evaluator.add_argument('--labels', default = None, help = 'File with one +1/-1 label per line.')
        evaluator.add_argument('--checkpoint', default = None, help = 'A trained checkpoint to score --data with.')
        evaluator.add_argument('--data', default = None, help = 'Labeled CSV in the bag file row layout.')
        evaluator.add_argument('--out', default = None, help = 'Optional directory for effective_config.json.')

        # DEFINE THE REPRODUCE SUBCOMMAND.
        reproduce = self._add_subcommand(subcommands, 'reproduce', common, 'Run a prepared study and write its report.')
        reproduce.add_argument('--suite', choices = SUITES, default = None, help = 'The study to run.')
        reproduce.add_argument('--out', default = None, help = 'Directory for report.csv, report.md, report.json and runs/.')
        reproduce.add_argument('--pool', default = None, help = CONFIG_HELP['pool'])
        reproduce.add_argument('--repeats', type = int, default = None, help = 'Seeds per cell (default: the suite default).')
        reproduce.add_argument('--workers', type = int, default = 1, help = 'Cells run on this many threads.')
        reproduce.add_argument('--seed', type = int, default = 0, help = 'The first seed. Repeats use seed, seed + 1, ...')
        add_config_arguments(reproduce, TrainConfig, skip = ('seed',))

    def _add_subcommand(self, subcommands, name: str, common, description: str) -> argparse.ArgumentParser:
        parser = subcommands.add_parser(name, parents = [common], help = description, description = description)
        self.subcommand_parsers[name] = parser
        return parser

    def _add_training_io_arguments(self, parser: argparse.ArgumentParser):
        parser.add_argument('--bags', default = None, help = 'Directory holding manifest.json and the bag files.')
        parser.add_argument('--model', choices = sorted(MODEL_KINDS), default = 'linear', help = 'Scorer architecture.')
        parser.add_argument('--hidden-widths', type = parse_widths, default = DEFAULT_HIDDEN_WIDTHS, help = 'MLP trunk widths, such as 64,64.')
        parser.add_argument('--out', default = None, help = 'Checkpoint path (default: model.umck in the bag directory).')
        parser.add_argument('--log', default = None, help = 'Training log CSV (default: next to the checkpoint).')
        parser.add_argument('--test', default = None, help = 'Labeled test CSV (default: test.csv in the bag directory, if present).')

    def parse(self, raw_command_line: List[str] = None) -> argparse.Namespace:
        arguments = self.argument_parser.parse_args(raw_command_line)
        if arguments.subcommand is None:
            self.argument_parser.error('missing subcommand')
        self._verify(arguments)
        return arguments

    ## Reports missing required flags and unreadable input files as usage errors.
    def _verify(self, arguments: argparse.Namespace):
        parser = self.subcommand_parsers[arguments.subcommand]
        if arguments.subcommand in ('synth', 'reproduce') and arguments.out is None:
            parser.error('missing --out')
        if arguments.subcommand in ('train', 'train-baseline'):
            if arguments.bags is None:
                parser.error('missing --bags')
            self._require_readable(parser, os.path.join(arguments.bags, MANIFEST_FILENAME), '--bags')
            if arguments.test is not None:
                self._require_readable(parser, arguments.test, '--test')
        if arguments.subcommand == 'synth' and arguments.pool_file is not None:
            self._require_readable(parser, arguments.pool_file, '--pool-file')
        if arguments.subcommand == 'reproduce' and arguments.suite is None:
            parser.error('missing --suite')
        if arguments.subcommand == 'eval':
            if arguments.checkpoint is not None or arguments.data is not None:
                if arguments.checkpoint is None or arguments.data is None:
                    parser.error('--checkpoint and --data must be given together')
                self._require_readable(parser, arguments.checkpoint, '--checkpoint')
                self._require_readable(parser, arguments.data, '--data')
            else:
                if arguments.scores is None or arguments.labels is None:
                    parser.error('missing --scores and --labels (or --checkpoint and --data)')
                self._require_readable(parser, arguments.scores, '--scores')
                self._require_readable(parser, arguments.labels, '--labels')
        if arguments.config is not None:
            self._require_readable(parser, arguments.config, '--config')

    @staticmethod
    def _require_readable(parser: argparse.ArgumentParser, filepath: str, flag: str):
        if not os.path.isfile(filepath):
            parser.error(f'cannot read {flag}: {filepath} does not exist')
        if not os.access(filepath, os.R_OK):
            parser.error(f'cannot read {flag}: {filepath} is not readable')

class UmAucEngine:
    def __init__(self, application_name: str):
        self.application_name = application_name

        # CREATE THE LOGGER.
        # Library modules log through children of this logger. main() may run
        # more than once in a process, so stale handlers are replaced.
        self.logger = logging.getLogger('UmAuc')
        self.logger.setLevel(logging.INFO)
        for handler in list(self.logger.handlers):
            self.logger.removeHandler(handler)
        console_handler = logging.StreamHandler()
        formatter = logging.Formatter('%(levelname)s: %(message)s')
        console_handler.setFormatter(formatter)
        self.logger.addHandler(console_handler)

    ## \return The exit code.
    def run(self, arguments: argparse.Namespace) -> int:
        handlers = {
            'synth': self.synth,
            'train': self.train,
            'train-baseline': self.train_baseline,
            'eval': self.evaluate,
            'reproduce': self.reproduce}
        result, exit_code = handlers[arguments.subcommand](arguments)
        print(f'RESULT {json.dumps(result, sort_keys = True)}')
        return exit_code

    def synth(self, arguments: argparse.Namespace):
        config = resolve_config(SynthConfig, arguments)

        # GET THE LABELED POOL.
        if config.pool_file is not None:
            self.logger.info(f'Reading the labeled pool {config.pool_file}')
            features, labels = read_labeled_csv(config.pool_file)
            if np.any((labels != 1) & (labels != -1)):
                raise InvalidParameterError(f'Every row of {config.pool_file} needs a +1 or -1 label.')
            order = np.random.default_rng(config.seed).permutation(len(features))
            test_count = max(1, int(round(TEST_SHARE * len(features))))
            test_rows, train_rows = order[:test_count], order[test_count:]
            train_features, train_labels = features[train_rows], labels[train_rows]
            test_features, test_labels = features[test_rows], labels[test_rows]
        else:
            pool = generate_pool(GaussianPoolSpec.parse(config.pool), config.seed)
            train_features, train_labels = pool.train_features, pool.train_labels
            test_features, test_labels = pool.test_features, pool.test_labels

        # SYNTHESIZE THE BAGS.
        self.logger.info(f'Synthesizing {config.m_bags} bags')
        priors = sample_priors(PriorSpec.parse(config.priors, config.m_bags), derived_seed(config.seed, PRIOR_STREAM))
        sizes = apply_imbalance(ImbalanceSpec.parse(config.imbalance), config.m_bags, len(train_features), derived_seed(config.seed, SIZE_STREAM))
        collection = synthesize_bags(train_features, train_labels, priors, sizes, derived_seed(config.seed, SYNTHESIS_STREAM))

        # WRITE THE BAGS.
        write_bags(collection, arguments.out, seed = config.seed)
        write_labeled_csv(os.path.join(arguments.out, TEST_FILENAME), test_features, test_labels)
        self.write_effective_config(arguments.out, 'synth', config.to_dict())
        return {'out': arguments.out, 'm': collection.m_bags, 'sizes': collection.sizes, 'true_priors': collection.true_priors}, EXIT_SUCCESS

    def train(self, arguments: argparse.Namespace):
        config = resolve_config(TrainConfig, arguments)
        collection, test, checkpoint_path, log_path = self._read_training_inputs(arguments)
        model = create_scorer(arguments.model, collection.dimension, collection.m_bags - 1, arguments.hidden_widths, config.seed)

        # TRAIN.
        result = train(collection, model, config, test = test, checkpoint_path = checkpoint_path)
        self.logger.info(f'Writing checkpoint {checkpoint_path}')
        write_checkpoint(checkpoint_path, result.model, result.state)
        result.log.to_csv(log_path)
        self.write_effective_config(os.path.dirname(checkpoint_path), 'train', self._training_settings(arguments, config.to_dict()))

        final = result.log.final
        return {
            'checkpoint': checkpoint_path,
            'log': log_path,
            'epochs': config.epochs,
            'train_macro_auc': None if final is None else final.train_macro_auc,
            'test_auc': None if final is None else final.test_auc}, EXIT_SUCCESS

    def train_baseline(self, arguments: argparse.Namespace):
        config = resolve_config(PairwiseConfig, arguments, skip = ('weights',))
        collection, test, checkpoint_path, log_path = self._read_training_inputs(arguments)
        model = create_scorer(arguments.model, collection.dimension, 1, arguments.hidden_widths, config.seed)

        # TRAIN.
        model, trace = train_pairwise(collection, model, config)
        self.logger.info(f'Writing checkpoint {checkpoint_path}')
        write_checkpoint(checkpoint_path, model)
        with open(log_path, 'w') as log_file:
            log_file.write('epoch,pairwise_risk\n')
            for epoch, risk in enumerate(trace.risks, start = 1):
                log_file.write(f'{epoch},{risk!r}\n')
        self.write_effective_config(os.path.dirname(checkpoint_path), 'train-baseline', self._training_settings(arguments, config.to_dict()))

        test_auc = None
        if test is not None:
            test_auc = auc_exact(model.forward(test[0])[:, 0], test[1])
            self.logger.info(f'Test AUC {test_auc:.4f}')
        return {
            'checkpoint': checkpoint_path,
            'log': log_path,
            'final_risk': trace.risks[-1] if trace.risks else None,
            'test_auc': test_auc}, EXIT_SUCCESS

    def evaluate(self, arguments: argparse.Namespace):
        if arguments.checkpoint is not None:
            checkpoint = read_checkpoint(arguments.checkpoint)
            features, labels = read_labeled_csv(arguments.data)
            scores = AggregatedScorer(checkpoint.model).score(features)
        else:
            scores = np.loadtxt(arguments.scores, dtype = np.float64, ndmin = 1, delimiter = ',')
            labels = np.loadtxt(arguments.labels, dtype = np.float64, ndmin = 1, delimiter = ',').astype(np.int64)
        auc = auc_exact(scores, labels)
        print(repr(auc))
        if arguments.out is not None:
            settings = {key: getattr(arguments, key) for key in ('scores', 'labels', 'checkpoint', 'data')}
            self.write_effective_config(arguments.out, 'eval', settings)
        return {'auc': auc}, EXIT_SUCCESS

    def reproduce(self, arguments: argparse.Namespace):
        train_config = resolve_config(TrainConfig, arguments, skip = ('seed',))
        pool = GaussianPoolSpec.parse(arguments.pool) if arguments.pool is not None else None
        self.logger.info(f'Running the {arguments.suite} suite')
        report = run_suite(arguments.suite, pool, arguments.repeats, train_config, arguments.seed, arguments.workers)
        report.write(arguments.out)
        settings = {
            'suite': arguments.suite,
            'pool': None if pool is None else pool.to_dict(),
            'repeats': arguments.repeats,
            'seed': arguments.seed,
            'train': train_config.to_dict(),
            'experiment': report.spec.to_dict()}
        self.write_effective_config(arguments.out, 'reproduce', settings)

        exit_code = EXIT_SUCCESS
        failed_checks = [check.name for check in report.checks if not check.passed]
        if failed_checks:
            self.logger.error(f'Checks did not hold: {", ".join(failed_checks)}')
            exit_code = EXIT_RUNTIME_FAILURE
        return {
            'suite': arguments.suite,
            'out': arguments.out,
            'digest': report.digest,
            'cells': report.summary_rows(),
            'checks_passed': report.all_checks_passed}, exit_code

    def _read_training_inputs(self, arguments: argparse.Namespace):
        self.logger.info(f'Reading bags from {arguments.bags}')
        collection = read_bags(arguments.bags)
        test_path = arguments.test
        default_test_path = os.path.join(arguments.bags, TEST_FILENAME)
        if test_path is None and os.path.isfile(default_test_path):
            test_path = default_test_path
        test = None
        if test_path is not None:
            test = read_labeled_csv(test_path)
            if np.any((test[1] != 1) & (test[1] != -1)):
                raise InvalidParameterError(f'Every row of {test_path} needs a +1 or -1 label.')
        checkpoint_path = arguments.out or os.path.join(arguments.bags, 'model.umck')
        log_path = arguments.log or os.path.join(os.path.dirname(checkpoint_path) or '.', 'train_log.csv')
        Path(os.path.dirname(checkpoint_path) or '.').mkdir(parents = True, exist_ok = True)
        return collection, test, checkpoint_path, log_path

    @staticmethod
    def _training_settings(arguments: argparse.Namespace, config: dict) -> dict:
        return {
            'bags': arguments.bags,
            'model': arguments.model,
            'hidden_widths': list(arguments.hidden_widths),
            'test': arguments.test,
            'config': config}

    def write_effective_config(self, directory_path: str, subcommand: str, settings: dict):
        directory_path = directory_path or '.'
        Path(directory_path).mkdir(parents = True, exist_ok = True)
        effective_config = {'subcommand': subcommand, 'settings': settings, 'digest': config_digest(settings)}
        with open(os.path.join(directory_path, EFFECTIVE_CONFIG_FILENAME), 'w') as config_file:
            json.dump(effective_config, config_file, indent = 2, sort_keys = True)

def main(raw_command_line: List[str] = None) -> int:
    # PARSE THE COMMAND-LINE ARGUMENTS.
    command_line = UmAucCommandLineArguments(APPLICATION_NAME, APPLICATION_DESCRIPTION)
    command_line_arguments = command_line.parse(raw_command_line)

    # RUN THE SUBCOMMAND.
    engine = UmAucEngine(APPLICATION_NAME)
    if command_line_arguments.debug:
        engine.logger.setLevel(logging.DEBUG)
    try:
        return engine.run(command_line_arguments)
    except (UmAucError, BinaryParsingError, AssertionError, OSError, ValueError) as error:
        engine.logger.error(f'{type(error).__name__}: {error}')
        return EXIT_RUNTIME_FAILURE

if __name__ == '__main__':
    sys.exit(main())
