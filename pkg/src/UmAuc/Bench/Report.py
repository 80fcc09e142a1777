import csv
import io
import json
import logging
import os
from pathlib import Path
import platform
from typing import Dict, List, Optional

import numpy as np
import scipy

from ..TrainConfig import config_digest
from .Experiment import CellResult, ExperimentSpec

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ['prior', 'm', 'imbalance', 'n_train', 'solver', 'runs', 'mean_test_auc', 'std_test_auc', 'gap', 'diagnostic']

## A pass/fail trend check recorded alongside a report.
class TrendCheck:
    def __init__(self, name: str, passed: bool, detail: str):
        self.name = name
        self.passed = bool(passed)
        self.detail = detail

    def to_dict(self) -> dict:
        return {'name': self.name, 'passed': self.passed, 'detail': self.detail}

## The aggregated results of an experiment.
##
## report.csv and report.md hold only seeded quantities, so rerunning the same
## spec reproduces them byte for byte. Wall times and machine information go
## to report.json.
class ExperimentReport:
    def __init__(self, spec: ExperimentSpec, cells: List[CellResult], bayes_auc: Optional[float] = None, wall_seconds: float = 0.0):
        self.spec = spec
        self.cells = cells
        self.bayes_auc = bayes_auc
        self.wall_seconds = wall_seconds
        self.checks: List[TrendCheck] = []

    ## The digest of every setting that can change a result; the worker count cannot.
    @property
    def digest(self) -> str:
        values = self.spec.to_dict()
        del values['workers']
        return config_digest(values)

    @property
    def seeds(self) -> List[int]:
        return self.spec.seeds

    @property
    def all_checks_passed(self) -> bool:
        return all(check.passed for check in self.checks)

    ## Records a trend check, warning when it does not hold.
    def add_check(self, name: str, passed: bool, detail: str) -> TrendCheck:
        check = TrendCheck(name, passed, detail)
        self.checks.append(check)
        if not check.passed:
            logger.warning(f'Check "{name}" did not hold: {detail}')
        return check

    ## \return The cells whose attributes match every given value.
    def find(self, **criteria) -> List[CellResult]:
        return [result for result in self.cells if all(getattr(result.cell, key) == value for key, value in criteria.items())]

    ## \return The mean test AUC of the single cell matching the criteria.
    def mean_test_auc(self, **criteria) -> Optional[float]:
        matches = self.find(**criteria)
        if len(matches) != 1:
            raise KeyError(f'Expected one cell matching {criteria}, found {len(matches)}.')
        return matches[0].mean_test_auc

    ## \return Bayes AUC minus the mean test AUC, when the Bayes AUC is known.
    def gap(self, result: CellResult) -> Optional[float]:
        if self.bayes_auc is None or result.mean_test_auc is None:
            return None
        return self.bayes_auc - result.mean_test_auc

    def summary_rows(self) -> List[dict]:
        rows = []
        for result in self.cells:
            cell = result.cell
            rows.append({
                'prior': cell.prior,
                'm': cell.m_bags,
                'imbalance': cell.imbalance,
                'n_train': cell.n_train,
                'solver': cell.solver,
                'runs': len(result.runs),
                'mean_test_auc': result.mean_test_auc,
                'std_test_auc': result.std_test_auc,
                'gap': self.gap(result),
                'diagnostic': result.diagnostic})
        return rows

    def to_csv_text(self) -> str:
        output = io.StringIO()
        writer = csv.writer(output, lineterminator = '\n')
        writer.writerow(REPORT_COLUMNS)
        for row in self.summary_rows():
            writer.writerow([_csv_value(row[column]) for column in REPORT_COLUMNS])
        return output.getvalue()

    ## Renders the table with one row per prior distribution and one column per
    ## combination of the other grid axes that vary.
    def to_markdown(self) -> str:
        # FIND THE AXES THAT NAME THE COLUMNS.
        axes = [('m_bags', 'm'), ('imbalance', ''), ('n_train', 'n'), ('solver', '')]
        varying_axes = [(attribute, prefix) for attribute, prefix in axes if len({getattr(result.cell, attribute) for result in self.cells}) > 1]
        if not varying_axes:
            varying_axes = [('m_bags', 'm')]

        def column_name(cell) -> str:
            return ' '.join(f'{prefix}={getattr(cell, attribute)}' if prefix else str(getattr(cell, attribute)) for attribute, prefix in varying_axes)

        row_names = list(dict.fromkeys(result.cell.prior for result in self.cells))
        column_names = list(dict.fromkeys(column_name(result.cell) for result in self.cells))
        table: Dict[tuple, str] = {}
        for result in self.cells:
            if result.failed:
                text = 'failed'
            else:
                text = f'{result.mean_test_auc:.3f} ± {result.std_test_auc:.3f}'
            table[(result.cell.prior, column_name(result.cell))] = text

        # RENDER THE TABLE.
        lines = [f'# {self.spec.name}', '']
        lines.append(f'Mean test AUC ± standard deviation over {self.spec.repeats} seeds ({", ".join(str(seed) for seed in self.seeds)}).')
        if self.bayes_auc is not None:
            lines.append(f'Bayes AUC of the pool: {self.bayes_auc:.4f}.')
        lines.append(f'Config digest: `{self.digest}`')
        lines.append('')
        lines.append('| priors | ' + ' | '.join(column_names) + ' |')
        lines.append('|---|' + '---|' * len(column_names))
        for row_name in row_names:
            entries = [table.get((row_name, column), '') for column in column_names]
            lines.append(f'| {row_name} | ' + ' | '.join(entries) + ' |')

        # LIST THE CHECKS AND FAILURES.
        if self.checks:
            lines.append('')
            for check in self.checks:
                lines.append(f'- {"PASS" if check.passed else "FAIL"} {check.name}: {check.detail}')
        failed = [result for result in self.cells if result.failed]
        if failed:
            lines.append('')
            for result in failed:
                lines.append(f'- cell {result.cell.key} aborted: {result.diagnostic}')
        return '\n'.join(lines) + '\n'

    def to_dict(self) -> dict:
        return {
            'name': self.spec.name,
            'spec': self.spec.to_dict(),
            'digest': self.digest,
            'seeds': self.seeds,
            'bayes_auc': self.bayes_auc,
            'checks': [check.to_dict() for check in self.checks],
            'cells': [
                dict(row, runs = [
                    {'repeat': run.repeat, 'seed': run.seed, 'test_auc': run.test_auc, 'priors': run.priors, 'sizes': run.sizes, 'seconds': run.seconds}
                    for run in result.runs])
                for row, result in zip(self.summary_rows(), self.cells)],
            'wall_seconds': self.wall_seconds,
            'machine': machine_info()}

    ## Writes report.csv, report.md, report.json and one log per run under runs/.
    ## \return The paths written.
    def write(self, directory_path: str) -> List[str]:
        runs_directory = os.path.join(directory_path, 'runs')
        Path(runs_directory).mkdir(parents = True, exist_ok = True)
        written = []
        for filename, text in (('report.csv', self.to_csv_text()), ('report.md', self.to_markdown())):
            filepath = os.path.join(directory_path, filename)
            with open(filepath, 'w', newline = '', encoding = 'utf-8') as report_file:
                report_file.write(text)
            written.append(filepath)
        json_path = os.path.join(directory_path, 'report.json')
        with open(json_path, 'w') as json_file:
            json.dump(self.to_dict(), json_file, indent = 2)
        written.append(json_path)

        # WRITE THE PER-RUN LOGS.
        for result in self.cells:
            for run in result.runs:
                run_path = os.path.join(runs_directory, f'{result.cell.key}_seed{run.seed}.csv')
                if run.log is not None:
                    run.log.to_csv(run_path, include_timing = False)
                elif run.trace is not None:
                    with open(run_path, 'w', newline = '') as run_file:
                        writer = csv.writer(run_file, lineterminator = '\n')
                        writer.writerow(['epoch', 'pairwise_risk'])
                        writer.writerows([epoch, repr(risk)] for epoch, risk in enumerate(run.trace.risks, start = 1))
                written.append(run_path)
        logger.info(f'Wrote the "{self.spec.name}" report to {directory_path}')
        return written

def machine_info() -> dict:
    return {
        'platform': platform.platform(),
        'processor': platform.processor(),
        'cpu_count': os.cpu_count(),
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__}

def _csv_value(value) -> str:
    if value is None:
        return 'NA'
    if isinstance(value, float):
        return repr(value)
    return str(value)
