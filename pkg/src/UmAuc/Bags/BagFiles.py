import csv
import json
import logging
import os
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from ..Exceptions import UmAucError
from .Bag import NO_LABEL, Bag, BagCollection, BagOrderingError

logger = logging.getLogger(__name__)

MANIFEST_FILENAME = 'manifest.json'
FORMAT_VERSION = 1
MANIFEST_KEYS = {'m', 'd', 'bag_files', 'asserted_order', 'true_priors', 'seed', 'format_version'}

## DEFINE BAG FILE ERRORS.
class BagFileError(UmAucError):
    pass

class MalformedManifestError(BagFileError):
    pass

class MissingBagFileError(BagFileError):
    pass

class DimensionMismatchError(BagFileError):
    pass

## The textual forms of the hidden label column.
LABEL_TEXT = {1: '+1', -1: '-1', NO_LABEL: 'NA'}
TEXT_LABEL = {'+1': 1, '1': 1, '-1': -1, 'NA': NO_LABEL}

## Writes a collection as one headerless CSV per bag plus a JSON manifest.
## Each row holds the d features, written in Python's shortest round-trip
## decimal form, and then the hidden label (+1, -1 or NA).
## \param[in] directory_path - The directory to write into. It is created if needed.
## \param[in] seed - The synthesis seed, recorded for provenance.
def write_bags(collection: BagCollection, directory_path: str, seed: Optional[int] = None) -> str:
    Path(directory_path).mkdir(parents = True, exist_ok = True)
    bag_filenames = []
    for bag in collection:
        bag_filename = f'bag_{bag.id:03d}.csv'
        write_labeled_csv(os.path.join(directory_path, bag_filename), bag.features, bag.reveal_hidden_labels())
        bag_filenames.append(bag_filename)

    # WRITE THE MANIFEST.
    manifest = {
        'm': collection.m_bags,
        'd': collection.dimension,
        'bag_files': bag_filenames,
        'asserted_order': [bag.id for bag in collection],
        'true_priors': collection.true_priors,
        'has_hidden_labels': [bag.has_hidden_labels for bag in collection],
        'seed': seed,
        'format_version': FORMAT_VERSION}
    manifest_path = os.path.join(directory_path, MANIFEST_FILENAME)
    with open(manifest_path, 'w') as manifest_file:
        json.dump(manifest, manifest_file, indent = 2)
    logger.info(f'Wrote {collection.m_bags} bags to {directory_path}')
    return manifest_path

## Reads a collection written by write_bags().
## \param[in] directory_path - The directory holding manifest.json, or the manifest itself.
def read_bags(directory_path: str) -> BagCollection:
    # READ THE MANIFEST.
    if os.path.isfile(directory_path):
        manifest_path = directory_path
        directory_path = os.path.dirname(directory_path)
    else:
        manifest_path = os.path.join(directory_path, MANIFEST_FILENAME)
    if not os.path.exists(manifest_path):
        raise MissingBagFileError(f'No manifest found at {manifest_path}.')
    try:
        with open(manifest_path) as manifest_file:
            manifest = json.load(manifest_file)
    except json.JSONDecodeError as error:
        raise MalformedManifestError(f'Manifest {manifest_path} is not valid JSON: {error}')
    _verify_manifest(manifest, manifest_path)

    # READ THE BAG FILES.
    # The i-th bag file holds the bag whose id is the i-th entry of the asserted order.
    m_bags = manifest['m']
    true_priors = manifest['true_priors']
    # Manifests without this key infer it from the label column.
    has_hidden_labels = manifest.get('has_hidden_labels')
    bags = []
    for index, (bag_filename, bag_id) in enumerate(zip(manifest['bag_files'], manifest['asserted_order'])):
        bag_path = os.path.join(directory_path, bag_filename)
        if not os.path.exists(bag_path):
            raise MissingBagFileError(f'Bag file {bag_path} listed in the manifest is missing.')
        features, labels = read_labeled_csv(bag_path)
        if features.shape[1] != manifest['d']:
            raise DimensionMismatchError(f'{bag_path} has {features.shape[1]} features per row, but the manifest declares d={manifest["d"]}.')
        prior = None if true_priors is None else true_priors[index]
        if has_hidden_labels is None:
            has_labels = bool(np.any(labels != NO_LABEL))
        else:
            has_labels = has_hidden_labels[index]
        hidden_labels = labels if has_labels else None
        bags.append(Bag(bag_id, features, hidden_labels, prior))
    logger.debug(f'Read {m_bags} bags from {directory_path}')
    return BagCollection(bags)

def _verify_manifest(manifest, manifest_path: str):
    if not isinstance(manifest, dict):
        raise MalformedManifestError(f'Manifest {manifest_path} must hold a JSON object.')
    missing_keys = MANIFEST_KEYS - set(manifest)
    if missing_keys:
        raise MalformedManifestError(f'Manifest {manifest_path} is missing keys {sorted(missing_keys)}.')
    if manifest['format_version'] != FORMAT_VERSION:
        raise MalformedManifestError(f'Unsupported manifest format version {manifest["format_version"]}.')
    m_bags = manifest['m']
    if not isinstance(m_bags, int) or m_bags < 2:
        raise MalformedManifestError(f'Manifest declares an invalid bag count m={m_bags}.')
    if not isinstance(manifest['d'], int) or manifest['d'] < 1:
        raise MalformedManifestError(f'Manifest declares an invalid dimension d={manifest["d"]}.')
    if len(manifest['bag_files']) != m_bags:
        raise MalformedManifestError(f'Manifest declares m={m_bags} but lists {len(manifest["bag_files"])} bag files.')
    if sorted(manifest['asserted_order']) != list(range(1, m_bags + 1)):
        raise MalformedManifestError(f'The asserted order {manifest["asserted_order"]} is not a permutation of 1..{m_bags}.')
    true_priors = manifest['true_priors']
    if true_priors is not None and len(true_priors) != m_bags:
        raise MalformedManifestError(f'Manifest declares m={m_bags} but lists {len(true_priors)} true priors.')
    has_hidden_labels = manifest.get('has_hidden_labels')
    if has_hidden_labels is not None:
        if len(has_hidden_labels) != m_bags or not all(isinstance(flag, bool) for flag in has_hidden_labels):
            raise MalformedManifestError(f'Manifest must list one true/false hidden label flag per bag, got {has_hidden_labels}.')

    # VERIFY THE PRIORS ARE IN THE ASSERTED ORDER.
    if true_priors is not None:
        priors_by_id = dict(zip(manifest['asserted_order'], true_priors))
        ordered = [priors_by_id[bag_id] for bag_id in range(1, m_bags + 1)]
        for upper, lower in zip(ordered, ordered[1:]):
            if upper < lower:
                raise BagOrderingError(f'The true priors in {manifest_path} are not in descending order of bag id: {ordered}.')

## Writes labeled (or unlabeled) instances in the bag file row layout.
## \param[in] labels - +1/-1/NO_LABEL per row, or None to write every row as NA.
def write_labeled_csv(filepath: str, features, labels = None):
    features = np.asarray(features, dtype = np.float64)
    with open(filepath, 'w', newline = '') as csv_file:
        writer = csv.writer(csv_file, lineterminator = '\n')
        for index, row in enumerate(features):
            label = NO_LABEL if labels is None else int(labels[index])
            writer.writerow([repr(float(value)) for value in row] + [LABEL_TEXT[label]])

## \return (features, labels) read from a file in the bag file row layout.
##         Unlabeled rows have label NO_LABEL.
def read_labeled_csv(filepath: str) -> Tuple[np.ndarray, np.ndarray]:
    rows: List[List[float]] = []
    labels: List[int] = []
    with open(filepath, newline = '') as csv_file:
        for line_number, row in enumerate(csv.reader(csv_file), start = 1):
            if not row:
                continue
            if len(row) < 2:
                raise BagFileError(f'{filepath}:{line_number}: expected at least one feature and a label column.')
            label_text = row[-1].strip()
            if label_text not in TEXT_LABEL:
                raise BagFileError(f'{filepath}:{line_number}: unknown hidden label "{label_text}".')
            try:
                rows.append([float(value) for value in row[:-1]])
            except ValueError as error:
                raise BagFileError(f'{filepath}:{line_number}: {error}')
            labels.append(TEXT_LABEL[label_text])

    # VERIFY THE ROWS.
    if not rows:
        raise BagFileError(f'{filepath} holds no instances.')
    widths = {len(row) for row in rows}
    if len(widths) != 1:
        raise DimensionMismatchError(f'{filepath} has rows with different feature counts: {sorted(widths)}.')
    return np.array(rows, dtype = np.float64), np.array(labels, dtype = np.int8)
