import json
import os
import shutil
import tempfile

import numpy as np
import pytest

from UmAuc.Bags.Bag import Bag, BagCollection, BagOrderingError, BagValidationError, DegeneratePriorsError
from UmAuc.Bags.BagFiles import (
    MANIFEST_FILENAME, DimensionMismatchError, MalformedManifestError, MissingBagFileError,
    read_bags, read_labeled_csv, write_bags, write_labeled_csv)
from UmAuc.Bags.GaussianPool import GaussianPoolSpec, generate_pool
from UmAuc.Bags.Imbalance import ImbalanceMode, ImbalanceSpec, apply_imbalance
from UmAuc.Bags.Priors import PriorKind, PriorSpec, sample_priors
from UmAuc.Bags.Synthesis import SingleClassPoolError, synthesize_bags
from UmAuc.Exceptions import InvalidParameterError

## \return A small synthesized collection from the default Gaussian pool.
def small_collection(priors = (0.9, 0.5, 0.1), size = 20, seed = 0) -> BagCollection:
    pool = generate_pool(GaussianPoolSpec(n_train = 200, n_test = 50), seed)
    return synthesize_bags(pool.train_features, pool.train_labels, list(priors), [size] * len(priors), seed)

## PRIORS.
@pytest.mark.parametrize('kind', [PriorKind.UNIFORM, PriorKind.BIASED, PriorKind.CONCENTRATED, PriorKind.BIASED_CONCENTRATED])
def test_sampled_priors_are_sorted_and_in_range(kind):
    for seed in range(20):
        priors = sample_priors(PriorSpec(kind, 10), seed)
        assert len(priors) == 10
        assert all(0.0 <= prior <= 1.0 for prior in priors)
        assert priors == sorted(priors, reverse = True)
        assert priors[0] > priors[-1]

def test_sampled_priors_are_deterministic():
    spec = PriorSpec(PriorKind.UNIFORM, 10)
    assert sample_priors(spec, 7) == sample_priors(spec, 7)
    assert sample_priors(spec, 7) != sample_priors(spec, 8)

@pytest.mark.parametrize('kind, expected_mean', [
    (PriorKind.UNIFORM, 0.5),
    (PriorKind.BIASED, 5.0 / 6.0),
    (PriorKind.CONCENTRATED, 0.5),
    (PriorKind.BIASED_CONCENTRATED, 5.0 / 7.0)])
def test_sampled_priors_follow_the_beta_mean(kind, expected_mean):
    for seed in range(3):
        priors = sample_priors(PriorSpec(kind, 1000), seed)
        assert abs(np.mean(priors) - expected_mean) < 0.05

def test_explicit_priors_pass_through():
    assert sample_priors(PriorSpec.parse('0.9,0.1'), 0) == [0.9, 0.1]
    # Explicit lists are sorted like sampled ones.
    assert sample_priors(PriorSpec.parse('0.1,0.9,0.5'), 0) == [0.9, 0.5, 0.1]

def test_equal_explicit_priors_are_degenerate():
    with pytest.raises(DegeneratePriorsError, match = 'degenerate priors'):
        sample_priors(PriorSpec.parse('0.4,0.4,0.4'), 0)

def test_prior_spec_parsing():
    assert PriorSpec.parse('D_u', 4) == PriorSpec(PriorKind.UNIFORM, 4)
    assert PriorSpec.parse('biased_concentrated', 3) == PriorSpec(PriorKind.BIASED_CONCENTRATED, 3)
    assert PriorSpec.parse('d_c', 5).kind == PriorKind.CONCENTRATED
    with pytest.raises(InvalidParameterError):
        PriorSpec.parse('D_u')
    with pytest.raises(InvalidParameterError):
        PriorSpec.parse('0.9,0.1', 3)
    with pytest.raises(InvalidParameterError):
        PriorSpec.parse('sideways', 3)
    with pytest.raises(InvalidParameterError):
        PriorSpec.parse('1.5,0.1')
    with pytest.raises(InvalidParameterError):
        PriorSpec(PriorKind.UNIFORM, 1)

## IMBALANCE.
def test_balanced_sizes():
    assert apply_imbalance(ImbalanceSpec(), 10, 1000, 0) == [100] * 10
    # Sizes round up.
    assert apply_imbalance(ImbalanceSpec(), 3, 10, 0) == [4, 4, 4]

def test_size_reduction_shrinks_half_of_the_bags():
    sizes = apply_imbalance(ImbalanceSpec.parse('tau=0.5'), 4, 400, 0)
    assert sorted(sizes) == [50, 50, 100, 100]

    sizes = apply_imbalance(ImbalanceSpec.parse('tau=0.2'), 10, 1000, 3)
    assert sorted(sizes) == [20] * 5 + [100] * 5

    # With an odd bag count, ceil(m / 2) bags shrink.
    sizes = apply_imbalance(ImbalanceSpec.parse('tau=0.6'), 5, 500, 1)
    assert sorted(sizes) == [60, 60, 60, 100, 100]

def test_unit_tau_matches_no_imbalance():
    for seed in range(5):
        assert apply_imbalance(ImbalanceSpec.parse('tau=1.0'), 10, 1000, seed) == apply_imbalance(ImbalanceSpec(), 10, 1000, seed)

def test_random_sizes_sum_to_the_training_size():
    for seed in range(100):
        sizes = apply_imbalance(ImbalanceSpec.parse('random'), 5, 500, seed)
        assert len(sizes) == 5
        assert sum(sizes) == 500
        assert min(sizes) >= 1

@pytest.mark.parametrize('text', ['tau=0', 'tau=-0.5', 'tau=1.5', 'tau=abc', 'skewed'])
def test_invalid_imbalance_is_rejected(text):
    with pytest.raises(InvalidParameterError):
        ImbalanceSpec.parse(text)

def test_imbalance_argument_checks():
    with pytest.raises(InvalidParameterError):
        ImbalanceSpec(ImbalanceMode.SIZE_REDUCTION, None)
    with pytest.raises(InvalidParameterError):
        apply_imbalance(ImbalanceSpec(), 1, 100, 0)
    with pytest.raises(InvalidParameterError):
        apply_imbalance(ImbalanceSpec(), 10, 5, 0)
    assert ImbalanceSpec.parse('tau=0.25').label == 'tau=0.25'
    assert ImbalanceSpec.parse('RANDOM').label == 'random'

## GAUSSIAN POOL.
def test_default_pool_bayes_auc():
    # Phi(2) for means (+1, +1) and (-1, -1) with unit sigma.
    assert GaussianPoolSpec().bayes_auc() == pytest.approx(0.9772498680518208, abs = 1e-12)

def test_pool_has_the_requested_counts():
    spec = GaussianPoolSpec(n_train = 301, n_test = 99)
    pool = generate_pool(spec, 0)
    assert pool.train_features.shape == (301, 2)
    assert pool.test_features.shape == (99, 2)
    assert int(np.sum(pool.train_labels == 1)) == round(0.5 * 301)
    assert int(np.sum(pool.test_labels == 1)) == round(0.5 * 99)
    assert set(np.unique(pool.train_labels)) == {-1, 1}

def test_pools_differing_in_training_size_share_the_test_split():
    small = generate_pool(GaussianPoolSpec(n_train = 100), 4)
    large = generate_pool(GaussianPoolSpec(n_train = 6400), 4)
    assert np.array_equal(small.test_features, large.test_features)
    assert np.array_equal(small.test_labels, large.test_labels)

def test_pool_spec_parsing():
    spec = GaussianPoolSpec.parse('gaussian:d=5,n_train=8000,sigma=1.5')
    assert spec.dimension == 5
    assert spec.mean_positive == (1.0,) * 5
    assert spec.n_train == 8000
    assert spec.sigma == 1.5
    assert GaussianPoolSpec.parse('gaussian') == GaussianPoolSpec()
    assert GaussianPoolSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(InvalidParameterError):
        GaussianPoolSpec.parse('uniform:d=2')
    with pytest.raises(InvalidParameterError):
        GaussianPoolSpec.parse('gaussian:depth=2')
    with pytest.raises(InvalidParameterError):
        GaussianPoolSpec(sigma = 0.0)

## SYNTHESIS.
def test_degenerate_coins_give_pure_bags():
    pool = generate_pool(GaussianPoolSpec(n_train = 100, n_test = 10), 0)
    collection = synthesize_bags(pool.train_features, pool.train_labels, [1.0, 0.0], [50, 50], 0)
    assert np.all(collection.bag(1).reveal_hidden_labels() == 1)
    assert np.all(collection.bag(2).reveal_hidden_labels() == -1)

def test_realized_fractions_converge_to_the_priors():
    pool = generate_pool(GaussianPoolSpec(n_train = 1000, n_test = 10), 0)
    for seed in range(20):
        collection = synthesize_bags(pool.train_features, pool.train_labels, [0.8, 0.2], [10000, 10000], seed)
        for bag in collection:
            assert abs(bag.realized_positive_fraction() - bag.true_prior) < 0.02

def test_equal_bags():
    pool = generate_pool(GaussianPoolSpec(), 0)
    priors = sample_priors(PriorSpec(PriorKind.UNIFORM, 10), 0)
    sizes = apply_imbalance(ImbalanceSpec(), 10, 4000, 0)
    collection = synthesize_bags(pool.train_features, pool.train_labels, priors, sizes, 0)
    assert collection.m_bags == 10
    assert collection.sizes == [400] * 10
    assert collection.total_size == 4000

def test_bags_are_numbered_by_descending_prior():
    pool = generate_pool(GaussianPoolSpec(n_train = 100, n_test = 10), 0)
    collection = synthesize_bags(pool.train_features, pool.train_labels, [0.2, 0.8, 0.5], [10, 20, 30], 0)
    assert collection.true_priors == [0.8, 0.5, 0.2]
    assert collection.sizes == [20, 30, 10]

    # Ties keep their input order.
    collection = synthesize_bags(pool.train_features, pool.train_labels, [0.5, 0.5, 0.1], [10, 20, 30], 0)
    assert collection.sizes == [10, 20, 30]

def test_synthesis_is_deterministic():
    assert small_collection(seed = 3) == small_collection(seed = 3)
    assert small_collection(seed = 3) != small_collection(seed = 4)

def test_single_class_pool_is_rejected():
    features = np.zeros((10, 2))
    with pytest.raises(SingleClassPoolError, match = 'single-class pool'):
        synthesize_bags(features, np.ones(10), [0.9, 0.1], [5, 5], 0)
    with pytest.raises(InvalidParameterError):
        synthesize_bags(features, np.array([1, -1] * 5), [0.9, 0.1], [5], 0)

## BAGS AND COLLECTIONS.
def test_bag_validation():
    with pytest.raises(BagValidationError):
        Bag(1, np.zeros((0, 2)))
    with pytest.raises(BagValidationError):
        Bag(1, np.zeros(3))
    with pytest.raises(BagValidationError):
        Bag(1, np.zeros((3, 2)), hidden_labels = [1, -1])
    with pytest.raises(BagValidationError):
        Bag(1, np.zeros((2, 2)), hidden_labels = [1, 2])
    with pytest.raises(BagValidationError):
        Bag(1, np.zeros((2, 2)), true_prior = 1.2)

def test_collection_validation():
    features = np.zeros((3, 2))
    with pytest.raises(BagValidationError):
        BagCollection([Bag(1, features)])
    with pytest.raises(BagValidationError):
        BagCollection([Bag(1, features), Bag(3, features)])
    with pytest.raises(BagValidationError):
        BagCollection([Bag(1, features), Bag(2, np.zeros((3, 4)))])
    with pytest.raises(BagOrderingError):
        BagCollection([Bag(1, features, true_prior = 0.3), Bag(2, features, true_prior = 0.6)])
    with pytest.raises(DegeneratePriorsError):
        BagCollection([Bag(1, features, true_prior = 0.5), Bag(2, features, true_prior = 0.5)])

    # Bags without known priors are trusted to be in order.
    collection = BagCollection([Bag(2, features), Bag(1, features)])
    assert [bag.id for bag in collection] == [1, 2]
    assert collection.true_priors is None

def test_pooled_sample_is_in_bag_order():
    collection = small_collection(size = 7)
    features, bag_ids = collection.pooled()
    assert features.shape == (21, 2)
    assert bag_ids.tolist() == [1] * 7 + [2] * 7 + [3] * 7
    assert np.array_equal(features[7:14], collection.bag(2).features)

def test_bag_data_is_read_only():
    bag = small_collection().bag(1)
    with pytest.raises(ValueError):
        bag.features[0, 0] = 1.0
    with pytest.raises(ValueError):
        bag.reveal_hidden_labels()[0] = 1

def test_replacing_true_priors_keeps_the_data():
    collection = small_collection()
    edited = collection.with_true_priors([0.7, 0.6, 0.2])
    assert edited.true_priors == [0.7, 0.6, 0.2]
    assert np.array_equal(edited.bag(2).features, collection.bag(2).features)
    with pytest.raises(BagOrderingError):
        collection.with_true_priors([0.2, 0.6, 0.7])

## BAG FILES.
def test_bag_files_round_trip():
    collection = small_collection()
    directory = tempfile.mkdtemp()
    try:
        # WRITE AND READ THE BAGS.
        write_bags(collection, directory, seed = 0)
        assert sorted(os.listdir(directory)) == ['bag_001.csv', 'bag_002.csv', 'bag_003.csv', MANIFEST_FILENAME]
        assert read_bags(directory) == collection

        # VERIFY THE MANIFEST.
        with open(os.path.join(directory, MANIFEST_FILENAME)) as manifest_file:
            manifest = json.load(manifest_file)
        assert manifest['m'] == 3
        assert manifest['d'] == 2
        assert manifest['asserted_order'] == [1, 2, 3]
        assert manifest['true_priors'] == [0.9, 0.5, 0.1]
        assert manifest['seed'] == 0
        assert manifest['format_version'] == 1
    finally:
        shutil.rmtree(directory)

def test_unlabeled_bags_round_trip(tmp_path):
    collection = BagCollection([
        Bag(1, [[0.1, 1e-17], [2.5, -3.0]]),
        Bag(2, [[1.0 / 3.0, 7.0]])])
    write_bags(collection, str(tmp_path))
    assert read_bags(str(tmp_path)) == collection
    assert read_bags(str(tmp_path / MANIFEST_FILENAME)) == collection

def test_bags_whose_labels_are_all_missing_round_trip(tmp_path):
    # A bag whose label column is all NA still has hidden labels,
    # which is not the same as a bag with no labels at all.
    collection = BagCollection([
        Bag(1, [[0.5, 1.0], [1.5, -2.0]], hidden_labels = [0, 0]),
        Bag(2, [[-1.0, 0.25]])])
    write_bags(collection, str(tmp_path))
    with open(tmp_path / MANIFEST_FILENAME) as manifest_file:
        assert json.load(manifest_file)['has_hidden_labels'] == [True, False]
    read_back = read_bags(str(tmp_path))
    assert read_back == collection
    assert read_back.bag(1).has_hidden_labels
    assert read_back.bag(1).reveal_hidden_labels().tolist() == [0, 0]
    assert not read_back.bag(2).has_hidden_labels

def test_manifests_without_hidden_label_flags_infer_them(tmp_path):
    collection = small_collection()
    write_bags(collection, str(tmp_path))
    manifest_path = tmp_path / MANIFEST_FILENAME
    with open(manifest_path) as manifest_file:
        manifest = json.load(manifest_file)
    del manifest['has_hidden_labels']
    with open(manifest_path, 'w') as manifest_file:
        json.dump(manifest, manifest_file)
    assert read_bags(str(tmp_path)) == collection

def edit_manifest(directory: str, **changes):
    manifest_path = os.path.join(directory, MANIFEST_FILENAME)
    with open(manifest_path) as manifest_file:
        manifest = json.load(manifest_file)
    manifest.update(changes)
    with open(manifest_path, 'w') as manifest_file:
        json.dump(manifest, manifest_file)

def test_manifest_with_too_few_bag_files_is_rejected(tmp_path):
    write_bags(small_collection(), str(tmp_path))
    edit_manifest(str(tmp_path), bag_files = ['bag_001.csv', 'bag_002.csv'])
    with pytest.raises(MalformedManifestError):
        read_bags(str(tmp_path))

def test_unsorted_priors_on_disk_are_rejected(tmp_path):
    write_bags(small_collection(), str(tmp_path))
    edit_manifest(str(tmp_path), true_priors = [0.1, 0.5, 0.9])
    with pytest.raises(BagOrderingError):
        read_bags(str(tmp_path))

def test_missing_bag_file_is_rejected(tmp_path):
    write_bags(small_collection(), str(tmp_path))
    os.remove(tmp_path / 'bag_002.csv')
    with pytest.raises(MissingBagFileError):
        read_bags(str(tmp_path))
    with pytest.raises(MissingBagFileError):
        read_bags(str(tmp_path / 'nowhere'))

def test_dimension_mismatch_is_rejected(tmp_path):
    write_bags(small_collection(), str(tmp_path))
    edit_manifest(str(tmp_path), d = 3)
    with pytest.raises(DimensionMismatchError):
        read_bags(str(tmp_path))

def test_malformed_manifests_are_rejected(tmp_path):
    write_bags(small_collection(), str(tmp_path))
    edit_manifest(str(tmp_path), format_version = 2)
    with pytest.raises(MalformedManifestError):
        read_bags(str(tmp_path))

    write_bags(small_collection(), str(tmp_path))
    edit_manifest(str(tmp_path), has_hidden_labels = [True, True])
    with pytest.raises(MalformedManifestError):
        read_bags(str(tmp_path))

    (tmp_path / MANIFEST_FILENAME).write_text('{"m": 3,')
    with pytest.raises(MalformedManifestError):
        read_bags(str(tmp_path))

def test_labeled_csv_round_trip(tmp_path):
    features = np.random.default_rng(0).standard_normal((25, 3))
    labels = np.array([1, -1, 0, 1, -1] * 5)
    filepath = str(tmp_path / 'test.csv')
    write_labeled_csv(filepath, features, labels)
    read_features, read_labels = read_labeled_csv(filepath)
    assert np.array_equal(read_features, features)
    assert np.array_equal(read_labels, labels)
    assert (tmp_path / 'test.csv').read_text().splitlines()[2].endswith(',NA')
