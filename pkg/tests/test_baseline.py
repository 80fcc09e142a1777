import numpy as np
import pytest

from UmAuc.Bags.Bag import Bag, BagCollection
from UmAuc.Baseline import PairBudgetExceededError, PairwiseConfig, pairwise_score_gradients, train_pairwise
from UmAuc.Exceptions import InvalidParameterError
from UmAuc.Metrics.Risk import SQUARE, empirical_um_risk
from UmAuc.MinMax import batch_exact_state, h_value_gradients
from UmAuc.Reduction import build_plan, surrogate_signs
from UmAuc.Scorers.LinearScorer import LinearScorer

def random_collection(sizes, dimension: int = 3, seed: int = 0) -> BagCollection:
    rng = np.random.default_rng(seed)
    bags = [Bag(bag_id, rng.normal(1.0 - bag_id * 0.5, 1.0, size = (size, dimension))) for bag_id, size in enumerate(sizes, start = 1)]
    return BagCollection(bags)

def bag_scores_of(model, collection: BagCollection):
    return [model.forward(bag.features)[:, 0] for bag in collection]

def test_two_singletons_converge_to_the_unit_gap():
    # One instance at +1 and one at -1: the risk (1 - 2w)^2 vanishes at w = 1/2.
    collection = BagCollection([Bag(1, [[1.0]]), Bag(2, [[-1.0]])])
    model = LinearScorer(1, 1)
    model, trace = train_pairwise(collection, model, PairwiseConfig(epochs = 200))
    assert abs(model.parameters['weight'][0, 0] - 0.5) <= 1e-6
    # A shared offset never changes the risk.
    assert model.parameters['bias'][0] == 0.0
    assert trace.risks[0] == 1.0
    assert trace.risks[-1] < 1e-10

def test_zero_epochs_leave_the_model_unchanged():
    collection = random_collection([5, 6])
    model = LinearScorer(3, 1, seed = 0)
    initial = model.snapshot()
    _, trace = train_pairwise(collection, model, PairwiseConfig(epochs = 0))
    assert trace.risks == []
    for name, parameter in model.parameters.items():
        assert np.array_equal(parameter, initial.parameters[name])

def test_pair_budget():
    collection = random_collection([10, 10])
    with pytest.raises(PairBudgetExceededError):
        train_pairwise(collection, LinearScorer(3, 1), PairwiseConfig(pair_cap = 50))
    # 100 pairs fit exactly.
    train_pairwise(collection, LinearScorer(3, 1), PairwiseConfig(epochs = 1, pair_cap = 100))

def test_trace_records_the_weighted_risk():
    collection = random_collection([4, 7, 5])
    model = LinearScorer(3, 1, seed = 1)
    initial = model.snapshot()
    weights = build_plan(collection.sizes).pair_weights
    _, trace = train_pairwise(collection, model, PairwiseConfig(epochs = 30))
    assert trace.risks[0] == pytest.approx(empirical_um_risk(bag_scores_of(initial, collection), weights, SQUARE), rel = 1e-12)
    assert trace.risks[-1] < trace.risks[0]

def test_explicit_weights():
    collection = random_collection([4, 7, 5])
    weights = ((0.0, 1.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    model = LinearScorer(3, 1, seed = 2)
    initial = model.snapshot()
    _, trace = train_pairwise(collection, model, PairwiseConfig(weights = weights, epochs = 1))
    assert trace.risks[0] == pytest.approx(empirical_um_risk(bag_scores_of(initial, collection), np.array(weights), SQUARE), rel = 1e-12)
    with pytest.raises(InvalidParameterError):
        train_pairwise(random_collection([4, 7]), LinearScorer(3, 1), PairwiseConfig(weights = weights))
    with pytest.raises(InvalidParameterError):
        PairwiseConfig(weights = ((0.0, -1.0), (0.0, 0.0)))

def test_score_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    bag_scores = [rng.standard_normal(size) for size in (3, 4, 2)]
    weights = build_plan([3, 4, 2]).pair_weights
    gradients = pairwise_score_gradients(bag_scores, weights)
    step = 1e-6
    for bag_index, scores in enumerate(bag_scores):
        for index in range(len(scores)):
            original = scores[index]
            scores[index] = original + step
            upper = empirical_um_risk(bag_scores, weights, SQUARE)
            scores[index] = original - step
            lower = empirical_um_risk(bag_scores, weights, SQUARE)
            scores[index] = original
            assert gradients[bag_index][index] == pytest.approx((upper - lower) / (2 * step), rel = 1e-6, abs = 1e-9)

def test_two_bag_gradients_agree_with_the_min_max_objective():
    # With two bags, the pairwise risk gradient is the pooled min-max gradient
    # at the exact auxiliary variables, scaled by 1 / (p (1 - p)).
    rng = np.random.default_rng(4)
    for sizes in ([7, 5], [20, 3], [1, 9]):
        bag_ids = np.repeat([1, 2], sizes)
        scores = rng.standard_normal(len(bag_ids))
        signs = surrogate_signs(bag_ids, 2)
        p = build_plan(sizes).mixing_fractions
        state = batch_exact_state(scores[:, None], signs, constrained = False)
        min_max_gradients = h_value_gradients(scores[:, None], signs, p, state.a, state.b, state.alpha).score[:, 0]
        scaled = min_max_gradients / (len(scores) * p[0] * (1 - p[0]))

        bag_scores = [scores[bag_ids == 1], scores[bag_ids == 2]]
        pairwise = np.concatenate(pairwise_score_gradients(bag_scores, build_plan(sizes).pair_weights))
        assert np.allclose(pairwise, scaled, rtol = 0.0, atol = 1e-8)

def test_sampled_pairs_reduce_the_risk():
    collection = random_collection([30, 30, 30], seed = 5)
    config = PairwiseConfig(epochs = 20, lr = 0.01, full_batch = False, batch_pairs = 256, seed = 1)
    _, trace = train_pairwise(collection, LinearScorer(3, 1, seed = 0), config)
    assert len(trace.risks) == 20
    assert trace.risks[-1] < trace.risks[0]

def test_only_single_head_models_are_trained():
    with pytest.raises(InvalidParameterError):
        train_pairwise(random_collection([3, 3, 3]), LinearScorer(3, 2), PairwiseConfig())

def test_config_from_a_dict():
    config = PairwiseConfig.from_dict({'epochs': 3, 'weights': [[0.0, 1.0], [0.0, 0.0]]})
    assert config.epochs == 3
    assert config.weights == ((0.0, 1.0), (0.0, 0.0))
    assert PairwiseConfig.from_dict(config.to_dict()) == config
    with pytest.raises(InvalidParameterError):
        PairwiseConfig.from_dict({'epoch': 3})
