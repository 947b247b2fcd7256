import math

import numpy as np
import pytest

from kgunlearn.errors import NumericError
from kgunlearn.kg import Triple, TripleSet
from kgunlearn.losses import LossWeights, corrupt_batch, distill_loss, dpo_loss, \
    dpo_loss_value, hinge_loss, replay_loss, total_loss
from kgunlearn.model import EmbeddingModel
from kgunlearn.preference import HEAD_MASKED, TAIL_MASKED, PreferenceSample

from conftest import make_random_model, max_relative_error, numeric_gradient


def random_samples(n, n_entities, n_relations, seed):
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n):
        side = int(rng.integers(0, 2))
        kept, y_l = rng.choice(n_entities, size=2, replace=False)
        candidates = [e for e in range(n_entities) if e != y_l]
        y_w = int(rng.choice(candidates))
        samples.append(PreferenceSample(
            side=side, relation=int(rng.integers(0, n_relations)),
            kept=int(kept), dispreferred=int(y_l), preferred=y_w))
    return samples


def test_dpo_loss_at_reference_is_ln2():
    model = make_random_model(8, 2, 5, seed=0)
    samples = random_samples(6, 8, 2, seed=1)
    loss, _ = dpo_loss(model, model.copy(), samples, beta=1.0)
    assert abs(loss - math.log(2.0)) < 1e-12


def test_dpo_loss_beta_zero_is_ln2():
    model = make_random_model(8, 2, 5, seed=2)
    reference = make_random_model(8, 2, 5, seed=3)
    samples = random_samples(6, 8, 2, seed=4)
    loss, grads = dpo_loss(model, reference, samples, beta=0.0)
    assert abs(loss - math.log(2.0)) < 1e-12
    assert np.all(grads.entities == 0.0)


def test_dpo_loss_value_hand_example():
    loss = dpo_loss_value(0.8, 0.4, 0.2, 0.4, beta=1.0)
    assert abs(loss - 0.22314355131420976) < 1e-9
    assert abs(loss - (-math.log(0.8))) < 1e-12


def test_dpo_loss_value_rejects_out_of_range():
    with pytest.raises(NumericError):
        dpo_loss_value(1.0, 0.4, 0.2, 0.4, beta=1.0)


def test_dpo_gradient_matches_finite_differences():
    model = make_random_model(7, 3, 5, seed=5)
    reference = make_random_model(7, 3, 5, seed=6)
    samples = random_samples(5, 7, 3, seed=7)
    _, grads = dpo_loss(model, reference, samples, beta=1.3)
    num_ent, num_rel = numeric_gradient(
        lambda m: dpo_loss(m, reference, samples, beta=1.3)[0], model)
    assert max_relative_error(grads.entities, num_ent) < 1e-4
    assert max_relative_error(grads.relations, num_rel) < 1e-4


def test_dpo_gradient_leaves_reference_alone():
    model = make_random_model(7, 2, 4, seed=8)
    reference = make_random_model(7, 2, 4, seed=9)
    before = (reference.entities.tobytes(), reference.relations.tobytes())
    dpo_loss(model, reference, random_samples(4, 7, 2, seed=10), beta=1.0)
    assert (reference.entities.tobytes(), reference.relations.tobytes()) == before


def line_model():
    # entities on a 1-D line so hinge slacks are easy to stage exactly
    entities = np.array([[0.0], [0.0], [8.0], [3.0]])
    relations = np.array([[0.0]])
    return EmbeddingModel(entities, relations)


def test_hinge_boundary_contributes_zero():
    model = line_model()
    pos = np.array([[0, 0, 1]])  # distance 0
    neg = np.array([[0, 0, 2]])  # distance 8
    loss, grads = hinge_loss(model, pos, neg, margin=8.0)
    assert loss == 0.0
    assert np.all(grads.entities == 0.0)


def test_hinge_equal_distances_gives_margin():
    model = line_model()
    pos = np.array([[0, 0, 2]])
    neg = np.array([[1, 0, 2]])
    loss, _ = hinge_loss(model, pos, neg, margin=8.0)
    assert loss == 8.0


def test_hinge_matches_recomputation():
    model = make_random_model(10, 3, 6, seed=11)
    rng = np.random.default_rng(12)
    pos = np.stack([rng.integers(0, 10, 8), rng.integers(0, 3, 8),
                    rng.integers(0, 10, 8)], axis=1)
    neg = corrupt_batch(pos, 10, rng)
    loss, _ = hinge_loss(model, pos, neg, margin=2.0)
    expected = 0.0
    for (ph, pr, pt), (nh, nr, nt) in zip(pos, neg):
        dp = np.linalg.norm(model.entities[ph] + model.relations[pr] - model.entities[pt])
        dn = np.linalg.norm(model.entities[nh] + model.relations[nr] - model.entities[nt])
        expected += max(0.0, dp - dn + 2.0)
    assert abs(loss - expected / len(pos)) < 1e-12


def test_hinge_gradient_matches_finite_differences():
    model = make_random_model(8, 2, 5, seed=13)
    rng = np.random.default_rng(14)
    pos = np.stack([rng.integers(0, 8, 6), rng.integers(0, 2, 6),
                    rng.integers(0, 8, 6)], axis=1)
    neg = corrupt_batch(pos, 8, rng)
    _, grads = hinge_loss(model, pos, neg, margin=1.0)
    num_ent, num_rel = numeric_gradient(
        lambda m: hinge_loss(m, pos, neg, margin=1.0)[0], model)
    assert max_relative_error(grads.entities, num_ent) < 1e-4
    assert max_relative_error(grads.relations, num_rel) < 1e-4


def test_hinge_on_scores_gradient_matches_finite_differences():
    model = make_random_model(8, 2, 5, seed=15)
    rng = np.random.default_rng(16)
    pos = np.stack([rng.integers(0, 8, 6), rng.integers(0, 2, 6),
                    rng.integers(0, 8, 6)], axis=1)
    neg = corrupt_batch(pos, 8, rng)
    _, grads = hinge_loss(model, pos, neg, margin=0.1, on_scores=True)
    num_ent, num_rel = numeric_gradient(
        lambda m: hinge_loss(m, pos, neg, margin=0.1, on_scores=True)[0], model)
    assert max_relative_error(grads.entities, num_ent) < 1e-4
    assert max_relative_error(grads.relations, num_rel) < 1e-4


def test_replay_loss_empty_set():
    model = make_random_model(5, 1, 3, seed=17)
    loss, grads = replay_loss(model, TripleSet(), 8.0,
                              np.random.default_rng(0), n_entities=5)
    assert loss == 0.0
    assert np.all(grads.entities == 0.0)


def test_replay_loss_draws_one_negative_per_positive():
    model = make_random_model(6, 2, 4, seed=18)
    replay = TripleSet([Triple(0, 0, 1), Triple(2, 1, 3)])
    loss, _ = replay_loss(model, replay, 8.0, np.random.default_rng(3), n_entities=6)
    # recompute with the identical draw sequence
    negatives = corrupt_batch(replay.to_array(), 6, np.random.default_rng(3))
    expected, _ = hinge_loss(model, replay.to_array(), negatives, 8.0)
    assert loss == expected


def test_distill_zero_at_reference():
    model = make_random_model(6, 1, 4, seed=19)
    loss, grads = distill_loss(model, model.copy(), np.array([0, 2, 4]))
    assert loss == 0.0
    assert np.all(grads.entities == 0.0)


def test_distill_linear_branch():
    reference = make_random_model(4, 1, 3, seed=20)
    model = reference.copy()
    model.entities[1] += 2.0  # every dimension differs by 2
    loss, _ = distill_loss(model, reference, np.array([1]))
    assert abs(loss - 1.5) < 1e-12


def test_distill_quadratic_branch():
    reference = make_random_model(4, 1, 3, seed=21)
    model = reference.copy()
    model.entities[2] -= 0.5
    loss, _ = distill_loss(model, reference, np.array([2]))
    assert abs(loss - 0.125) < 1e-12


def test_distill_gradient_matches_finite_differences():
    reference = make_random_model(6, 1, 5, seed=22)
    model = reference.copy()
    model.entities += np.random.default_rng(23).normal(scale=0.8, size=model.entities.shape)
    ids = np.array([0, 1, 3, 5])
    _, grads = distill_loss(model, reference, ids)
    num_ent, num_rel = numeric_gradient(
        lambda m: distill_loss(m, reference, ids)[0], model)
    assert max_relative_error(grads.entities, num_ent) < 1e-4
    assert np.all(num_rel == 0.0)


def test_distill_empty_set():
    model = make_random_model(4, 1, 3, seed=24)
    loss, grads = distill_loss(model, model.copy(), np.array([], dtype=np.int64))
    assert loss == 0.0
    assert np.all(grads.entities == 0.0)


def test_total_loss_arithmetic():
    w = LossWeights()
    assert abs(total_loss(w, 0.7, 0.2, 0.1) - 1.0) < 1e-15
    assert total_loss(w, 0.7, 0.2, 0.1) == 0.7 + 0.2 + 0.1
    zero = LossWeights(dpo=0.0, replay=0.0, distill=0.0)
    assert total_loss(zero, 5.0, 5.0, 5.0) == 0.0
    double = LossWeights(dpo=2.0, replay=2.0, distill=2.0)
    assert total_loss(double, 0.7, 0.2, 0.1) == 2.0 * total_loss(w, 0.7, 0.2, 0.1)


def test_loss_weights_validation():
    with pytest.raises(ValueError):
        LossWeights(beta=-1.0)
    with pytest.raises(ValueError):
        LossWeights(replay_margin=0.0)
