import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bdrbm.quantum import LocalBasis, MeasurementRecord
from bdrbm.rbm import (CapabilityError, RbmParams, RbmTrainConfig, _cd1_from_uniforms,
                       _cd_epoch, cd1_update, exact_distribution, flatten, gibbs_step,
                       kl_divergence, log_prob_unnormalized, n_params, sample_visible,
                       train_rbm, unflatten)


def random_params(nv, nh, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return RbmParams(scale * rng.normal(size=nv), scale * rng.normal(size=nh),
                     scale * rng.normal(size=(nv, nh)))


def joint_marginal(params):
    """p(v) by summing exp(-E(v, h)) over every (v, h) pair."""
    nv, nh = params.n_visible, params.n_hidden
    b, c, w = params.visible_bias, params.hidden_bias, params.weights
    weights = []
    for v in itertools.product([0, 1], repeat=nv):
        total = 0.0
        for h in itertools.product([0, 1], repeat=nh):
            energy = -(np.dot(b, v) + np.dot(c, h) + np.array(v) @ w @ np.array(h))
            total += math.exp(-energy)
        weights.append(total)
    weights = np.array(weights)
    return weights / weights.sum()


small_params = st.tuples(st.integers(1, 4), st.integers(1, 4), st.integers(0, 10 ** 6)).map(
    lambda t: random_params(t[0], t[1], t[2]))


# ---- parameter vectors -------------------------------------------------------

def test_flat_layout_six_by_six():
    p = RbmParams.zeros(6, 6)
    w = np.zeros((6, 6))
    w[0, 0] = 7.0
    lam = flatten(RbmParams(p.visible_bias, p.hidden_bias, w))
    assert lam.size == 48 == n_params(6, 6)
    assert lam[12] == 7.0


def test_zero_params_flatten_to_zero():
    np.testing.assert_array_equal(flatten(RbmParams.zeros(3, 2)), np.zeros(11))


@given(small_params)
def test_flatten_round_trip(p):
    q = unflatten(flatten(p), p.n_visible, p.n_hidden)
    for a, b in zip((p.visible_bias, p.hidden_bias, p.weights),
                    (q.visible_bias, q.hidden_bias, q.weights)):
        np.testing.assert_array_equal(a, b)


def test_unflatten_length_mismatch():
    with pytest.raises(ValueError):
        unflatten(np.zeros(10), 3, 2)


def test_params_must_be_finite():
    with pytest.raises(ValueError):
        RbmParams([np.inf], [0.0], [[0.0]])


# ---- probabilities ------------------------------------------------------------------

def test_zero_params_log_prob():
    p = RbmParams.zeros(4, 3)
    assert log_prob_unnormalized(p, [1, 0, 1, 1]) == pytest.approx(3 * math.log(2))


def test_visible_bias_is_log_odds():
    p = RbmParams([1.7, 0.0, 0.0], np.zeros(2), np.zeros((3, 2)))
    diff = log_prob_unnormalized(p, [1, 0, 1]) - log_prob_unnormalized(p, [0, 0, 1])
    assert diff == pytest.approx(1.7, abs=1e-14)


def test_log_prob_matches_hidden_enumeration():
    p = random_params(3, 2, 5)
    marg = joint_marginal(p)
    logs = np.array([log_prob_unnormalized(p, v) for v in itertools.product([0, 1], repeat=3)])
    np.testing.assert_allclose(np.exp(logs) / np.exp(logs).sum(), marg, atol=1e-12)


def test_uniform_for_zero_params():
    np.testing.assert_allclose(exact_distribution(RbmParams.zeros(2, 3)), [0.25] * 4, atol=1e-15)


def test_factorized_when_weights_vanish():
    b = np.array([0.3, -1.2, 2.0])
    p = exact_distribution(RbmParams(b, [0.5, -0.5], np.zeros((3, 2))))
    s = 1 / (1 + np.exp(-b))
    oracle = [np.prod([s[i] if v[i] else 1 - s[i] for i in range(3)])
              for v in itertools.product([0, 1], repeat=3)]
    np.testing.assert_allclose(p, oracle, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(small_params)
def test_exact_distribution_matches_joint_enumeration(p):
    q = exact_distribution(p)
    assert abs(q.sum() - 1) < 1e-12
    np.testing.assert_allclose(q, joint_marginal(p), atol=1e-12)


def test_enumeration_guard():
    with pytest.raises(CapabilityError):
        exact_distribution(RbmParams.zeros(17, 1))


# ---- Gibbs sampling ---------------------------------------------------------------

def test_saturated_visible_bias():
    p = RbmParams(np.full(4, 20.0), np.zeros(2), np.zeros((4, 2)))
    rng = np.random.default_rng(0)
    out = np.array([gibbs_step(p, np.zeros(4), rng) for _ in range(1000)])
    assert out.min() == 1.0


def test_gibbs_marginals_for_zero_params():
    p = RbmParams.zeros(3, 2)
    rng = np.random.default_rng(1)
    v = np.zeros(3)
    total = np.zeros(3)
    n = 100_000
    # run many chains in parallel; each row is one chain
    chains = np.zeros((100, 3))
    for _ in range(n // 100):
        chains = gibbs_step(p, chains, rng)
        total += chains.sum(0)
    sigma = math.sqrt(0.25 / n)
    assert np.all(np.abs(total / n - 0.5) < 5 * sigma)
    assert gibbs_step(p, v, np.random.default_rng(3)).shape == (3,)


def test_gibbs_step_seeded():
    p = random_params(4, 3, 2)
    a = gibbs_step(p, np.ones(4), np.random.default_rng(9))
    b = gibbs_step(p, np.ones(4), np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_sampler_total_variation(seed):
    p = random_params(3, 2, seed)
    samples = sample_visible(p, 100_000, burn_in=1000, rng_seed=seed, n_chains=1)
    idx = samples @ (2 ** np.arange(2, -1, -1))
    emp = np.bincount(idx.astype(int), minlength=8) / samples.shape[0]
    assert 0.5 * np.abs(emp - exact_distribution(p)).sum() < 0.02


def test_sampler_visits_all_outcomes():
    samples = sample_visible(RbmParams.zeros(2, 2), 10_000, burn_in=10, rng_seed=0)
    assert len({tuple(s) for s in samples}) == 4


def test_sampler_seeded_and_shaped():
    p = random_params(5, 3, 4)
    a = sample_visible(p, 37, burn_in=5, thin=2, rng_seed=8, n_chains=4)
    b = sample_visible(p, 37, burn_in=5, thin=2, rng_seed=8, n_chains=4)
    assert a.shape == (37, 5)
    np.testing.assert_array_equal(a, b)


# ---- CD-1 ------------------------------------------------------------------------

def hand_cd1(b, c, w, v, u, lr, l2):
    """One CD-1 step for n_v=2, n_h=1 written out scalar by scalar."""
    sig = lambda x: 1 / (1 + math.exp(-x))
    ph0 = sig(c + v[0] * w[0] + v[1] * w[1])
    h = 1.0 if u < ph0 else 0.0
    v1 = [sig(b[0] + w[0] * h), sig(b[1] + w[1] * h)]
    ph1 = sig(c + v1[0] * w[0] + v1[1] * w[1])
    new_w = [w[i] + lr * (v[i] * ph0 - v1[i] * ph1) - lr * l2 * w[i] for i in range(2)]
    new_b = [b[i] + lr * (v[i] - v1[i]) for i in range(2)]
    return new_b, c + lr * (ph0 - ph1), new_w


@pytest.mark.parametrize("seed", range(5))
def test_cd1_matches_hand_trace(seed):
    params = RbmParams([0.2, -0.4], [0.1], [[0.5], [-0.3]])
    config = RbmTrainConfig(learning_rate=0.7, l2_coeff=0.01)
    got = cd1_update(params, [[1.0, 0.0]], config, np.random.default_rng(seed))
    u = np.random.default_rng(seed).random((1, 1, 1))[0, 0, 0]
    b, c, w = hand_cd1([0.2, -0.4], 0.1, [0.5, -0.3], [1.0, 0.0], u, 0.7, 0.01)
    np.testing.assert_allclose(got.visible_bias, b, rtol=0, atol=1e-15)
    np.testing.assert_allclose(got.hidden_bias, [c], rtol=0, atol=1e-15)
    np.testing.assert_allclose(got.weights[:, 0], w, rtol=0, atol=1e-15)


def test_cd1_zero_learning_rate_is_identity():
    p = random_params(4, 3, 1)
    q = cd1_update(p, np.eye(4), RbmTrainConfig(learning_rate=0.0), np.random.default_rng(0))
    np.testing.assert_array_equal(flatten(p), flatten(q))


def test_l2_decay_with_silent_hidden_units():
    # hidden units pinned off: the data term on W vanishes and only decay remains
    rng = np.random.default_rng(0)
    p = RbmParams([0.1, 0.2], [-60.0], [[0.3], [0.4]])
    config = RbmTrainConfig(learning_rate=0.1, l2_coeff=0.5)
    norms = [np.linalg.norm(p.weights)]
    for _ in range(5):
        p = cd1_update(p, [[1.0, 1.0]], config, rng)
        norms.append(np.linalg.norm(p.weights))
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert norms[1] == pytest.approx(norms[0] * (1 - 0.1 * 0.5), rel=1e-12)


def test_cd1_rejects_empty_minibatch():
    with pytest.raises(ValueError):
        cd1_update(RbmParams.zeros(2, 1), np.zeros((0, 2)), RbmTrainConfig(), np.random.default_rng())


@pytest.mark.parametrize("cd_steps", [1, 3])
def test_compiled_epoch_matches_reference_steps(cd_steps):
    rng = np.random.default_rng(4)
    p = random_params(5, 3, 7, scale=0.5)
    config = RbmTrainConfig(learning_rate=0.3, l2_coeff=0.02, cd_steps=cd_steps)
    outcomes = (rng.random((9, 5)) < 0.5).astype(float)
    batch_idx = rng.integers(0, 9, size=(4, 6))
    uniforms = rng.random((4, cd_steps, 6, 3))
    b, c, w = (np.array(a) for a in (p.visible_bias, p.hidden_bias, p.weights))
    _cd_epoch(b, c, w, outcomes, batch_idx, uniforms, config.learning_rate, config.l2_coeff)
    ref = p
    for t in range(4):
        ref = _cd1_from_uniforms(ref, outcomes[batch_idx[t]], uniforms[t], config)
    np.testing.assert_allclose(b, ref.visible_bias, atol=1e-13)
    np.testing.assert_allclose(c, ref.hidden_bias, atol=1e-13)
    np.testing.assert_allclose(w, ref.weights, atol=1e-13)


# ---- training -----------------------------------------------------------------

def test_epochs_zero_returns_init():
    p = random_params(2, 2, 0)
    assert train_rbm(p, [[1, 1]], RbmTrainConfig(epochs=0)) is p


def test_learns_point_mass():
    data = np.ones((500, 2))
    p = train_rbm(RbmParams.random(2, 2, 0), data, RbmTrainConfig(learning_rate=0.5, epochs=50), 0)
    assert exact_distribution(p)[3] >= 0.9


def test_record_and_samples_agree_in_distribution():
    basis = LocalBasis.computational(2)
    rec = MeasurementRecord(basis, {"11": 300, "00": 100})
    p = train_rbm(RbmParams.random(2, 2, 0), rec, RbmTrainConfig(epochs=30), 1)
    q = exact_distribution(p)
    assert q[3] > q[0] > max(q[1], q[2])


def test_training_is_seeded():
    data = (np.random.default_rng(0).random((200, 3)) < 0.3).astype(float)
    a = train_rbm(RbmParams.random(3, 3, 0), data, RbmTrainConfig(), 5)
    b = train_rbm(RbmParams.random(3, 3, 0), data, RbmTrainConfig(), 5)
    np.testing.assert_array_equal(flatten(a), flatten(b))


def test_training_reduces_kl():
    drops = []
    for seed in range(10):
        target = exact_distribution(random_params(3, 2, 100 + seed, scale=1.5))
        rng = np.random.default_rng(seed)
        idx = rng.choice(8, size=2000, p=target)
        counts = {format(i, "03b"): int(c) for i, c in enumerate(np.bincount(idx, minlength=8))}
        rec = MeasurementRecord(LocalBasis.computational(3), counts)
        emp = rec.empirical()
        init = RbmParams.random(3, 3, seed)
        trained = train_rbm(init, rec, RbmTrainConfig(epochs=20), seed)
        drops.append(kl_divergence(emp, exact_distribution(init))
                     - kl_divergence(emp, exact_distribution(trained)))
    assert np.mean(drops) > 0
