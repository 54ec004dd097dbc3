import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from metacog.evaluation import detector_faultiness, lw_accuracy, theta_mse
from metacog.lightweight import (
    LwConfig,
    LwDetectorData,
    LwFrame,
    LwTheta,
    LwWorldState,
    all_worlds,
    lw_exact_posterior,
    lw_frame_log_likelihood,
    lw_reinfer,
    lw_run_filter,
    truncnorm_step,
    truncated_poisson_pmf,
    world_log_prior_table,
)
from metacog.simulator import LwDatasetParams, sample_lw_frames, synthesize_lw_detector


def test_type_validation():
    with pytest.raises(ValueError):
        LwTheta([0.2, 1.2], [0.1, 0.1])
    with pytest.raises(ValueError):
        LwTheta([0.2], [0.1, 0.1])
    with pytest.raises(ValueError):
        LwWorldState([0, 2, 1])
    with pytest.raises(ValueError):
        LwDetectorData((np.zeros((0, 3), bool),))
    with pytest.raises(ValueError):
        LwDetectorData((np.zeros((2, 3), bool), np.zeros((2, 4), bool)))


def test_perfect_detector_likelihood():
    w = LwWorldState([1, 0, 1, 1, 0])
    th = LwTheta(np.zeros(5), np.zeros(5))
    assert lw_frame_log_likelihood(LwFrame(w.presence), w, th) == 0.0
    assert lw_frame_log_likelihood(LwFrame([1, 1, 1, 1, 0]), w, th) == -math.inf


def test_single_miss_term():
    got = lw_frame_log_likelihood(LwFrame([0]), LwWorldState([1]), LwTheta([0.3], [0.25]))
    assert got == pytest.approx(math.log(0.25))


def test_likelihood_normalises_over_all_frames():
    rng = np.random.default_rng(0)
    frames = [LwFrame(f) for f in all_worlds(5)]
    worst = 0.0
    for _ in range(1000):
        th = LwTheta(rng.random(5), rng.random(5))
        w = LwWorldState(rng.random(5) < 0.5)
        total = math.fsum(math.exp(lw_frame_log_likelihood(f, w, th)) for f in frames)
        worst = max(worst, abs(total - 1.0))
    assert worst <= 1e-9


def test_all_worlds_order():
    w = all_worlds(3)
    assert w.shape == (8, 3)
    assert w[1].tolist() == [False, False, True] and w[-1].all()


def test_truncated_poisson():
    pmf = truncated_poisson_pmf(1.0, 1, 5)
    z = sum(math.exp(-1) / math.factorial(k) for k in range(1, 6))
    assert pmf[0] == 0.0
    assert pmf[1] == pytest.approx(math.exp(-1) / z, abs=1e-12)
    assert pmf.sum() == pytest.approx(1.0)


def test_world_prior_table_uniform_within_count():
    lp = world_log_prior_table(5, LwConfig())
    n = all_worlds(5).sum(1)
    assert lp[n == 0] == -math.inf
    assert np.exp(lp).sum() == pytest.approx(1.0)
    for k in range(1, 6):
        assert np.ptp(lp[n == k]) == pytest.approx(0.0, abs=1e-12)


def test_truncnorm_step_targets_stationary_beta():
    # MH with the truncated-normal kernel on a Beta(3, 7) target
    rng = np.random.default_rng(1)
    x = np.full(4000, 0.5)
    cur = stats.beta.logpdf(x, 3, 7)
    for _ in range(300):
        prop, log_q = truncnorm_step(x, 0.1, rng)
        new = stats.beta.logpdf(prop, 3, 7)
        acc = np.log(rng.random(x.size)) < new - cur + log_q
        x = np.where(acc, prop, x)
        cur = np.where(acc, new, cur)
    assert stats.kstest(x, stats.beta(3, 7).cdf).pvalue > 1e-3
    assert np.all((x > 0) & (x < 1))


def _noiseless():
    params = LwDatasetParams(n_worlds=20)
    rng = np.random.default_rng(2)
    return synthesize_lw_detector(rng, params, theta=LwTheta(np.zeros(5), np.zeros(5)))


def test_noiseless_detector_is_perfect():
    data = _noiseless()
    res = lw_run_filter(data, LwConfig(seed=3))
    assert all(w == t for w, t in zip(res.worlds, data.worlds))
    fixed = lw_reinfer(data, LwTheta(np.zeros(5), np.zeros(5)), LwConfig(seed=3))
    assert all(w == t for w, t in zip(fixed, data.worlds))


def test_noiseless_detector_is_perfect_with_enumeration():
    data = _noiseless()
    cfg = LwConfig(seed=3, world_proposal="enumerate")
    assert all(w == t for w, t in zip(lw_run_filter(data, cfg).worlds, data.worlds))
    fixed = lw_reinfer(data, LwTheta(np.zeros(5), np.zeros(5)), cfg)
    assert all(w == t for w, t in zip(fixed, data.worlds))


def test_prior_proposal_coverage_matches_analysis():
    # a prior-proposed world is found exactly when some particle draws it
    p = np.exp(world_log_prior_table(5, LwConfig()))
    expected = float(np.sum(p * (1 - (1 - p) ** 100)))
    hits = []
    for s in range(30):
        data = synthesize_lw_detector(np.random.default_rng([2, s]), LwDatasetParams(n_worlds=20),
                                      theta=LwTheta(np.zeros(5), np.zeros(5)))
        fixed = lw_reinfer(data, LwTheta(np.zeros(5), np.zeros(5)), LwConfig(seed=s))
        hits += [w == t for w, t in zip(fixed, data.worlds)]
    se = math.sqrt(expected * (1 - expected) / len(hits))
    assert abs(np.mean(hits) - expected) < 4 * se


def test_single_frame_perfect_rates():
    frame = np.array([[True, False, True, False, False]])
    out = lw_reinfer([frame], LwTheta(np.zeros(5), np.zeros(5)), LwConfig(seed=0))
    assert out[0].presence.tolist() == frame[0].tolist()


def _tv(a, b):
    return 0.5 * float(np.abs(np.asarray(a) - np.asarray(b)).sum())


def test_particle_marginals_match_enumeration_two_categories():
    rng = np.random.default_rng(4)
    cfg = LwConfig(num_particles=1000, seed=5, max_objects=2)
    for _ in range(3):
        theta = LwTheta(rng.beta(2, 10, 2), rng.beta(2, 10, 2))
        world = LwWorldState(rng.permutation([True, rng.random() < 0.5]))
        block = sample_lw_frames(world, theta, 10, rng)
        res = lw_run_filter([block], cfg)
        assert _tv(res.world_posteriors[-1], lw_exact_posterior([block], cfg)) <= 0.05


def test_particle_marginals_match_enumeration_three_categories_one_world():
    rng = np.random.default_rng(6)
    cfg = LwConfig(num_particles=1000, seed=7, max_objects=3)
    for _ in range(5):
        theta = LwTheta(rng.beta(2, 10, 3), rng.beta(2, 10, 3))
        world = LwWorldState(rng.random(3) < 0.5)
        block = sample_lw_frames(world, theta, 10, rng)
        res = lw_run_filter([block], cfg)
        assert _tv(res.world_posteriors[-1], lw_exact_posterior([block], cfg)) <= 0.05


def test_sampled_rate_weighting_is_consistent():
    # weighting by each particle's sampled rates targets the same posterior, with more variance
    rng = np.random.default_rng(11)
    theta = LwTheta(rng.beta(2, 10, 2), rng.beta(2, 10, 2))
    block = sample_lw_frames(LwWorldState(np.array([True, False])), theta, 10, rng)
    cfg = LwConfig(num_particles=20000, seed=1, max_objects=2, weighting="sample")
    assert _tv(lw_run_filter([block], cfg).world_posteriors[-1], lw_exact_posterior([block], cfg)) <= 0.02


def test_particle_marginals_match_enumeration_three_categories():
    rng = np.random.default_rng(6)
    cfg = LwConfig(num_particles=1000, seed=7, max_objects=3)
    params = LwDatasetParams(n_categories=3, n_worlds=3, min_frames=4, max_frames=6, max_objects=3)
    for k in range(3):
        data = synthesize_lw_detector(rng, params)
        exact = lw_exact_posterior(data.frames, cfg)
        res = lw_run_filter(data, cfg)
        assert _tv(res.world_posteriors[-1], exact) <= 0.05, k


def test_enumerate_mode_matches_enumeration():
    rng = np.random.default_rng(8)
    cfg = LwConfig(num_particles=1000, seed=9, max_objects=3, world_proposal="enumerate")
    params = LwDatasetParams(n_categories=3, n_worlds=3, min_frames=4, max_frames=6, max_objects=3)
    data = synthesize_lw_detector(rng, params)
    res = lw_run_filter(data, cfg)
    assert _tv(res.world_posteriors[-1], lw_exact_posterior(data.frames, cfg)) <= 0.05


def test_learning_beats_prior_mean():
    params = LwDatasetParams()
    prior_mean = LwTheta(np.full(5, 1 / 6), np.full(5, 1 / 6))
    better = 0
    for i in range(100):
        data = synthesize_lw_detector(np.random.default_rng([10, i]), params)
        res = lw_run_filter(data, LwConfig(seed=i))
        better += theta_mse(res.final_theta, data.theta) < theta_mse(prior_mean, data.theta)
        assert all(np.all((t.as_array() >= 0) & (t.as_array() <= 1)) for t in res.theta_hats)
    assert better >= 90


def _mean_accuracy(inferred, truth):
    return float(np.mean([lw_accuracy(a, b) for a, b in zip(inferred, truth)]))


def test_true_rates_beat_lesioned_on_faulty_detectors():
    params = LwDatasetParams()
    lesioned = LwTheta(np.full(5, 1 / 6), np.full(5, 1 / 6))
    good, bad = [], []
    i = 0
    while len(good) < 200:
        data = synthesize_lw_detector(np.random.default_rng([11, i]), params)
        i += 1
        if detector_faultiness(data.frames, data.worlds) <= 0.2:
            continue
        good.append(_mean_accuracy(lw_reinfer(data, data.theta, LwConfig(seed=i)), data.worlds))
        bad.append(_mean_accuracy(lw_reinfer(data, lesioned, LwConfig(seed=i)), data.worlds))
    assert np.mean(good) >= np.mean(bad)


def test_hallucination_belief_hurts():
    params = LwDatasetParams(max_objects=2)
    rng = np.random.default_rng(12)
    theta = LwTheta(np.full(5, 0.05), np.full(5, 0.1))
    data = synthesize_lw_detector(rng, params, theta=theta)
    paranoid = LwTheta(np.full(5, 1.0), np.full(5, 0.1))
    acc_true = _mean_accuracy(lw_reinfer(data, theta, LwConfig(seed=0)), data.worlds)
    acc_paranoid = _mean_accuracy(lw_reinfer(data, paranoid, LwConfig(seed=0)), data.worlds)
    assert acc_paranoid < acc_true


def test_zero_sweeps_keeps_prior_draws():
    # the identity kernel: without rejuvenation no rate ever moves
    rng = np.random.default_rng(13)
    data = synthesize_lw_detector(rng, LwDatasetParams(n_worlds=5))
    res = lw_run_filter(data, LwConfig(sweeps=0, num_particles=1, seed=1))
    first = res.theta_hats[0].as_array()
    assert all(np.array_equal(t.as_array(), first) for t in res.theta_hats)


def test_run_filter_rejects_empty_block():
    with pytest.raises(ValueError):
        lw_run_filter([np.zeros((0, 5), bool)])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4))
def test_filter_is_deterministic(seed, n_worlds):
    data = synthesize_lw_detector(np.random.default_rng(seed), LwDatasetParams(n_worlds=n_worlds))
    a = lw_run_filter(data, LwConfig(num_particles=20, sweeps=3, seed=seed))
    b = lw_run_filter(data, LwConfig(num_particles=20, sweeps=3, seed=seed))
    assert a.worlds == b.worlds
    assert all(x == y for x, y in zip(a.theta_hats, b.theta_hats))



def test_marginal_weight_matches_quadrature():
    from scipy import integrate

    from metacog.lightweight import _world_logmarg

    # past outcomes per category: absent&detected, absent&not, present&not, present&detected
    counts = np.array([[2.0, 7.0, 1.0, 9.0]]).T[None]  # (1, 4, 1)
    d, F, a, b = np.array([3.0]), 8, 2.0, 10.0
    # absent: 3 hallucinations in 8 frames; present: 5 misses and 3 hits
    for present, (n1, n0), (k1, k0) in ((False, (2, 7), (3, 5)), (True, (1, 9), (5, 3))):
        dens = stats.beta(a + n1, b + n0).pdf
        val, _ = integrate.quad(lambda x: x**k1 * (1 - x) ** k0 * dens(x), 0, 1)
        got = _world_logmarg(counts, np.array([[present]]), d, F, a, b)
        assert got[0] == pytest.approx(math.log(val), abs=1e-9)
