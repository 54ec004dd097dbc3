import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from metacog.core import Theta, WorldState
from metacog.estimators import LesionedLightweightMetaCOG, LesionedMetaCOG, LightweightMetaCOG, MetaCOG
from metacog.lightweight import LwTheta, LwWorldState
from metacog.simulator import LwDatasetParams, item_rng, synthesize_3d_dataset, synthesize_lw_detector

TH = Theta([0.05, 0.1, 0.05, 0.1, 0.05], [0.7, 0.6, 0.75, 0.5, 0.65])


@pytest.fixture(scope="module")
def scenes():
    return synthesize_3d_dataset(3, TH, 1)


@pytest.fixture(scope="module")
def lw_data():
    return synthesize_lw_detector(item_rng(5, 0), LwDatasetParams(n_worlds=10))


def test_get_params_and_clone():
    est = MetaCOG(num_particles=7, sweeps=3, seed=11)
    p = est.get_params()
    assert p["num_particles"] == 7 and p["sweeps"] == 3 and p["seed"] == 11
    c = clone(est)
    assert c.get_params() == p and c is not est
    est.set_params(sweeps=5)
    assert est.sweeps == 5
    lw = LightweightMetaCOG(num_particles=9, world_proposal="enumerate")
    assert clone(lw).get_params() == lw.get_params()


def test_predict_before_fit(scenes, lw_data):
    with pytest.raises(NotFittedError):
        MetaCOG().predict(scenes)
    with pytest.raises(NotFittedError):
        LightweightMetaCOG().predict(lw_data)


def test_metacog_fit_predict(scenes):
    est = MetaCOG(num_particles=10, sweeps=5, seed=2).fit(scenes)
    assert isinstance(est.theta_, Theta)
    assert len(est.theta_trajectory_) == len(scenes)
    worlds = est.predict(scenes)
    assert len(worlds) == len(scenes)
    assert all(isinstance(w, WorldState) for w in worlds)
    again = MetaCOG(num_particles=10, sweeps=5, seed=2).fit(scenes)
    assert np.array_equal(again.theta_.hallucination, est.theta_.hallucination)
    assert np.array_equal(again.theta_.detection, est.theta_.detection)


def test_metacog_rejects_bad_input(scenes):
    with pytest.raises(ValueError):
        MetaCOG(n_categories=2).fit(scenes)
    with pytest.raises(ValueError):
        MetaCOG(num_particles=0).fit(scenes)
    with pytest.raises(ValueError):
        MetaCOG().fit([])
    with pytest.raises(TypeError):
        MetaCOG().fit([1, 2])


def test_lesioned_theta_is_prior_mean(scenes):
    est = LesionedMetaCOG(num_particles=5, sweeps=2).fit(scenes)
    assert np.allclose(est.theta_.hallucination, 1.0)
    assert np.allclose(est.theta_.detection, 0.5)
    assert len(est.predict(scenes[:1])) == 1


def test_lightweight_fit_predict(lw_data):
    est = LightweightMetaCOG(num_particles=20, sweeps=5, seed=1).fit(lw_data)
    assert isinstance(est.theta_, LwTheta)
    assert len(est.learning_worlds_) == len(lw_data.frames)
    worlds = est.predict(lw_data)
    assert len(worlds) == len(lw_data.frames)
    assert all(isinstance(w, LwWorldState) for w in worlds)


def test_lightweight_accepts_arrays():
    block = np.array([[1, 0, 0], [1, 0, 1]], dtype=bool)
    est = LightweightMetaCOG(num_particles=10, sweeps=2).fit([block, block])
    assert est.theta_.hallucination.shape == (3,)
    (w,) = est.predict(block)
    assert w.presence.shape == (3,)


def test_lesioned_lightweight_theta(lw_data):
    est = LesionedLightweightMetaCOG().fit(lw_data)
    assert np.allclose(est.theta_.hallucination, 1 / 6)
    assert np.allclose(est.theta_.miss, 1 / 6)
    assert len(est.predict(lw_data)) == len(lw_data.frames)
