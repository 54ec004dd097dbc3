"""scikit-learn style wrappers: ``fit`` learns the detector's rates, ``predict`` infers worlds."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import expected_theta, prior_beliefs
from .generative import NoiseModel, ScenePrior
from .geometry import CameraIntrinsics
from .inference import FilterConfig, reinfer, run_filter
from .lightweight import LwConfig, LwTheta, lw_reinfer, lw_run_filter
from .validation import check_lw_data, check_positive_int, check_scenes


class MetaCOG(BaseEstimator):
    """Full spatial model.

    ``fit(scenes)`` runs the learning filter over the scenes in order and
    stores the final rate estimate in ``theta_``; ``predict(scenes)`` infers
    each scene's world with the rates fixed at ``theta_``.
    """

    def __init__(
        self,
        n_categories=5,
        num_particles=100,
        sweeps=200,
        location_sigma=0.01,
        ray_sigma2=0.01,
        ess_threshold=0.5,
        p_add_tail="lower",
        count_p=0.9,
        sigma_xy=200.0,
        radius=200.0,
        image_size=(800, 800),
        vertical_fov=60.0,
        seed=0,
    ):
        self.n_categories = n_categories
        self.num_particles = num_particles
        self.sweeps = sweeps
        self.location_sigma = location_sigma
        self.ray_sigma2 = ray_sigma2
        self.ess_threshold = ess_threshold
        self.p_add_tail = p_add_tail
        self.count_p = count_p
        self.sigma_xy = sigma_xy
        self.radius = radius
        self.image_size = image_size
        self.vertical_fov = vertical_fov
        self.seed = seed

    def _parts(self):
        C = check_positive_int(self.n_categories, "n_categories")
        cfg = FilterConfig(
            num_particles=check_positive_int(self.num_particles, "num_particles"),
            sweeps=check_positive_int(self.sweeps, "sweeps", minimum=0),
            location_sigma=self.location_sigma,
            ray_sigma2=self.ray_sigma2,
            ess_threshold=self.ess_threshold,
            seed=self.seed,
            p_add_tail=self.p_add_tail,
            scene_prior=ScenePrior(n_categories=C, count_p=self.count_p),
        )
        intr = CameraIntrinsics(int(self.image_size[0]), int(self.image_size[1]), self.vertical_fov)
        return C, cfg, intr, NoiseModel(self.sigma_xy, self.radius)

    def fit(self, scenes, y=None):
        C, cfg, intr, noise = self._parts()
        scenes = check_scenes(scenes, C)
        if not scenes:
            raise ValueError("fit needs at least one scene")
        self.result_ = run_filter([s.without_truth() for s in scenes], cfg, intr, noise, n_categories=C)
        self.theta_ = self.result_.final_theta
        self.theta_trajectory_ = list(self.result_.theta_hats)
        return self

    def predict(self, scenes):
        check_is_fitted(self, "theta_")
        C, cfg, intr, noise = self._parts()
        scenes = check_scenes(scenes, C)
        return reinfer([s.without_truth() for s in scenes], self.theta_, cfg, intr, noise)


class LesionedMetaCOG(MetaCOG):
    """Same inference with the rates frozen at the prior mean (hallucination 1, detection 0.5)."""

    def fit(self, scenes=None, y=None):
        C, *_ = self._parts()
        self.theta_ = expected_theta(prior_beliefs(C))
        return self


class LightweightMetaCOG(BaseEstimator):
    """Spatial-free model over presence vectors.

    ``fit`` takes one detector's frame blocks (an ``LwDetectorData`` or a
    list of (n_frames, C) boolean arrays, one per world state).
    """

    def __init__(self, num_particles=100, sweeps=20, proposal_var=0.01, prior_a=2.0, prior_b=10.0,
                 world_proposal="prior", seed=0):
        self.num_particles = num_particles
        self.sweeps = sweeps
        self.proposal_var = proposal_var
        self.prior_a = prior_a
        self.prior_b = prior_b
        self.world_proposal = world_proposal
        self.seed = seed

    def _config(self):
        return LwConfig(
            num_particles=check_positive_int(self.num_particles, "num_particles"),
            sweeps=check_positive_int(self.sweeps, "sweeps", minimum=0),
            proposal_var=self.proposal_var,
            prior_a=self.prior_a,
            prior_b=self.prior_b,
            world_proposal=self.world_proposal,
            seed=self.seed,
        )

    def fit(self, data, y=None):
        cfg = self._config()
        data = check_lw_data(data)
        self.result_ = lw_run_filter(data, cfg, np.random.default_rng(self.seed))
        self.theta_ = self.result_.final_theta
        self.learning_worlds_ = list(self.result_.worlds)
        return self

    def predict(self, data):
        check_is_fitted(self, "theta_")
        cfg = self._config()
        return lw_reinfer(check_lw_data(data), self.theta_, cfg, np.random.default_rng(self.seed))


class LesionedLightweightMetaCOG(LightweightMetaCOG):
    def fit(self, data=None, y=None):
        cfg = self._config()
        n = check_lw_data(data).n_categories if data is not None else 5
        mean = cfg.prior_a / (cfg.prior_a + cfg.prior_b)
        self.theta_ = LwTheta(np.full(n, mean), np.full(n, mean))
        return self
