"""Estimator-style front end: fit/predict objects over the core machinery.

Thin wrappers that bundle configuration, fitting, and summarization behind
the familiar constructor-parameters / ``fit`` / fitted-attributes pattern.
They add no statistical behavior of their own; everything delegates to the
survey, model, sampler, and summary modules, whose functions remain the
primary interface for scripted use.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import ValidationError
from .graph import ScaledIcarPrecision
from .model import ModelConfig, ModelData, PosteriorDensity
from .sampler import SamplerConfig, run_chains
from .summary import hajek_intervals, summarize_areas, summarize_hypers
from .survey import DirectEstimates, SurveyDataset, direct_estimates

__all__ = ["HajekDirect", "SmoothedAreaModel"]


def _require_fitted(estimator, attr: str):
    if not hasattr(estimator, attr):
        raise NotFittedError(
            f"{type(estimator).__name__} must be fitted before this call"
        )


class HajekDirect(BaseEstimator):
    """Design-based direct estimation of area proportions.

    Parameters
    ----------
    level : float, default 0.9
        Confidence level of the reported intervals.

    Attributes (after ``fit``)
    --------------------------
    direct_ : DirectEstimates
        Point estimates, variances, and design metadata per area.
    estimates_ : AreaEstimates
        Points with delta-method intervals on the proportion scale.
    """

    def __init__(self, level: float = 0.9):
        self.level = level

    def fit(self, dataset: SurveyDataset, y=None):
        self.direct_ = direct_estimates(dataset)
        self.estimates_ = hajek_intervals(self.direct_, level=self.level)
        return self

    def predict(self, dataset=None) -> np.ndarray:
        """Fitted per-area proportions (NaN where no sample exists)."""
        _require_fitted(self, "estimates_")
        return self.estimates_.point.copy()


class SmoothedAreaModel(BaseEstimator):
    """Bayesian area-level smoothing of direct estimates.

    Fits one of the four model variants by MCMC and exposes the draws plus
    reporting-ready summaries.  ``spatial`` switches the area effect from
    iid to BYM2 (requires ``q_star`` at fit time); ``smooth_variance``
    switches from fixed observed variances to joint variance smoothing.

    Attributes (after ``fit``)
    --------------------------
    density_ : PosteriorDensity
    samples_ : PosteriorSamples
    estimates_ : AreaEstimates
    hypers_ : HyperSummary
    diagnostics_ : dict
    """

    def __init__(
        self,
        *,
        spatial: bool = False,
        smooth_variance: bool = False,
        level: float = 0.9,
        n_chains: int = 4,
        n_warmup: int = 1000,
        n_samples: int = 1000,
        seed: int = 0,
        target_accept: float = 0.8,
        max_tree_depth: int = 10,
        workers: int = 1,
        model_options: dict | None = None,
    ):
        self.spatial = spatial
        self.smooth_variance = smooth_variance
        self.level = level
        self.n_chains = n_chains
        self.n_warmup = n_warmup
        self.n_samples = n_samples
        self.seed = seed
        self.target_accept = target_accept
        self.max_tree_depth = max_tree_depth
        self.workers = workers
        self.model_options = model_options

    def fit(
        self,
        direct: DirectEstimates,
        design_matrix: np.ndarray | None = None,
        q_star: ScaledIcarPrecision | None = None,
    ):
        if not isinstance(direct, DirectEstimates):
            raise ValidationError(
                "fit expects DirectEstimates (run direct_estimates first)"
            )
        if design_matrix is None:
            design_matrix = np.ones((direct.n_areas, 1))
        config = ModelConfig(
            design_matrix=np.asarray(design_matrix, dtype=np.float64),
            spatial=self.spatial,
            smooth_variance=self.smooth_variance,
            interval_level=self.level,
            **(self.model_options or {}),
        )
        self.density_ = PosteriorDensity(
            config, ModelData(direct=direct, q_star=q_star)
        )
        sampler_config = SamplerConfig(
            n_chains=self.n_chains,
            n_warmup=self.n_warmup,
            n_samples=self.n_samples,
            seed=self.seed,
            target_accept=self.target_accept,
            max_tree_depth=self.max_tree_depth,
        )
        self.samples_ = run_chains(
            self.density_.value_and_grad,
            self.density_.dim,
            sampler_config,
            parameter_names=self.density_.parameter_names,
            workers=self.workers,
        )
        self.estimates_ = summarize_areas(self.samples_, self.density_, self.level)
        self.hypers_ = summarize_hypers(self.samples_, config, self.level)
        self.diagnostics_ = self.samples_.diagnostics_summary()
        return self

    def predict(self, direct=None) -> np.ndarray:
        """Posterior median proportion per area."""
        _require_fitted(self, "estimates_")
        return self.estimates_.point.copy()
