"""Posterior and design-based summaries in the common reporting format.

Model-based area estimates are posterior medians with equal-tailed credible
intervals computed from the latent proportion draws; hyperparameters are
reported on their natural scales (sigmas exponentiated, phi back on [0,1]).
Direct estimates get delta-method confidence intervals built on the logit
scale and back-transformed, which keeps the bounds inside [0,1] without
truncation.  Both conventions involve choices the reporting format leaves
open (median vs mean point estimates, the interval construction for the
direct estimator); the JSON writer records them in a metadata block.

Quantiles use linear interpolation between order statistics (numpy's
default, type 7) so written outputs are stable across runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit
from scipy.stats import norm

from .errors import ValidationError
from .model import ModelConfig, PosteriorDensity
from .sampler import PosteriorSamples
from .survey import DirectEstimates

__all__ = [
    "AreaEstimates",
    "HyperSummary",
    "summarize_areas",
    "summarize_hypers",
    "hajek_intervals",
    "estimates_csv",
    "estimates_json",
]

HAJEK_LABEL = "Hajek"

# conventions left open by the reporting format; carried into JSON output
REPORTING_CHOICES = {
    "point_estimate": "posterior median (direct estimator: Hajek point)",
    "interval": "equal-tailed quantiles; direct estimator: logit-scale "
    "delta method, back-transformed",
    "quantile_rule": "linear interpolation between order statistics (type 7)",
}


@dataclass(frozen=True, eq=False)
class AreaEstimates:
    """Per-area point and interval estimates for one method.

    ``defined`` marks areas whose interval exists; for the direct estimator
    an exact 0 or 1 proportion (or a missing variance) leaves the interval
    undefined and the row flagged.  Bounds and points of defined rows live
    in [0,1] with lower <= point <= upper.
    """

    areas: tuple
    method: str
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    defined: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=np.float64))
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=np.float64))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=np.float64))
        n = len(self.areas)
        if self.defined is None:
            object.__setattr__(self, "defined", np.ones(n, dtype=bool))
        else:
            object.__setattr__(
                self, "defined", np.asarray(self.defined, dtype=bool)
            )
        for name in ("point", "lower", "upper", "defined"):
            if getattr(self, name).shape != (n,):
                raise ValidationError(
                    f"{name} must have one entry per area, got "
                    f"{getattr(self, name).shape} for {n} areas"
                )
        ok = self.defined
        bad = ok & ~(
            (self.lower >= 0.0)
            & (self.lower <= self.point)
            & (self.point <= self.upper)
            & (self.upper <= 1.0)
        )
        if bad.any():
            raise ValidationError(
                f"estimates violate 0 <= lower <= point <= upper <= 1 for "
                f"areas {[self.areas[i] for i in np.flatnonzero(bad)[:5]]}"
            )

    @property
    def n_areas(self) -> int:
        return len(self.areas)

    @property
    def interval_length(self) -> np.ndarray:
        return self.upper - self.lower


@dataclass(frozen=True, eq=False)
class HyperSummary:
    """Hyperparameter point and interval estimates on the reporting scale."""

    names: tuple
    method: str
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        for attr in ("point", "lower", "upper"):
            object.__setattr__(
                self, attr, np.asarray(getattr(self, attr), dtype=np.float64)
            )
            if getattr(self, attr).shape != (len(self.names),):
                raise ValidationError("hyperparameter summary blocks must align")
        if np.any(self.lower > self.point) or np.any(self.point > self.upper):
            raise ValidationError("hyperparameter interval must contain the point")

    def as_dict(self) -> dict:
        return {
            name: {
                "point": float(self.point[i]),
                "lower": float(self.lower[i]),
                "upper": float(self.upper[i]),
            }
            for i, name in enumerate(self.names)
        }


def _check_level(level: float) -> tuple[float, float]:
    if not (0.0 < level < 1.0):
        raise ValidationError(f"interval level must be in (0,1), got {level}")
    half = (1.0 - level) / 2.0
    return half, 1.0 - half


def summarize_areas(
    samples: PosteriorSamples,
    density: PosteriorDensity,
    level: float = 0.9,
) -> AreaEstimates:
    """Median and equal-tailed interval of each area proportion.

    Reconstructs p_a draws from the latent blocks of ``samples`` through the
    density's design matrix and area-effect decomposition, then summarizes
    columnwise.
    """
    lo_q, hi_q = _check_level(level)
    draws = density.latent_draws(samples.flat())
    if draws.shape[0] == 0:
        raise ValidationError("cannot summarize empty draws")
    qs = np.quantile(draws, [lo_q, 0.5, hi_q], axis=0)
    return AreaEstimates(
        areas=tuple(density.data.direct.areas),
        method=density.config.method_label,
        point=qs[1],
        lower=qs[0],
        upper=qs[2],
    )


_HYPER_SCALES = {
    "log_sigma_u": ("sigma_u", np.exp),
    "logit_phi": ("phi", expit),
    "log_sigma_tau": ("sigma_tau", np.exp),
}
_LATENT_PREFIXES = ("u_unstr[", "u_spat[", "z_v[")


def summarize_hypers(
    samples: PosteriorSamples,
    config: ModelConfig,
    level: float = 0.9,
) -> HyperSummary:
    """Hyperparameter summaries on the scale used for reporting.

    Regression and GVF coefficients stay as sampled; scale parameters are
    exponentiated and the spatial proportion is mapped back to [0,1].
    Transforming draws before taking quantiles keeps the intervals exactly
    coherent under these monotone maps.  Per-area latent blocks are skipped.
    """
    lo_q, hi_q = _check_level(level)
    flat = samples.flat()
    if flat.shape[0] == 0:
        raise ValidationError("cannot summarize empty draws")
    names = []
    cols = []
    for i, name in enumerate(samples.parameter_names):
        if name.startswith(_LATENT_PREFIXES):
            continue
        label, transform = _HYPER_SCALES.get(name, (name, None))
        col = flat[:, i]
        names.append(label)
        cols.append(transform(col) if transform is not None else col)
    block = np.column_stack(cols)
    qs = np.quantile(block, [lo_q, 0.5, hi_q], axis=0)
    return HyperSummary(
        names=tuple(names),
        method=config.method_label,
        point=qs[1],
        lower=qs[0],
        upper=qs[2],
    )


def hajek_intervals(direct: DirectEstimates, level: float = 0.9) -> AreaEstimates:
    """Design-based intervals for the direct estimates.

    Built as logit(p_hat) +/- z * sqrt(V_hat) / (p_hat (1 - p_hat)) and
    mapped back through the inverse logit.  A zero variance gives the
    degenerate interval (p_hat, p_hat).  Rows with p_hat exactly 0 or 1, a
    missing variance, or no sample at all have no interval and are flagged
    via ``defined``.
    """
    lo_q, hi_q = _check_level(level)
    z = norm.ppf(hi_q)
    p = np.asarray(direct.p_hat, dtype=np.float64)
    v = np.asarray(direct.v_hat, dtype=np.float64)
    sampled = np.asarray(direct.sampled, dtype=bool)

    # an exact 0 or 1 leaves the logit construction undefined even when
    # the variance estimate is 0, so that check comes first
    defined = (
        sampled
        & np.isfinite(p)
        & np.isfinite(v)
        & (v >= 0.0)
        & (p > 0.0)
        & (p < 1.0)
    )

    n = direct.n_areas
    lower = np.full(n, np.nan)
    upper = np.full(n, np.nan)
    point = np.where(sampled, p, np.nan)
    interior = defined & (v > 0.0)
    sd_logit = np.sqrt(v[interior]) / (p[interior] * (1.0 - p[interior]))
    center = logit(p[interior])
    lower[interior] = expit(center - z * sd_logit)
    upper[interior] = expit(center + z * sd_logit)
    degenerate = defined & (v == 0.0)
    lower[degenerate] = p[degenerate]
    upper[degenerate] = p[degenerate]
    return AreaEstimates(
        areas=tuple(direct.areas),
        method=HAJEK_LABEL,
        point=point,
        lower=lower,
        upper=upper,
        defined=defined,
    )


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        return "nan"
    return format(x, ".6g")


def estimates_csv(estimate_sets) -> str:
    """Long-format CSV over one or more methods, one row per area."""
    if isinstance(estimate_sets, AreaEstimates):
        estimate_sets = [estimate_sets]
    lines = ["area,method,point,lower,upper,interval_length"]
    for est in estimate_sets:
        length = est.interval_length
        for i, area in enumerate(est.areas):
            lines.append(
                f"{area},{est.method},{_fmt(est.point[i])},{_fmt(est.lower[i])},"
                f"{_fmt(est.upper[i])},{_fmt(length[i])}"
            )
    return "\n".join(lines) + "\n"


def _jnum(x: float):
    return float(x) if math.isfinite(x) else None


def estimates_json(estimate_sets) -> str:
    """Per-area JSON with one block per method plus reporting metadata.

    Undefined quantities come out as JSON null so the file stays strictly
    parseable.
    """
    if isinstance(estimate_sets, AreaEstimates):
        estimate_sets = [estimate_sets]
    areas: dict = {}
    for est in estimate_sets:
        length = est.interval_length
        for i, area in enumerate(est.areas):
            block = areas.setdefault(str(area), {})
            block[est.method] = {
                "point": _jnum(est.point[i]),
                "lower": _jnum(est.lower[i]),
                "upper": _jnum(est.upper[i]),
                "interval_length": _jnum(length[i]),
                "defined": bool(est.defined[i]),
            }
    return json.dumps(
        {"metadata": dict(REPORTING_CHOICES), "areas": areas},
        indent=2,
        sort_keys=True,
    )
