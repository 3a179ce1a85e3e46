"""Area-level models for proportions: unmatched sampling/linking pairs.

The sampling model is Gaussian on the natural scale,
``p_hat_a ~ N(p_a, V_a)``, paired with a logit-Gaussian linking model
``logit(p_a) = x_a' beta + u_a``.  The area effect ``u_a`` is either iid
or a BYM2 field ``sigma_u * (sqrt(1-phi) u1 + sqrt(phi) u2*)`` with
``u2*`` a sum-to-zero scaled ICAR field.  The joint-smoothing (JS)
variant additionally models the sampling variances: the observed
``v_hat_a`` enters through ``d_a v_hat_a / V_a ~ chi2(d_a)`` and the
latent ``log V_a`` follows a log-normal GVF linking model
``log V_a ~ N(gamma0 + gamma1 log(p_a(1-p_a)) + gamma2 log(n_a), sigma_tau^2)``.
The mean-smoothing (MS) variant fixes ``V_a = v_hat_a``.

Everything is parameterized on an unconstrained scale (log sigmas, logit
phi) with Jacobian corrections, and the log posterior plus its analytic
gradient are evaluated in one compiled kernel.  The latent log variances
are sampled non-centered, as standardized deviations
``z_a = (log V_a - f_a) / sigma_tau`` from the GVF mean ``f_a``, which
removes the funnel between ``sigma_tau`` and the per-area coordinates.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import expit

from .errors import ValidationError
from .graph import ScaledIcarPrecision, sample_icar
from .survey import DirectEstimates

__all__ = [
    "ModelConfig",
    "ModelData",
    "ParameterState",
    "PosteriorDensity",
    "latent_proportions",
    "gvf_mean",
    "log_posterior",
    "grad_log_posterior",
    "constrain_spatial",
    "chi2_variance_logpdf",
    "pc_rate",
    "simulate_from_prior",
    "model_config_from_dict",
]

LOG_2PI = math.log(2.0 * math.pi)

# N(0, 1000) regression-coefficient prior, variance convention.
DEFAULT_BETA_PRIOR_SD = math.sqrt(1000.0)


def pc_rate(threshold: float, tail_prob: float) -> float:
    """Rate of the exponential PC prior with P(sigma > threshold) = tail_prob."""
    if not (threshold > 0 and 0 < tail_prob < 1):
        raise ValidationError(
            f"PC prior needs threshold > 0 and tail prob in (0,1), "
            f"got ({threshold}, {tail_prob})"
        )
    return -math.log(tail_prob) / threshold


@dataclass(eq=False)
class ModelConfig:
    """Model-variant switches, covariates, and prior settings.

    ``design_matrix`` is A x (p+1) with a leading column of ones.
    ``gvf_extra_covariates`` optionally extends the GVF with area-level
    columns; their coefficients get N(0,1) priors by default (the base
    three keep the documented means/sds).
    """

    design_matrix: np.ndarray
    spatial: bool = True
    smooth_variance: bool = True
    gvf_extra_covariates: np.ndarray | None = None
    pc_prior_u: tuple[float, float] = (1.0, 0.01)
    pc_prior_tau: tuple[float, float] = (1.0, 0.01)
    beta_prior_sd: float = DEFAULT_BETA_PRIOR_SD
    gamma_prior_means: tuple[float, ...] = (0.0, 1.0, -1.0)
    gamma_prior_sds: tuple[float, ...] = (1.0, 0.5, 0.5)
    phi_prior: tuple[float, float] = (0.5, 0.5)
    interval_level: float = 0.90

    def __post_init__(self):
        x = np.asarray(self.design_matrix, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValidationError(
                f"design_matrix must be 2-d (areas x covariates), got shape {x.shape}"
            )
        if not np.all(np.isfinite(x)):
            raise ValidationError("design_matrix has non-finite entries")
        if not np.allclose(x[:, 0], 1.0):
            raise ValidationError("design_matrix must have a leading column of ones")
        if np.linalg.matrix_rank(x) < x.shape[1]:
            raise ValidationError("design_matrix is rank deficient")
        self.design_matrix = np.ascontiguousarray(x)
        if self.gvf_extra_covariates is not None:
            z = np.asarray(self.gvf_extra_covariates, dtype=np.float64)
            if z.ndim != 2 or z.shape[0] != x.shape[0]:
                raise ValidationError(
                    "gvf_extra_covariates must be 2-d with one row per area"
                )
            if not np.all(np.isfinite(z)):
                raise ValidationError("gvf_extra_covariates has non-finite entries")
            self.gvf_extra_covariates = np.ascontiguousarray(z)
            warnings.warn(
                "GVF extra covariates have no documented prior; using N(0,1)",
                stacklevel=2,
            )
        for name in ("pc_prior_u", "pc_prior_tau"):
            u, alpha = getattr(self, name)
            pc_rate(u, alpha)
        if not self.beta_prior_sd > 0:
            raise ValidationError("beta_prior_sd must be positive")
        if len(self.gamma_prior_means) != 3 or len(self.gamma_prior_sds) != 3:
            raise ValidationError("gamma priors must give 3 base means and sds")
        if any(s <= 0 for s in self.gamma_prior_sds):
            raise ValidationError("gamma prior sds must be positive")
        if any(v <= 0 for v in self.phi_prior):
            raise ValidationError("phi_prior Beta parameters must be positive")
        if not 0 < self.interval_level < 1:
            raise ValidationError("interval_level must be in (0,1)")

    @property
    def n_areas(self) -> int:
        return self.design_matrix.shape[0]

    @property
    def n_coef(self) -> int:
        return self.design_matrix.shape[1]

    @property
    def n_gvf_extra(self) -> int:
        z = self.gvf_extra_covariates
        return 0 if z is None else z.shape[1]

    @property
    def n_gamma(self) -> int:
        return 3 + self.n_gvf_extra

    @property
    def method_label(self) -> str:
        base = "Unmatched JS" if self.smooth_variance else "Unmatched MS"
        return f"Spatial {base}" if self.spatial else base


_ALLOWED_CONFIG_KEYS = {
    "spatial",
    "smooth_variance",
    "pc_prior_u",
    "pc_prior_tau",
    "beta_prior_sd",
    "gamma_prior_means",
    "gamma_prior_sds",
    "phi_prior",
    "interval_level",
    "covariates",
    "gvf_extra",
}


def model_config_from_dict(
    obj: dict, design_matrix, gvf_extra=None
) -> ModelConfig:
    """Build a ModelConfig from a parsed JSON mapping, with precise errors.

    ``covariates``/``gvf_extra`` keys are column bindings resolved by the
    caller (the CLI); the matrices themselves are passed in.
    """
    if not isinstance(obj, dict):
        raise ValidationError(f"model config must be a JSON object, got {type(obj).__name__}")
    unknown = set(obj) - _ALLOWED_CONFIG_KEYS
    if unknown:
        raise ValidationError(
            f"unknown model config key(s): {sorted(unknown)}; "
            f"allowed: {sorted(_ALLOWED_CONFIG_KEYS)}"
        )
    kwargs = {}
    for key in ("spatial", "smooth_variance"):
        if key in obj:
            if not isinstance(obj[key], bool):
                raise ValidationError(f"model config {key!r} must be true or false")
            kwargs[key] = obj[key]
    for key in ("pc_prior_u", "pc_prior_tau", "phi_prior"):
        if key in obj:
            val = obj[key]
            if not (isinstance(val, (list, tuple)) and len(val) == 2):
                raise ValidationError(f"model config {key!r} must be a pair of numbers")
            kwargs[key] = (float(val[0]), float(val[1]))
    for key in ("gamma_prior_means", "gamma_prior_sds"):
        if key in obj:
            val = obj[key]
            if not (isinstance(val, (list, tuple)) and len(val) == 3):
                raise ValidationError(f"model config {key!r} must list 3 numbers")
            kwargs[key] = tuple(float(v) for v in val)
    for key in ("beta_prior_sd", "interval_level"):
        if key in obj:
            try:
                kwargs[key] = float(obj[key])
            except (TypeError, ValueError):
                raise ValidationError(f"model config {key!r} must be a number") from None
    return ModelConfig(
        design_matrix=design_matrix, gvf_extra_covariates=gvf_extra, **kwargs
    )


@dataclass(eq=False)
class ModelData:
    """Likelihood inputs: direct estimates plus the scaled spatial precision."""

    direct: DirectEstimates
    q_star: ScaledIcarPrecision | None = None


@dataclass(eq=False)
class ParameterState:
    """Full latent + hyperparameter vector, unconstrained scale.

    ``u_spat`` (present only for spatial variants) is centered to sum to
    zero at construction.  ``log_v`` covers only the areas included in the
    variance likelihood, in canonical area order, on the natural log-variance
    scale; the packed sampling vector stores these coordinates standardized
    around the variance linking mean (``pack``/``unpack`` convert).
    """

    beta: np.ndarray
    u_unstr: np.ndarray
    log_sigma_u: float
    u_spat: np.ndarray | None = None
    logit_phi: float | None = None
    log_v: np.ndarray | None = None
    gamma: np.ndarray | None = None
    log_sigma_tau: float | None = None

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=np.float64)
        self.u_unstr = np.asarray(self.u_unstr, dtype=np.float64)
        pieces = [self.beta, self.u_unstr, np.array([self.log_sigma_u])]
        if self.u_spat is not None:
            self.u_spat = constrain_spatial(np.asarray(self.u_spat, dtype=np.float64))
            pieces.append(self.u_spat)
        for scalar in (self.logit_phi, self.log_sigma_tau):
            if scalar is not None:
                pieces.append(np.array([scalar], dtype=np.float64))
        for arr_name in ("log_v", "gamma"):
            arr = getattr(self, arr_name)
            if arr is not None:
                setattr(self, arr_name, np.asarray(arr, dtype=np.float64))
                pieces.append(getattr(self, arr_name))
        if not all(np.all(np.isfinite(p)) for p in pieces):
            raise ValidationError("parameter state has non-finite entries")


def constrain_spatial(u_raw: np.ndarray) -> np.ndarray:
    """Project onto the sum-to-zero subspace by subtracting the mean."""
    u_raw = np.asarray(u_raw, dtype=np.float64)
    return u_raw - u_raw.mean()


def chi2_variance_logpdf(v_hat, v, dof):
    """Log density of the observed variance: d * v_hat / V ~ chi2(d), in v_hat.

    Includes the change-of-variable Jacobian d/V, so the result integrates
    to one over v_hat > 0.  This is the exact term the fitting kernel uses.
    """
    v_hat = np.asarray(v_hat, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    d = np.asarray(dof, dtype=np.float64)
    if np.any(v_hat <= 0) or np.any(v <= 0) or np.any(d < 1):
        raise ValidationError("chi2_variance_logpdf needs v_hat > 0, v > 0, dof >= 1")
    lgam = np.vectorize(math.lgamma)(d / 2.0)
    out = (
        np.log(d)
        + (d / 2.0 - 1.0) * (np.log(d) + np.log(v_hat))
        - (d / 2.0) * math.log(2.0)
        - lgam
        - (d / 2.0) * np.log(v)
        - d * v_hat / (2.0 * v)
    )
    return float(out) if out.ndim == 0 else out


def gvf_mean(p, n, gamma, z=None):
    """GVF linking-model mean for log V: f = g0 + g1*log(p(1-p)) + g2*log(n) [+ z.g_extra].

    With gamma = (0, 1, -1) this is the log of the binomial variance
    p(1-p)/n.  Domain error on p outside the open interval (0,1); values
    are never clamped here.
    """
    p = np.asarray(p, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise ValidationError("gvf_mean requires p strictly inside (0,1)")
    if np.any(n < 1):
        raise ValidationError("gvf_mean requires n >= 1")
    out = gamma[0] + gamma[1] * np.log(p * (1.0 - p)) + gamma[2] * np.log(n)
    if z is not None:
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        extras = gamma[3:]
        if z.shape[-1] != extras.shape[0]:
            raise ValidationError(
                f"z has {z.shape[-1]} columns but gamma carries "
                f"{extras.shape[0]} extra coefficients"
            )
        out = out + z @ extras
    elif gamma.shape[0] != 3:
        raise ValidationError("gamma has extra coefficients but no z given")
    return float(out) if out.ndim == 0 else out


@njit(cache=True, error_model="numpy")
def _softplus(x):
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@njit(cache=True, error_model="numpy")
def _logp_grad(
    x,
    xmat,
    p_hat,
    log_vfix,
    inv_vfix,
    act_idx,
    comp,
    comp_count,
    q_star,
    spatial,
    js,
    half_d,
    half_dvh,
    chi_c,
    log_n,
    zx,
    beta_sd,
    lam_u,
    phi_a,
    phi_b,
    lam_tau,
    g_means,
    g_sds,
):
    a_count = xmat.shape[0]
    p_coef = xmat.shape[1]
    nv = act_idx.shape[0]
    ng = g_means.shape[0]
    ncomp = comp_count.shape[0]

    beta = x[0:p_coef]
    u1 = x[p_coef : p_coef + a_count]
    off = p_coef + a_count
    if spatial:
        u2r = x[off : off + a_count]
        off += a_count
    else:
        u2r = x[0:0]
    ls_u = x[off]
    off += 1
    if spatial:
        lphi = x[off]
        off += 1
    else:
        lphi = 0.0
    if js:
        zv = x[off : off + nv]
        off += nv
        gam = x[off : off + ng]
        off += ng
        ls_t = x[off]
        off += 1
    else:
        zv = x[0:0]
        gam = x[0:0]
        ls_t = 0.0

    grad = np.zeros_like(x)
    lp = 0.0
    sigma_u = math.exp(ls_u)

    # area effect u and its ingredients
    u = np.empty(a_count)
    phi = 0.0
    c1 = sigma_u
    c2 = 0.0
    u2c = np.zeros(a_count)
    qu = np.zeros(a_count)
    means = np.zeros(ncomp)
    if spatial:
        if lphi >= 0.0:
            phi = 1.0 / (1.0 + math.exp(-lphi))
        else:
            e = math.exp(lphi)
            phi = e / (1.0 + e)
        c1 = sigma_u * math.sqrt(1.0 - phi)
        c2 = sigma_u * math.sqrt(phi)
        for a in range(a_count):
            means[comp[a]] += u2r[a]
        for l in range(ncomp):
            means[l] /= comp_count[l]
        for a in range(a_count):
            u2c[a] = u2r[a] - means[comp[a]]
        qu = np.dot(q_star, u2c)
        for a in range(a_count):
            u[a] = c1 * u1[a] + c2 * u2c[a]
    else:
        for a in range(a_count):
            u[a] = sigma_u * u1[a]

    eta = np.dot(xmat, beta) + u
    p = np.empty(a_count)
    lp1p = np.empty(a_count)
    for a in range(a_count):
        sp_pos = _softplus(eta[a])
        sp_neg = _softplus(-eta[a])
        p[a] = math.exp(-sp_neg)
        lp1p[a] = -(sp_pos + sp_neg)

    g_eta = np.zeros(a_count)
    g_zv = np.zeros(nv)
    g_gam = np.zeros(ng)
    g_lst = 0.0
    st = math.exp(ls_t)

    for j in range(nv):
        a = act_idx[j]
        if js:
            # variance linking model places log V at f + sigma_tau * z
            f = gam[0] + gam[1] * lp1p[a] + gam[2] * log_n[j]
            for t in range(3, ng):
                f += zx[j, t - 3] * gam[t]
            log_va = f + st * zv[j]
            inv_va = math.exp(-log_va)
        else:
            log_va = log_vfix[a]
            inv_va = inv_vfix[a]
        # mean sampling model: p_hat_a ~ N(p_a, V_a)
        r = p_hat[a] - p[a]
        lp += -0.5 * LOG_2PI - 0.5 * log_va - 0.5 * r * r * inv_va
        g_eta[a] += r * inv_va * p[a] * (1.0 - p[a])
        if js:
            g_lva = -0.5 + 0.5 * r * r * inv_va
            # variance sampling model: d v_hat / V ~ chi2(d), density in v_hat
            lp += chi_c[j] - half_d[j] * log_va - half_dvh[j] * inv_va
            g_lva += -half_d[j] + half_dvh[j] * inv_va
            # standardized coordinate z ~ N(0, 1)
            lp += -0.5 * LOG_2PI - 0.5 * zv[j] * zv[j]
            g_zv[j] = g_lva * st - zv[j]
            g_gam[0] += g_lva
            g_gam[1] += g_lva * lp1p[a]
            g_gam[2] += g_lva * log_n[j]
            for t in range(3, ng):
                g_gam[t] += g_lva * zx[j, t - 3]
            g_eta[a] += g_lva * gam[1] * (1.0 - 2.0 * p[a])
            g_lst += g_lva * st * zv[j]

    # latent priors
    for a in range(a_count):
        lp += -0.5 * LOG_2PI - 0.5 * u1[a] * u1[a]
    if spatial:
        lp += -0.5 * np.dot(u2c, qu)
        for l in range(ncomp):
            # proper density on each component-mean direction
            lp += -0.5 * LOG_2PI - 0.5 * comp_count[l] * means[l] * means[l]

    # hyperpriors (with log/logit Jacobians)
    lp += math.log(lam_u) - lam_u * sigma_u + ls_u
    if spatial:
        lg_phi = -_softplus(-lphi)
        lg_1mphi = -_softplus(lphi)
        lbeta = math.lgamma(phi_a) + math.lgamma(phi_b) - math.lgamma(phi_a + phi_b)
        lp += phi_a * lg_phi + phi_b * lg_1mphi - lbeta
    for k in range(p_coef):
        lp += -0.5 * LOG_2PI - math.log(beta_sd) - 0.5 * (beta[k] / beta_sd) ** 2
    if js:
        for t in range(ng):
            d = (gam[t] - g_means[t]) / g_sds[t]
            lp += -0.5 * LOG_2PI - math.log(g_sds[t]) - 0.5 * d * d
            g_gam[t] += -d / g_sds[t]
        lp += math.log(lam_tau) - lam_tau * st + ls_t
        g_lst += 1.0 - lam_tau * st

    # assemble gradient
    g_beta = np.dot(g_eta, xmat)
    for k in range(p_coef):
        grad[k] = g_beta[k] - beta[k] / (beta_sd * beta_sd)
    for a in range(a_count):
        grad[p_coef + a] = c1 * g_eta[a] - u1[a]
    pos = p_coef + a_count
    if spatial:
        gmeans = np.zeros(ncomp)
        for a in range(a_count):
            gmeans[comp[a]] += g_eta[a]
        for l in range(ncomp):
            gmeans[l] /= comp_count[l]
        for a in range(a_count):
            grad[pos + a] = c2 * (g_eta[a] - gmeans[comp[a]]) - qu[a] - means[comp[a]]
        pos += a_count
    # d u / d log sigma_u = u
    grad[pos] = np.dot(u, g_eta) + 1.0 - lam_u * sigma_u
    pos += 1
    if spatial:
        # d u / d logit phi, written to stay finite at phi -> 0 or 1
        dldphi = 0.0
        half = 0.5 * sigma_u
        for a in range(a_count):
            du = half * (
                -u1[a] * phi * math.sqrt(1.0 - phi)
                + u2c[a] * (1.0 - phi) * math.sqrt(phi)
            )
            dldphi += du * g_eta[a]
        grad[pos] = dldphi + phi_a * (1.0 - phi) - phi_b * phi
        pos += 1
    if js:
        for j in range(nv):
            grad[pos + j] = g_zv[j]
        pos += nv
        for t in range(ng):
            grad[pos + t] = g_gam[t]
        pos += ng
        grad[pos] = g_lst
    return lp, grad


class PosteriorDensity:
    """Joint log posterior of one model variant on one dataset.

    Owns the state-vector layout (packing/unpacking, parameter names) and
    evaluates value + gradient through a compiled kernel.  Instances are
    immutable after construction and safe to share across chains.
    """

    def __init__(self, config: ModelConfig, data: ModelData):
        direct = data.direct
        a_count = direct.n_areas
        if config.n_areas != a_count:
            raise ValidationError(
                f"design_matrix has {config.n_areas} rows but data covers "
                f"{a_count} areas"
            )
        self.config = config
        self.data = data

        p_hat = np.asarray(direct.p_hat, dtype=np.float64)
        v_hat = np.asarray(direct.v_hat, dtype=np.float64)
        active = (
            np.asarray(direct.sampled, dtype=bool)
            & np.isfinite(p_hat)
            & (p_hat != 0.0)
            & (p_hat != 1.0)
            & np.isfinite(v_hat)
            & (v_hat > 0.0)
            & (np.asarray(direct.dof) >= 1)
        )
        dropped = np.asarray(direct.sampled, dtype=bool) & ~active
        if dropped.any():
            names = [direct.areas[i] for i in np.flatnonzero(dropped)]
            warnings.warn(
                f"{len(names)} sampled area(s) excluded from the likelihood "
                f"(degenerate p_hat or missing/zero variance): {names[:8]}; "
                "their estimates come from the linking model alone",
                stacklevel=2,
            )
        self.active = active
        self.active_idx = np.flatnonzero(active).astype(np.int64)
        if config.smooth_variance and self.active_idx.size == 0:
            raise ValidationError(
                "JS variant needs at least one area with a usable variance estimate"
            )

        if config.spatial:
            if data.q_star is None:
                raise ValidationError("spatial variant requires q_star in ModelData")
            if data.q_star.n_areas != a_count:
                raise ValidationError(
                    f"q_star is {data.q_star.n_areas}x{data.q_star.n_areas} "
                    f"but there are {a_count} areas"
                )
            self._q = np.ascontiguousarray(data.q_star.q_star)
            self._comp = np.ascontiguousarray(data.q_star.components, dtype=np.int64)
            ncomp = int(self._comp.max()) + 1
            self._comp_count = np.bincount(self._comp, minlength=ncomp).astype(
                np.float64
            )
        else:
            self._q = np.zeros((0, 0))
            self._comp = np.zeros(a_count, dtype=np.int64)
            self._comp_count = np.array([float(a_count)])

        # fixed-variance tables (MS path); zeros where unused
        log_vfix = np.zeros(a_count)
        inv_vfix = np.zeros(a_count)
        log_vfix[active] = np.log(v_hat[active])
        inv_vfix[active] = 1.0 / v_hat[active]
        self._log_vfix = log_vfix
        self._inv_vfix = inv_vfix

        nv = self.active_idx.size
        if config.smooth_variance:
            d = np.asarray(direct.dof, dtype=np.float64)[self.active_idx]
            vh = v_hat[self.active_idx]
            self._half_d = d / 2.0
            self._half_dvh = d * vh / 2.0
            # data-only part of chi2_variance_logpdf: evaluate it at V = 1
            # and strip the -d*v_hat/2 tail the kernel adds back per state
            self._chi_c = (
                np.atleast_1d(chi2_variance_logpdf(vh, 1.0, d)) + d * vh / 2.0
            )
            n_units = np.asarray(direct.n, dtype=np.float64)[self.active_idx]
            if np.any(n_units < 1):
                raise ValidationError("active areas must have n >= 1 for the GVF")
            self._log_n = np.log(n_units)
            z = config.gvf_extra_covariates
            if z is not None:
                self._zx = np.ascontiguousarray(z[self.active_idx])
            else:
                self._zx = np.zeros((nv, 0))
        else:
            self._half_d = np.zeros(nv)
            self._half_dvh = np.zeros(nv)
            self._chi_c = np.zeros(nv)
            self._log_n = np.zeros(nv)
            self._zx = np.zeros((nv, 0))

        means = list(config.gamma_prior_means) + [0.0] * config.n_gvf_extra
        sds = list(config.gamma_prior_sds) + [1.0] * config.n_gvf_extra
        self._g_means = np.array(means)
        self._g_sds = np.array(sds)
        self._p_hat = np.where(np.isfinite(p_hat), p_hat, 0.0)
        self._lam_u = pc_rate(*config.pc_prior_u)
        self._lam_tau = pc_rate(*config.pc_prior_tau)

        names = [f"beta[{j}]" for j in range(config.n_coef)]
        names += [f"u_unstr[{a}]" for a in direct.areas]
        if config.spatial:
            names += [f"u_spat[{a}]" for a in direct.areas]
        names.append("log_sigma_u")
        if config.spatial:
            names.append("logit_phi")
        if config.smooth_variance:
            names += [f"z_v[{direct.areas[i]}]" for i in self.active_idx]
            names += [f"gamma[{t}]" for t in range(config.n_gamma)]
            names.append("log_sigma_tau")
        self.parameter_names = names
        self.dim = len(names)

    # ---- vector interface (used by the sampler) ----

    def value_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValidationError(
                f"state vector must have shape ({self.dim},), got {x.shape}"
            )
        cfg = self.config
        return _logp_grad(
            x,
            cfg.design_matrix,
            self._p_hat,
            self._log_vfix,
            self._inv_vfix,
            self.active_idx,
            self._comp,
            self._comp_count,
            self._q,
            cfg.spatial,
            cfg.smooth_variance,
            self._half_d,
            self._half_dvh,
            self._chi_c,
            self._log_n,
            self._zx,
            float(cfg.beta_prior_sd),
            self._lam_u,
            float(cfg.phi_prior[0]),
            float(cfg.phi_prior[1]),
            self._lam_tau,
            self._g_means,
            self._g_sds,
        )

    # ---- state packing ----

    def _gvf_location(
        self,
        beta: np.ndarray,
        u_unstr: np.ndarray,
        u_spat,
        log_sigma_u: float,
        logit_phi,
        gamma: np.ndarray,
    ) -> np.ndarray:
        """Linking-model mean of log V over the active areas.

        Mirrors the kernel exactly (including per-component centering of the
        spatial coordinates) so that standardizing and de-standardizing the
        variance block are inverse operations.
        """
        cfg = self.config
        sigma_u = math.exp(log_sigma_u)
        if cfg.spatial:
            phi = float(expit(logit_phi))
            centered = self._center_spatial(
                np.asarray(u_spat, dtype=np.float64)[None, :]
            )[0]
            u = sigma_u * (
                math.sqrt(1.0 - phi) * u_unstr + math.sqrt(phi) * centered
            )
        else:
            u = sigma_u * u_unstr
        eta = (cfg.design_matrix @ beta + u)[self.active_idx]
        lp1p = -(np.logaddexp(0.0, eta) + np.logaddexp(0.0, -eta))
        f = gamma[0] + gamma[1] * lp1p + gamma[2] * self._log_n
        if self._zx.shape[1]:
            f = f + self._zx @ gamma[3:]
        return f

    def pack(self, state: ParameterState) -> np.ndarray:
        cfg = self.config
        a_count = cfg.n_areas
        parts = [np.asarray(state.beta, dtype=np.float64)]
        if parts[0].shape != (cfg.n_coef,):
            raise ValidationError(
                f"beta must have length {cfg.n_coef}, got {parts[0].shape}"
            )
        if state.u_unstr.shape != (a_count,):
            raise ValidationError(f"u_unstr must have length {a_count}")
        parts.append(state.u_unstr)
        if cfg.spatial:
            if state.u_spat is None or state.logit_phi is None:
                raise ValidationError("spatial variant needs u_spat and logit_phi")
            if state.u_spat.shape != (a_count,):
                raise ValidationError(f"u_spat must have length {a_count}")
            parts.append(state.u_spat)
        parts.append(np.array([state.log_sigma_u]))
        if cfg.spatial:
            parts.append(np.array([state.logit_phi]))
        if cfg.smooth_variance:
            nv = self.active_idx.size
            if state.log_v is None or state.gamma is None or state.log_sigma_tau is None:
                raise ValidationError("JS variant needs log_v, gamma and log_sigma_tau")
            if state.log_v.shape != (nv,):
                raise ValidationError(
                    f"log_v must cover the {nv} active areas, got {state.log_v.shape}"
                )
            if state.gamma.shape != (cfg.n_gamma,):
                raise ValidationError(f"gamma must have length {cfg.n_gamma}")
            # the sampling chart carries standardized variance coordinates
            f = self._gvf_location(
                parts[0],
                state.u_unstr,
                state.u_spat,
                state.log_sigma_u,
                state.logit_phi,
                state.gamma,
            )
            parts.append((state.log_v - f) / math.exp(state.log_sigma_tau))
            parts.append(state.gamma)
            parts.append(np.array([state.log_sigma_tau]))
        return np.concatenate(parts)

    def unpack(self, x: np.ndarray) -> ParameterState:
        cfg = self.config
        a_count = cfg.n_areas
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValidationError(
                f"state vector must have shape ({self.dim},), got {x.shape}"
            )
        pos = cfg.n_coef
        beta = x[:pos]
        u1 = x[pos : pos + a_count]
        pos += a_count
        u_spat = logit_phi = log_v = gamma = log_sigma_tau = None
        if cfg.spatial:
            u_spat = x[pos : pos + a_count]
            pos += a_count
        log_sigma_u = float(x[pos])
        pos += 1
        if cfg.spatial:
            logit_phi = float(x[pos])
            pos += 1
        if cfg.smooth_variance:
            nv = self.active_idx.size
            z_v = x[pos : pos + nv]
            pos += nv
            gamma = x[pos : pos + cfg.n_gamma]
            pos += cfg.n_gamma
            log_sigma_tau = float(x[pos])
            f = self._gvf_location(
                beta, u1, u_spat, log_sigma_u, logit_phi, gamma
            )
            log_v = f + math.exp(log_sigma_tau) * z_v
        return ParameterState(
            beta=beta.copy(),
            u_unstr=u1.copy(),
            log_sigma_u=log_sigma_u,
            u_spat=None if u_spat is None else u_spat.copy(),
            logit_phi=logit_phi,
            log_v=None if log_v is None else log_v.copy(),
            gamma=None if gamma is None else gamma.copy(),
            log_sigma_tau=log_sigma_tau,
        )

    # ---- latent reconstruction ----

    def _center_spatial(self, u2: np.ndarray) -> np.ndarray:
        comp = self._comp
        sums = np.zeros((u2.shape[0], len(self._comp_count)))
        np.add.at(sums.T, comp, u2.T)
        return u2 - (sums / self._comp_count)[:, comp]

    def latent_draws(self, draws: np.ndarray) -> np.ndarray:
        """Map state vectors (n, dim) to latent proportions p (n, A)."""
        cfg = self.config
        draws = np.atleast_2d(np.asarray(draws, dtype=np.float64))
        a_count = cfg.n_areas
        pos = cfg.n_coef
        beta = draws[:, :pos]
        u1 = draws[:, pos : pos + a_count]
        pos += a_count
        if cfg.spatial:
            u2 = self._center_spatial(draws[:, pos : pos + a_count])
            pos += a_count
            sigma = np.exp(draws[:, pos : pos + 1])
            phi = expit(draws[:, pos + 1 : pos + 2])
            u = sigma * (np.sqrt(1.0 - phi) * u1 + np.sqrt(phi) * u2)
        else:
            sigma = np.exp(draws[:, pos : pos + 1])
            u = sigma * u1
        return expit(beta @ cfg.design_matrix.T + u)


def log_posterior(state: ParameterState, config: ModelConfig, data: ModelData) -> float:
    """Joint log posterior density at ``state`` (unconstrained scale)."""
    density = PosteriorDensity(config, data)
    value, _ = density.value_and_grad(density.pack(state))
    return value


def grad_log_posterior(
    state: ParameterState, config: ModelConfig, data: ModelData
) -> np.ndarray:
    """Gradient of :func:`log_posterior`, aligned with the state layout."""
    density = PosteriorDensity(config, data)
    _, grad = density.value_and_grad(density.pack(state))
    return grad


def latent_proportions(
    state: ParameterState, config: ModelConfig, data: ModelData
) -> np.ndarray:
    """Area proportions p = inverse-logit(X beta + u) implied by ``state``."""
    density = PosteriorDensity(config, data)
    return density.latent_draws(density.pack(state)[None, :])[0]


def simulate_from_prior(
    config: ModelConfig,
    *,
    n_units,
    dof,
    q_star: ScaledIcarPrecision | None = None,
    rng: np.random.Generator,
    v_true=None,
) -> tuple[np.ndarray, DirectEstimates, PosteriorDensity]:
    """Draw (parameters, synthetic direct estimates) from the joint model.

    Generates hyperparameters and latents from their priors, then direct
    estimates from the sampling models: ``p_hat ~ N(p, V)`` and
    ``d v_hat / V ~ chi2(d)``.  For the MS variant ``v_true`` supplies the
    fixed variances.  Returns the true state as a packed vector along with
    the data and the matching density object.

    The Gaussian sampling model can put ``p_hat`` outside [0,1]; such
    values are kept (the likelihood is defined for them), matching the
    generative process exactly as needed for calibration checks.
    """
    a_count = config.n_areas
    n_units = np.asarray(n_units, dtype=np.int64)
    dof = np.asarray(dof, dtype=np.int64)
    if n_units.shape != (a_count,) or dof.shape != (a_count,):
        raise ValidationError("n_units and dof must each have one entry per area")
    if np.any(dof < 1) or np.any(n_units < 1):
        raise ValidationError("prior simulation needs dof >= 1 and n >= 1 everywhere")

    beta = rng.normal(0.0, config.beta_prior_sd, size=config.n_coef)
    u1 = rng.standard_normal(a_count)
    sigma_u = rng.exponential(1.0 / pc_rate(*config.pc_prior_u))
    eta = config.design_matrix @ beta
    u_spat = None
    logit_phi = None
    if config.spatial:
        if q_star is None:
            raise ValidationError("spatial prior simulation requires q_star")
        phi = rng.beta(*config.phi_prior)
        logit_phi = float(np.log(phi) - np.log1p(-phi))
        field = sample_icar(q_star, rng)
        # free mean coordinate, matching the density's proper extension
        u_spat = field + rng.standard_normal() / math.sqrt(a_count)
        centered = u_spat - u_spat.mean()
        eta = eta + sigma_u * (
            math.sqrt(1.0 - phi) * u1 + math.sqrt(phi) * centered
        )
    else:
        eta = eta + sigma_u * u1
    p = expit(eta)

    log_v = gamma = None
    log_sigma_tau = None
    if config.smooth_variance:
        n_gamma = config.n_gamma
        means = np.concatenate(
            [config.gamma_prior_means, np.zeros(config.n_gvf_extra)]
        )
        sds = np.concatenate([config.gamma_prior_sds, np.ones(config.n_gvf_extra)])
        gamma = rng.normal(means, sds)
        sigma_tau = rng.exponential(1.0 / pc_rate(*config.pc_prior_tau))
        log_sigma_tau = math.log(sigma_tau)
        f = gvf_mean(p, n_units, gamma, z=config.gvf_extra_covariates)
        log_v = rng.normal(f, sigma_tau)
        v = np.exp(log_v)
    else:
        if v_true is None:
            raise ValidationError("MS prior simulation needs v_true")
        v = np.asarray(v_true, dtype=np.float64)

    p_hat = rng.normal(p, np.sqrt(v))
    v_hat = v * rng.chisquare(dof) / dof

    direct = DirectEstimates(
        areas=tuple(f"area{i}" for i in range(a_count)),
        p_hat=p_hat,
        v_hat=v_hat,
        dof=dof,
        n=n_units,
        m=dof + 1,
        sampled=np.ones(a_count, dtype=bool),
        has_variance=np.ones(a_count, dtype=bool),
    )
    density = PosteriorDensity(config, ModelData(direct=direct, q_star=q_star))
    state = ParameterState(
        beta=beta,
        u_unstr=u1,
        log_sigma_u=math.log(sigma_u),
        u_spat=u_spat,
        logit_phi=logit_phi,
        log_v=None if log_v is None else log_v[density.active_idx],
        gamma=gamma,
        log_sigma_tau=log_sigma_tau,
    )
    # repack through the density so the vector matches its layout exactly,
    # but keep the raw (uncentered) spatial coordinates
    x = density.pack(state)
    if config.spatial:
        pos = config.n_coef + a_count
        x[pos : pos + a_count] = u_spat
    return x, direct, density
