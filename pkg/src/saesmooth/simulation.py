"""Synthetic-population benchmark: geography, sampling design, and metrics.

Rebuilds the simulation study end to end at configurable scale.  A pixel
grid with a log-Gaussian population surface stands in for the original
raster; contiguous areas are grown around spread-out seed pixels, split
into urban/rural strata by per-area density, and subdivided into admin2
units for one of the covariate fields.  Cluster locations are sampled once
per benchmark (without replacement, proportional to pixel population) and
carry five covariates: two binaries, two ICAR fields (area and admin2
level), and a Matern field drawn exactly from its dense covariance in
per-area blocks.  Each replication then draws cluster sizes, risks, and
responses, samples eight clusters per stratum by systematic PPS, and runs
the full estimator set; metrics average RMSE, MAE, 90% coverage, and
interval length across areas, then across replications.

Everything is reproducible from one integer seed: geography, frame, and
replications get independent substreams, so results are identical at any
worker count.
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed
from scipy.special import expit, kv

from .errors import SamplingError, ValidationError
from .graph import ScaledIcarPrecision, build_graph, icar_precision, sample_icar, scale_icar
from .model import ModelConfig, ModelData, PosteriorDensity
from .sampler import SamplerConfig, run_chains
from .summary import AreaEstimates, hajek_intervals, summarize_areas
from .survey import SurveyDataset, direct_estimates

__all__ = [
    "GeographyConfig",
    "SyntheticGeography",
    "ClusterFrame",
    "Population",
    "Metrics",
    "ScenarioConfig",
    "BenchmarkResult",
    "generate_geography",
    "draw_covariates",
    "draw_population",
    "sample_survey",
    "compute_metrics",
    "run_benchmark",
    "benchmark_csv",
    "paper_geography",
    "make_scenario",
    "scenario_from_dict",
    "METHOD_ORDER",
]

# Table row order: direct estimator first, then the four model variants
METHOD_ORDER = (
    "Hajek",
    "Unmatched MS",
    "Spatial Unmatched MS",
    "Unmatched JS",
    "Spatial Unmatched JS",
)

GENERATING_COEFFICIENTS = (0.25, -0.25, 0.5, 0.25, 0.25)


@dataclass(frozen=True)
class GeographyConfig:
    """Shape of the synthetic sampling frame.

    ``grid`` is the side length of the square pixel raster.  Each area is
    split into an urban and a rural stratum at its median pixel density,
    except the ``n_single_stratum`` densest areas, which stay whole (the
    fully urban capital-style case).  ``clusters_per_stratum`` pixels per
    stratum form the cluster frame.  ``pop_log_sd`` sets the smooth
    regional contrast of the population surface; ``pop_pixel_sd`` adds
    independent pixel-level scatter, the settlement-scale variation that
    makes size-proportional selection produce genuinely unequal weights.
    """

    grid: int = 40
    n_areas: int = 8
    clusters_per_stratum: int = 60
    n_single_stratum: int = 0
    admin2_per_area: int = 3
    pop_mean: float = 20.0
    pop_log_sd: float = 1.0
    pop_pixel_sd: float = 0.9
    matern_range: float = 0.25 * math.sqrt(2.0)

    def __post_init__(self):
        if self.grid < 2 or self.n_areas < 2:
            raise ValidationError("geography needs grid >= 2 and n_areas >= 2")
        if self.grid * self.grid < 4 * self.n_areas:
            raise ValidationError(
                f"{self.n_areas} areas will not fit a {self.grid}x{self.grid} grid"
            )
        if not (0 <= self.n_single_stratum <= self.n_areas):
            raise ValidationError("n_single_stratum must be in [0, n_areas]")
        if self.admin2_per_area < 1 or self.clusters_per_stratum < 1:
            raise ValidationError(
                "admin2_per_area and clusters_per_stratum must be positive"
            )
        if not (
            self.pop_mean > 0
            and self.pop_log_sd >= 0
            and self.pop_pixel_sd >= 0
            and self.matern_range > 0
        ):
            raise ValidationError("field parameters must be positive")

    @property
    def n_strata(self) -> int:
        return 2 * self.n_areas - self.n_single_stratum


def paper_geography() -> GeographyConfig:
    """Frame dimensions of the original study: 37 areas, 73 strata.

    The grid is sized so even the smallest stratum keeps comfortably more
    pixels than the 300 the cluster frame draws from it; the randomized
    partition leaves some strata at roughly half the mean pixel count, so
    the mean is kept at about 2.5x the frame requirement.
    """
    return GeographyConfig(
        grid=240,
        n_areas=37,
        clusters_per_stratum=300,
        n_single_stratum=1,
        admin2_per_area=21,
    )


@dataclass(eq=False)
class SyntheticGeography:
    """Pixel raster with population counts and nested assignments."""

    config: GeographyConfig
    population: np.ndarray
    area_of: np.ndarray
    stratum_of: np.ndarray
    admin2_of: np.ndarray
    area_names: tuple
    stratum_area: np.ndarray
    area_edges: list
    admin2_edges: list

    @property
    def n_areas(self) -> int:
        return self.config.n_areas

    @property
    def n_strata(self) -> int:
        return len(self.stratum_area)

    @property
    def total_population(self) -> float:
        return float(self.population.sum())

    def pixel_coords(self) -> np.ndarray:
        """Unit-square coordinates of pixel centers, flattened row-major."""
        g = self.config.grid
        r, c = np.divmod(np.arange(g * g), g)
        return np.column_stack([(c + 0.5) / g, (r + 0.5) / g])


@dataclass(eq=False)
class ClusterFrame:
    """Cluster locations and covariates, fixed for a whole benchmark."""

    geography: SyntheticGeography
    pixel: np.ndarray
    area: np.ndarray
    stratum: np.ndarray
    coords: np.ndarray
    covariates: np.ndarray

    @property
    def n_clusters(self) -> int:
        return self.pixel.shape[0]


@dataclass(eq=False)
class Population:
    """One realized population over the cluster frame.

    ``p_true`` is the census proportion per area, recomputed from the
    realized responses: sum of positives over sum of cluster sizes.
    """

    frame: ClusterFrame
    mu: float
    size: np.ndarray
    risk: np.ndarray
    positives: np.ndarray
    u_area: np.ndarray
    v_cluster: np.ndarray
    p_true: np.ndarray

    def __post_init__(self):
        if np.any(self.risk <= 0.0) or np.any(self.risk >= 1.0):
            raise ValidationError("cluster risks must lie strictly inside (0,1)")
        if np.any(self.positives > self.size):
            raise ValidationError("cluster positives cannot exceed cluster size")


# ---- geography construction ----


def _spread_seeds(coords: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy farthest-point seed pixels, randomized start."""
    n = coords.shape[0]
    seeds = np.empty(k, dtype=np.int64)
    seeds[0] = rng.integers(n)
    d2 = np.sum((coords - coords[seeds[0]]) ** 2, axis=1)
    for j in range(1, k):
        seeds[j] = int(np.argmax(d2))
        d2 = np.minimum(d2, np.sum((coords - coords[seeds[j]]) ** 2, axis=1))
    return seeds


def _grow_partition(
    grid: int, cells: np.ndarray, seeds: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Multi-source BFS over the 4-neighbor grid, restricted to ``cells``.

    Guarantees contiguous, roughly balanced parts because fronts advance in
    randomized round-robin order.  ``cells`` is a boolean mask over the
    flattened grid; returns part labels (or -1 outside the mask).
    """
    labels = np.full(grid * grid, -1, dtype=np.int64)
    queues = []
    for part, s in enumerate(seeds):
        labels[s] = part
        queues.append(deque([int(s)]))
    active = list(range(len(seeds)))
    while active:
        order = rng.permutation(len(active))
        next_active = []
        for oi in order:
            part = active[oi]
            q = queues[part]
            advanced = False
            while q and not advanced:
                p = q.popleft()
                r, c = divmod(p, grid)
                for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                    if 0 <= rr < grid and 0 <= cc < grid:
                        np_ = rr * grid + cc
                        if cells[np_] and labels[np_] < 0:
                            labels[np_] = part
                            q.append(np_)
                            advanced = True
                if advanced:
                    q.appendleft(p)
            if q:
                next_active.append(part)
        active = next_active
    return labels


def _adjacency_edges(grid: int, labels: np.ndarray) -> list:
    """Rook-neighbor label pairs (i < j) present anywhere on the grid."""
    lab = labels.reshape(grid, grid)
    pairs = set()
    for a, b in [(lab[:, :-1], lab[:, 1:]), (lab[:-1, :], lab[1:, :])]:
        diff = a != b
        for x, y in zip(a[diff].ravel(), b[diff].ravel()):
            if x >= 0 and y >= 0:
                pairs.add((min(int(x), int(y)), max(int(x), int(y))))
    return sorted(pairs)


def _log_gaussian_surface(
    grid: int, rng: np.random.Generator, sd: float, n_waves: int = 48
) -> np.ndarray:
    """Stationary Gaussian surface via random Fourier features."""
    r, c = np.divmod(np.arange(grid * grid), grid)
    coords = np.column_stack([(c + 0.5) / grid, (r + 0.5) / grid])
    freq = rng.normal(0.0, 1.0 / 0.15, size=(n_waves, 2))
    phase = rng.uniform(0.0, 2.0 * math.pi, size=n_waves)
    amp = rng.standard_normal(n_waves)
    basis = np.cos(coords @ freq.T + phase)
    return sd * math.sqrt(2.0 / n_waves) * (basis @ amp)


def generate_geography(
    config: GeographyConfig | None = None, rng=None
) -> SyntheticGeography:
    """Build the raster: population surface, areas, strata, admin2 units.

    Population counts are Poisson draws around a log-Gaussian intensity, so
    density varies smoothly and size-proportional sampling is informative.
    Raises if any stratum ends up with fewer pixels than the cluster frame
    needs.
    """
    config = GeographyConfig() if config is None else config
    rng = np.random.default_rng(rng)
    g = config.grid
    n_pix = g * g

    log_smooth = _log_gaussian_surface(g, rng, config.pop_log_sd)
    raw_noise = rng.standard_normal(n_pix)

    r, c = np.divmod(np.arange(n_pix), g)
    coords = np.column_stack([(c + 0.5) / g, (r + 0.5) / g])
    all_cells = np.ones(n_pix, dtype=bool)

    # the randomized partition occasionally leaves one stratum too small
    # for the cluster frame; redraw it a bounded number of times before
    # declaring the configuration infeasible
    for _ in range(25):
        area_of = _grow_partition(
            g, all_cells, _spread_seeds(coords, config.n_areas, rng), rng
        )

        # settlement-scale contrast differs by region: some areas pack
        # people into a few dense pixels, others spread them evenly, so
        # the scatter scale gets its own per-area multiplier
        pixel_sd = config.pop_pixel_sd * np.exp(
            rng.uniform(math.log(0.25), math.log(2.0), config.n_areas)
        )
        sd_pix = pixel_sd[area_of]
        log_field = log_smooth + raw_noise * sd_pix
        intensity = config.pop_mean * np.exp(
            log_field - 0.5 * (config.pop_log_sd**2 + sd_pix**2)
        )
        # at least one person per pixel keeps every pixel eligible
        population = rng.poisson(intensity).astype(np.int64) + 1

        # densest areas become single-stratum; the rest split at their median
        density = np.array(
            [population[area_of == a].mean() for a in range(config.n_areas)]
        )
        single = set(np.argsort(density)[::-1][: config.n_single_stratum].tolist())
        stratum_of = np.full(n_pix, -1, dtype=np.int64)
        stratum_area = []
        for a in range(config.n_areas):
            mask = area_of == a
            if a in single:
                stratum_of[mask] = len(stratum_area)
                stratum_area.append(a)
                continue
            cut = np.median(population[mask])
            urban = mask & (population >= cut)
            rural = mask & (population < cut)
            if not urban.any() or not rural.any():
                #-- degenerate density split; fall back to an even halving
                idx = np.flatnonzero(mask)
                half = idx[: idx.size // 2]
                urban = np.zeros(n_pix, dtype=bool)
                urban[half] = True
                rural = mask & ~urban
            stratum_of[urban] = len(stratum_area)
            stratum_area.append(a)
            stratum_of[rural] = len(stratum_area)
            stratum_area.append(a)
        stratum_area = np.asarray(stratum_area, dtype=np.int64)

        counts = np.bincount(stratum_of, minlength=len(stratum_area))
        if np.all(counts >= config.clusters_per_stratum):
            break
    else:
        raise ValidationError(
            f"smallest stratum has {counts.min()} pixels but the frame needs "
            f"{config.clusters_per_stratum}; enlarge the grid"
        )

    admin2_of = np.full(n_pix, -1, dtype=np.int64)
    offset = 0
    for a in range(config.n_areas):
        mask = area_of == a
        idx = np.flatnonzero(mask)
        k = min(config.admin2_per_area, idx.size)
        sub_seeds = idx[
            _spread_seeds(coords[idx], k, rng)
        ]
        sub = _grow_partition(g, mask, sub_seeds, rng)
        admin2_of[mask] = sub[mask] + offset
        offset += k

    return SyntheticGeography(
        config=config,
        population=population,
        area_of=area_of,
        stratum_of=stratum_of,
        admin2_of=admin2_of,
        area_names=tuple(f"area{a}" for a in range(config.n_areas)),
        stratum_area=stratum_area,
        area_edges=_adjacency_edges(g, area_of),
        admin2_edges=_adjacency_edges(g, admin2_of),
    )


# ---- covariates and the cluster frame ----


def _matern1_correlation(dist: np.ndarray, range_param: float) -> np.ndarray:
    """Matern correlation with smoothness 1: (x) K_1(x) at x = sqrt(2) d / rho."""
    x = math.sqrt(2.0) * np.asarray(dist, dtype=np.float64) / range_param
    out = np.ones_like(x)
    pos = x > 0
    out[pos] = x[pos] * kv(1.0, x[pos])
    return out


def _draw_matern_blocks(
    coords: np.ndarray, blocks: np.ndarray, range_param: float, rng
) -> np.ndarray:
    """Exact unit-variance Matern(1) draws, independent across blocks."""
    out = np.empty(coords.shape[0])
    for b in np.unique(blocks):
        idx = np.flatnonzero(blocks == b)
        pts = coords[idx]
        d = np.sqrt(
            np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        )
        cov = _matern1_correlation(d, range_param)
        cov[np.diag_indices_from(cov)] = 1.0 + 1e-8
        chol = np.linalg.cholesky(cov)
        out[idx] = chol @ rng.standard_normal(idx.size)
    return out


def scaled_icar_from_edges(edges, names) -> ScaledIcarPrecision:
    """Scaled ICAR precision for an integer- or string-labeled graph."""
    named = [(names[i], names[j]) for i, j in edges] if edges and isinstance(
        edges[0][0], (int, np.integer)
    ) else list(edges)
    return scale_icar(icar_precision(build_graph(named, list(names))))


def draw_covariates(geography: SyntheticGeography, rng=None) -> ClusterFrame:
    """Sample cluster locations and attach the five covariates.

    Locations: ``clusters_per_stratum`` pixels per stratum, drawn without
    replacement with probability proportional to pixel population.  The
    binary covariates are cluster-level; the first ICAR field varies by
    area, the second by admin2 unit; the Matern field is evaluated at the
    cluster coordinates.  Everything here stays fixed across replications.
    """
    rng = np.random.default_rng(rng)
    cfg = geography.config
    coords_all = geography.pixel_coords()

    pixels = []
    for s in range(geography.n_strata):
        idx = np.flatnonzero(geography.stratum_of == s)
        pop = geography.population[idx].astype(np.float64)
        positive = pop > 0
        if positive.sum() < cfg.clusters_per_stratum:
            raise ValidationError(
                f"stratum {s} has only {int(positive.sum())} populated pixels "
                f"but the frame needs {cfg.clusters_per_stratum}"
            )
        chosen = rng.choice(
            idx, size=cfg.clusters_per_stratum, replace=False, p=pop / pop.sum()
        )
        pixels.append(np.sort(chosen))
    pixel = np.concatenate(pixels)
    area = geography.area_of[pixel]
    stratum = geography.stratum_of[pixel]
    admin2 = geography.admin2_of[pixel]
    coords = coords_all[pixel]
    n = pixel.size

    x = np.empty((n, 5))
    x[:, 0] = rng.random(n) < 0.5
    # area index is 1-based in the success probability ramp
    x[:, 1] = rng.random(n) < 0.3 + 0.5 * (area + 1) / cfg.n_areas
    icar_area = sample_icar(
        scaled_icar_from_edges(geography.area_edges, geography.area_names), rng
    )
    x[:, 2] = icar_area[area]
    n_admin2 = int(geography.admin2_of.max()) + 1
    icar_admin2 = sample_icar(
        scaled_icar_from_edges(
            geography.admin2_edges, [f"d{j}" for j in range(n_admin2)]
        ),
        rng,
    )
    x[:, 3] = icar_admin2[admin2]
    x[:, 4] = _draw_matern_blocks(coords, area, cfg.matern_range, rng)

    return ClusterFrame(
        geography=geography,
        pixel=pixel,
        area=area,
        stratum=stratum,
        coords=coords,
        covariates=x,
    )


# ---- population realizations ----


def draw_population(
    frame: ClusterFrame,
    mu: float,
    rng=None,
    *,
    coefficients=GENERATING_COEFFICIENTS,
    sigma_area: float = 0.25,
    sigma_cluster: float = 0.5,
    mean_cluster_size: float = 10.0,
) -> Population:
    """Draw cluster sizes, risks, and responses for one replication.

    Risk: logit(q_c) = logit(mu) + x_c' coefficients + u_area + v_cluster
    with iid Gaussian effects; sizes are Poisson; responses binomial given
    (size, risk).  True area proportions are recomputed from the realized
    responses of the whole frame.
    """
    if not (0.0 < mu < 1.0):
        raise ValidationError(f"mu must be in (0,1), got {mu}")
    coefficients = np.asarray(coefficients, dtype=np.float64)
    if coefficients.shape != (5,):
        raise ValidationError("expected five generating coefficients")
    rng = np.random.default_rng(rng)
    n_areas = frame.geography.n_areas

    u = rng.normal(0.0, sigma_area, n_areas)
    v = rng.normal(0.0, sigma_cluster, frame.n_clusters)
    eta = (
        math.log(mu / (1.0 - mu))
        + frame.covariates @ coefficients
        + u[frame.area]
        + v
    )
    risk = expit(eta)
    size = rng.poisson(mean_cluster_size, frame.n_clusters)
    positives = rng.binomial(size, risk)

    totals = np.bincount(frame.area, weights=size, minlength=n_areas)
    if np.any(totals == 0):
        raise ValidationError("every area needs at least one individual")
    hits = np.bincount(frame.area, weights=positives, minlength=n_areas)
    return Population(
        frame=frame,
        mu=mu,
        size=size,
        risk=risk,
        positives=positives,
        u_area=u,
        v_cluster=v,
        p_true=hits / totals,
    )


# ---- survey sampling ----


def _systematic_pps(sizes: np.ndarray, m: int, rng) -> np.ndarray:
    """Systematic PPS without replacement on a randomly ordered list."""
    order = rng.permutation(sizes.size)
    s = sizes[order].astype(np.float64)
    total = s.sum()
    if total <= 0:
        raise ValidationError("stratum has no population to sample")
    step = total / m
    if np.any(s >= step):
        raise ValidationError(
            "a cluster exceeds the PPS sampling interval; "
            "stratum too small for this many draws"
        )
    points = rng.uniform(0.0, step) + step * np.arange(m)
    chosen = order[np.searchsorted(np.cumsum(s), points, side="right")]
    return np.sort(chosen)


def _pps_sample(measure: np.ndarray, m: int, rng) -> tuple:
    """PPS draw where oversized entries become certainty selections.

    A cluster whose size measure reaches the sampling interval is taken
    with probability one (the frame analogue of segmenting an oversized
    enumeration area) and the remaining slots are drawn systematically
    from the rest.  Returns selected indices in ascending order with the
    matching inclusion probabilities.
    """
    idx = np.arange(measure.size)
    measure = measure.astype(np.float64, copy=True)
    certain = []
    while m > 0:
        total = measure.sum()
        if total <= 0:
            raise ValidationError("stratum has no population to sample")
        over = measure >= total / m
        if not over.any():
            break
        certain.extend(idx[over].tolist())
        m -= int(over.sum())
        idx = idx[~over]
        measure = measure[~over]
    if m == 0:
        chosen = np.asarray(sorted(certain), dtype=np.int64)
        return chosen, np.ones(chosen.size)
    rest = _systematic_pps(measure, m, rng)
    chosen = np.concatenate([np.asarray(certain, dtype=np.int64), idx[rest]])
    pi = np.concatenate(
        [np.ones(len(certain)), m * measure[rest] / measure.sum()]
    )
    order = np.argsort(chosen)
    return chosen[order], pi[order]


def sample_survey(
    population: Population,
    clusters_per_stratum: int = 8,
    rng=None,
    *,
    census: bool = False,
) -> SurveyDataset:
    """Two-stage sample: PPS clusters within strata, then every individual.

    The first stage draws clusters PPS without replacement on the frame's
    measure of size, the pixel population each cluster was listed with, so
    inclusion probabilities are m * P_c / P_stratum (entries too large for
    the sampling interval become certainty selections).  Realized cluster
    sizes follow their own law, mirroring household-survey practice where
    the frame's census-based size measure differs from what is found in
    the field; weights (inverse inclusion probabilities, constant within a
    cluster) therefore vary across clusters and the weighted estimator
    genuinely differs from the unweighted one.  ``census=True`` takes
    every populated cluster with weight 1 instead (used for exactness
    checks: the weighted estimator then reproduces the true proportions).
    """
    rng = np.random.default_rng(rng)
    frame = population.frame
    geography = frame.geography
    if clusters_per_stratum < 1:
        raise ValidationError("clusters_per_stratum must be positive")

    measure_all = geography.population[frame.pixel].astype(np.float64)
    resp_parts = []
    weight_parts = []
    strata_parts = []
    cluster_parts = []
    area_parts = []
    for s in range(geography.n_strata):
        members = np.flatnonzero(frame.stratum == s)
        if census:
            sizes = population.size[members]
            chosen_local = np.flatnonzero(sizes > 0)
            pi = np.ones(chosen_local.size)
        else:
            if members.size < clusters_per_stratum:
                raise ValidationError(
                    f"stratum {s} has {members.size} frame clusters, cannot "
                    f"sample {clusters_per_stratum}"
                )
            chosen_local, pi = _pps_sample(
                measure_all[members], clusters_per_stratum, rng
            )
        for local, prob in zip(chosen_local, pi):
            c = members[local]
            n_c = int(population.size[c])
            y_c = int(population.positives[c])
            resp_parts.append(
                np.concatenate([np.ones(y_c), np.zeros(n_c - y_c)])
            )
            weight_parts.append(np.full(n_c, 1.0 / prob))
            strata_parts.extend([f"s{s}"] * n_c)
            cluster_parts.extend([f"c{c}"] * n_c)
            area_parts.extend(
                [geography.area_names[frame.area[c]]] * n_c
            )
    return SurveyDataset.from_arrays(
        response=np.concatenate(resp_parts),
        weight=np.concatenate(weight_parts),
        strata=strata_parts,
        clusters=cluster_parts,
        unit_areas=area_parts,
        areas=list(geography.area_names),
    )


# ---- metrics ----


@dataclass(frozen=True)
class Metrics:
    """Area-averaged error and interval metrics for one replication."""

    rmse: float
    mae: float
    cov90: float
    mil: float

    def __post_init__(self):
        if not (0.0 <= self.cov90 <= 1.0):
            raise ValidationError("coverage must lie in [0,1]")
        if min(self.rmse, self.mae, self.mil) < 0:
            raise ValidationError("metrics must be nonnegative")

    def as_array(self) -> np.ndarray:
        return np.array([self.rmse, self.mae, self.cov90, self.mil])


def compute_metrics(estimates: AreaEstimates, truth) -> Metrics:
    """RMSE, MAE, open-interval 90% coverage, and mean interval length.

    Undefined intervals (possible for the direct estimator at degenerate
    areas) count as non-covering with length zero.
    """
    truth = np.asarray(truth, dtype=np.float64)
    if truth.shape != (estimates.n_areas,):
        raise ValidationError(
            f"truth covers {truth.shape} but estimates cover "
            f"{estimates.n_areas} areas"
        )
    if np.any(~np.isfinite(estimates.point)):
        raise ValidationError("point estimates must be finite for metrics")
    err = estimates.point - truth
    ok = estimates.defined
    covered = np.zeros(estimates.n_areas, dtype=bool)
    covered[ok] = (truth[ok] > estimates.lower[ok]) & (
        truth[ok] < estimates.upper[ok]
    )
    length = np.where(ok, estimates.interval_length, 0.0)
    return Metrics(
        rmse=float(np.sqrt(np.mean(err**2))),
        mae=float(np.mean(np.abs(err))),
        cov90=float(np.mean(covered)),
        mil=float(np.mean(length)),
    )


# ---- benchmark orchestration ----


@dataclass(frozen=True)
class ScenarioConfig:
    """One benchmark scenario: generating model plus design intensity."""

    label: str
    mu: float
    geography: GeographyConfig = field(default_factory=GeographyConfig)
    clusters_sampled: int = 8
    n_replications: int = 100
    coefficients: tuple = GENERATING_COEFFICIENTS
    sigma_area: float = 0.25
    sigma_cluster: float = 0.5
    mean_cluster_size: float = 10.0

    def __post_init__(self):
        if not (0.0 < self.mu < 1.0):
            raise ValidationError("scenario mu must be in (0,1)")
        if self.n_replications < 1 or self.clusters_sampled < 1:
            raise ValidationError("replications and clusters_sampled must be >= 1")


_SCENARIO_PRESETS = {
    "mu01": dict(mu=0.1, clusters_sampled=8),
    "mu05": dict(mu=0.5, clusters_sampled=8),
    "large_sample": dict(mu=0.5, clusters_sampled=25),
}


def make_scenario(
    label: str, *, n_replications: int = 100, geography: GeographyConfig | None = None
) -> ScenarioConfig:
    """Preset scenarios; ``large_sample`` raises the per-stratum take to 25."""
    if label not in _SCENARIO_PRESETS:
        raise ValidationError(
            f"unknown scenario {label!r}; choose from {sorted(_SCENARIO_PRESETS)}"
        )
    return ScenarioConfig(
        label=label,
        geography=geography if geography is not None else paper_geography(),
        n_replications=n_replications,
        **_SCENARIO_PRESETS[label],
    )


_SCENARIO_KEYS = {
    "label",
    "mu",
    "clusters_sampled",
    "n_replications",
    "coefficients",
    "sigma_area",
    "sigma_cluster",
    "mean_cluster_size",
}
_GEOGRAPHY_KEYS = {
    "grid",
    "n_areas",
    "clusters_per_stratum",
    "n_single_stratum",
    "admin2_per_area",
    "pop_mean",
    "pop_log_sd",
    "matern_range",
}


def scenario_from_dict(payload: dict) -> ScenarioConfig:
    """Build a scenario from parsed JSON; unknown keys are rejected."""
    if not isinstance(payload, dict):
        raise ValidationError("scenario config must be a JSON object")
    payload = dict(payload)
    geo_kwargs = {}
    for key in list(payload):
        if key in _GEOGRAPHY_KEYS:
            geo_kwargs[key] = payload.pop(key)
    unknown = set(payload) - _SCENARIO_KEYS
    if unknown:
        raise ValidationError(f"unknown scenario config keys: {sorted(unknown)}")
    label = payload.pop("label", "custom")
    if label in _SCENARIO_PRESETS:
        # preset supplies mu and design intensity; the rest may override
        merged = dict(_SCENARIO_PRESETS[label])
        merged.update(payload)
        payload = merged
    if "mu" not in payload:
        raise ValidationError("scenario config needs mu (or a preset label)")
    if "coefficients" in payload:
        payload["coefficients"] = tuple(float(c) for c in payload["coefficients"])
    geography = GeographyConfig(**geo_kwargs) if geo_kwargs else paper_geography()
    return ScenarioConfig(label=label, geography=geography, **payload)


@dataclass(eq=False)
class BenchmarkResult:
    """Aggregated benchmark metrics plus per-replication detail."""

    scenario: ScenarioConfig
    seed: int
    methods: tuple
    metrics: dict
    per_replication: dict
    n_requested: int
    n_completed: int
    failures: list

    def metric_table(self) -> np.ndarray:
        """(methods, 4) array in METHOD_ORDER: rmse, mae, cov90, mil."""
        return np.array([
            [self.metrics[m][k] for k in ("rmse", "mae", "cov90", "mil")]
            for m in self.methods
        ])


def _fit_variant(direct, design, q_star, spatial, js, sampler_config, seed):
    config = ModelConfig(
        design_matrix=design, spatial=spatial, smooth_variance=js
    )
    density = PosteriorDensity(
        config, ModelData(direct=direct, q_star=q_star if spatial else None)
    )
    samples = run_chains(
        density.value_and_grad,
        density.dim,
        replace(sampler_config, seed=seed),
        parameter_names=density.parameter_names,
    )
    return summarize_areas(samples, density), samples


def _one_replication(scenario, frame, q_star, sampler_config, child) -> dict:
    """Population -> sample -> estimates -> metrics for every method."""
    streams = child.spawn(5)
    rng = np.random.default_rng(streams[0])
    population = draw_population(
        frame,
        scenario.mu,
        rng,
        coefficients=scenario.coefficients,
        sigma_area=scenario.sigma_area,
        sigma_cluster=scenario.sigma_cluster,
        mean_cluster_size=scenario.mean_cluster_size,
    )
    dataset = sample_survey(population, scenario.clusters_sampled, rng)
    direct = direct_estimates(dataset)
    truth = population.p_true

    out = {"Hajek": compute_metrics(hajek_intervals(direct), truth).as_array()}
    design = np.ones((frame.geography.n_areas, 1))
    variants = [
        ("Unmatched MS", False, False),
        ("Spatial Unmatched MS", True, False),
        ("Unmatched JS", False, True),
        ("Spatial Unmatched JS", True, True),
    ]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for (label, spatial, js), stream in zip(variants, streams[1:]):
            seed = int(stream.generate_state(1, dtype=np.uint64)[0])
            estimates, _ = _fit_variant(
                direct, design, q_star, spatial, js, sampler_config, seed
            )
            out[label] = compute_metrics(estimates, truth).as_array()
    return out


def run_benchmark(
    scenario: ScenarioConfig,
    n_replications: int | None = None,
    seed: int = 0,
    sampler_config: SamplerConfig | None = None,
    *,
    workers: int = 1,
) -> BenchmarkResult:
    """Run the full estimator comparison over repeated populations.

    Geography and the covariate frame are built once from their own seed
    substreams; each replication then draws its population, sample, and
    model fits from an independent substream, so the aggregate is
    reproducible bit for bit at any ``workers`` setting.  A replication
    whose MCMC fails is recorded in ``failures`` and excluded from the
    averages.
    """
    reps = scenario.n_replications if n_replications is None else int(n_replications)
    if reps < 1:
        raise ValidationError("need at least one replication")
    if sampler_config is None:
        sampler_config = SamplerConfig(n_chains=4, n_warmup=500, n_samples=500)

    root = np.random.SeedSequence(seed)
    children = root.spawn(2 + reps)
    geography = generate_geography(scenario.geography, np.random.default_rng(children[0]))
    frame = draw_covariates(geography, np.random.default_rng(children[1]))
    q_star = scaled_icar_from_edges(geography.area_edges, geography.area_names)

    def job(r):
        try:
            return r, _one_replication(
                scenario, frame, q_star, sampler_config, children[2 + r]
            ), None
        except SamplingError as err:
            return r, None, f"replication {r}: {err}"

    if workers > 1:
        results = Parallel(n_jobs=workers)(delayed(job)(r) for r in range(reps))
    else:
        results = [job(r) for r in range(reps)]

    failures = [msg for _, _, msg in results if msg is not None]
    rows = {m: [] for m in METHOD_ORDER}
    for _, rep, msg in results:
        if msg is None:
            for m in METHOD_ORDER:
                rows[m].append(rep[m])
    n_completed = len(rows[METHOD_ORDER[0]])
    if n_completed == 0:
        raise SamplingError("every replication failed; nothing to aggregate")
    per_replication = {m: np.vstack(rows[m]) for m in METHOD_ORDER}
    metrics = {
        m: dict(zip(("rmse", "mae", "cov90", "mil"), per_replication[m].mean(axis=0)))
        for m in METHOD_ORDER
    }
    return BenchmarkResult(
        scenario=scenario,
        seed=seed,
        methods=METHOD_ORDER,
        metrics=metrics,
        per_replication=per_replication,
        n_requested=reps,
        n_completed=n_completed,
        failures=failures,
    )


def benchmark_csv(result: BenchmarkResult) -> str:
    """Comparison table, every metric scaled by 100 as in the write-up."""
    lines = ["method,rmse_x100,mae_x100,cov90_x100,mil_x100"]
    for m in result.methods:
        row = result.metrics[m]
        cells = [
            format(100.0 * row[k], ".6g") for k in ("rmse", "mae", "cov90", "mil")
        ]
        lines.append(",".join([m, *cells]))
    return "\n".join(lines) + "\n"
