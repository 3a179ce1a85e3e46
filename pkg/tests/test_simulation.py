"""Tests for the synthetic-population benchmark machinery."""

import math
from collections import deque
from dataclasses import replace

import numpy as np
import pytest
from scipy.special import expit, kv

from saesmooth.errors import SamplingError, ValidationError
from saesmooth.sampler import SamplerConfig
from saesmooth.simulation import (
    METHOD_ORDER,
    BenchmarkResult,
    GeographyConfig,
    Metrics,
    Population,
    ScenarioConfig,
    benchmark_csv,
    compute_metrics,
    draw_covariates,
    draw_population,
    generate_geography,
    make_scenario,
    paper_geography,
    run_benchmark,
    sample_survey,
    scenario_from_dict,
)
from saesmooth.simulation import _systematic_pps, _draw_matern_blocks
from saesmooth.summary import AreaEstimates, hajek_intervals
from saesmooth.survey import direct_estimates


def small_config(**overrides) -> GeographyConfig:
    defaults = dict(grid=24, n_areas=4, clusters_per_stratum=40, admin2_per_area=3)
    defaults.update(overrides)
    return GeographyConfig(**defaults)


@pytest.fixture(scope="module")
def small_geography():
    return generate_geography(small_config(), np.random.default_rng(5))


@pytest.fixture(scope="module")
def small_frame(small_geography):
    return draw_covariates(small_geography, np.random.default_rng(6))


@pytest.fixture(scope="module")
def paper_frame():
    geography = generate_geography(paper_geography(), np.random.default_rng(1))
    return draw_covariates(geography, np.random.default_rng(2))


def label_is_contiguous(labels: np.ndarray, grid: int, value: int) -> bool:
    """BFS over the 4-neighbor grid restricted to one label."""
    cells = np.flatnonzero(labels == value)
    member = np.zeros(grid * grid, dtype=bool)
    member[cells] = True
    seen = {int(cells[0])}
    queue = deque(seen)
    while queue:
        p = queue.popleft()
        r, c = divmod(p, grid)
        for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            q = rr * grid + cc
            if 0 <= rr < grid and 0 <= cc < grid and member[q] and q not in seen:
                seen.add(q)
                queue.append(q)
    return len(seen) == cells.size


# ---- geography ----


def test_small_partition_shape(small_geography):
    geo = small_geography
    assert geo.n_areas == 4
    assert geo.n_strata == 8
    assert geo.area_of.min() == 0 and geo.area_of.max() == 3
    assert np.all(geo.stratum_of >= 0)
    assert np.all(geo.admin2_of >= 0)
    # two strata per area, both mapping back to it
    for a in range(4):
        strata = np.unique(geo.stratum_of[geo.area_of == a])
        assert strata.size == 2
        assert np.all(geo.stratum_area[strata] == a)


def test_areas_are_contiguous(small_geography):
    for a in range(small_geography.n_areas):
        assert label_is_contiguous(small_geography.area_of, 24, a)


def test_admin2_contiguous_and_nested(small_geography):
    geo = small_geography
    n_admin2 = int(geo.admin2_of.max()) + 1
    assert n_admin2 == 4 * 3
    for d in range(n_admin2):
        assert label_is_contiguous(geo.admin2_of, 24, d)
        areas = np.unique(geo.area_of[geo.admin2_of == d])
        assert areas.size == 1


def test_total_population_is_pixel_sum(small_geography):
    assert small_geography.total_population == small_geography.population.sum()
    assert np.all(small_geography.population >= 1)


def test_single_stratum_area_is_densest():
    cfg = small_config(n_single_stratum=1)
    geo = generate_geography(cfg, np.random.default_rng(9))
    assert geo.n_strata == 7
    counts = np.bincount(geo.stratum_area, minlength=4)
    single_area = int(np.flatnonzero(counts == 1)[0])
    density = np.array(
        [geo.population[geo.area_of == a].mean() for a in range(4)]
    )
    assert single_area == int(np.argmax(density))


def test_geography_determinism():
    cfg = small_config()
    a = generate_geography(cfg, np.random.default_rng(3))
    b = generate_geography(cfg, np.random.default_rng(3))
    assert np.array_equal(a.population, b.population)
    assert np.array_equal(a.area_of, b.area_of)
    assert np.array_equal(a.stratum_of, b.stratum_of)
    assert np.array_equal(a.admin2_of, b.admin2_of)
    assert a.area_edges == b.area_edges


def test_infeasible_partition_rejected():
    cfg = small_config(clusters_per_stratum=500)
    with pytest.raises(ValidationError, match="stratum"):
        generate_geography(cfg, np.random.default_rng(0))


def test_config_validation():
    with pytest.raises(ValidationError):
        GeographyConfig(grid=3, n_areas=8)
    with pytest.raises(ValidationError):
        GeographyConfig(n_single_stratum=9, n_areas=8)
    with pytest.raises(ValidationError):
        GeographyConfig(pop_mean=-1.0)


def test_paper_scale_counts(paper_frame):
    geo = paper_frame.geography
    assert geo.n_areas == 37
    assert geo.n_strata == 73
    assert paper_frame.n_clusters == 73 * 300


# ---- cluster frame and covariates ----


def test_frame_locations_unique_and_consistent(small_frame):
    frame = small_frame
    geo = frame.geography
    assert np.unique(frame.pixel).size == frame.n_clusters
    assert np.array_equal(frame.area, geo.area_of[frame.pixel])
    assert np.array_equal(frame.stratum, geo.stratum_of[frame.pixel])
    counts = np.bincount(frame.stratum, minlength=geo.n_strata)
    assert np.all(counts == geo.config.clusters_per_stratum)


def test_binary_covariate_means(paper_frame):
    x = paper_frame.covariates
    n = paper_frame.n_clusters
    # Bernoulli(0.5); three Monte Carlo standard errors
    assert abs(x[:, 0].mean() - 0.5) < 3 * math.sqrt(0.25 / n)
    # success probability ramps with 1-based area index
    a_count = paper_frame.geography.n_areas
    for a in range(a_count):
        mask = paper_frame.area == a
        target = 0.3 + 0.5 * (a + 1) / a_count
        se = math.sqrt(target * (1 - target) / mask.sum())
        assert abs(x[mask, 1].mean() - target) < 4.5 * se


def test_area_icar_covariate_structure(paper_frame):
    x3 = paper_frame.covariates[:, 2]
    area_values = np.empty(paper_frame.geography.n_areas)
    for a in range(paper_frame.geography.n_areas):
        vals = np.unique(x3[paper_frame.area == a])
        assert vals.size == 1
        area_values[a] = vals[0]
    assert abs(area_values.sum()) < 1e-8
    assert area_values.std() > 0.1


def test_area_icar_variance_mc(small_geography):
    # geometric mean marginal variance of the scaled field is one
    draws = []
    for k in range(300):
        frame = draw_covariates(small_geography, np.random.default_rng(1000 + k))
        x3 = frame.covariates[:, 2]
        draws.append([x3[frame.area == a][0] for a in range(4)])
    per_area_var = np.var(np.asarray(draws), axis=0)
    assert abs(np.mean(np.log(per_area_var))) < 0.25


def test_admin2_covariate_structure(small_frame):
    x4 = small_frame.covariates[:, 3]
    admin2 = small_frame.geography.admin2_of[small_frame.pixel]
    values = {}
    for d, v in zip(admin2, x4):
        values.setdefault(int(d), set()).add(round(float(v), 12))
    assert all(len(vs) == 1 for vs in values.values())
    assert len(values) > 4
    flat = [next(iter(vs)) for vs in values.values()]
    assert np.std(flat) > 0.05


def test_matern_field_variogram_oracle():
    # fixed locations, repeated draws, empirical covariance at three lags
    rng = np.random.default_rng(12)
    coords = rng.random((150, 2))
    blocks = np.zeros(150, dtype=np.int64)
    rho = 0.25 * math.sqrt(2.0)
    reps = np.vstack([
        _draw_matern_blocks(coords, blocks, rho, np.random.default_rng(2000 + k))
        for k in range(800)
    ])
    d = np.sqrt(np.sum((coords[:, None] - coords[None, :]) ** 2, axis=-1))
    emp = reps.T @ reps / reps.shape[0]
    for lo, hi in [(0.08, 0.12), (0.18, 0.22), (0.33, 0.37)]:
        mask = (d > lo) & (d < hi)
        x = math.sqrt(2.0) * d[mask] / rho
        theory = np.mean(x * kv(1.0, x))
        assert abs(emp[mask].mean() - theory) < 0.05
    var = np.mean(np.diag(emp))
    assert abs(var - 1.0) < 0.1


def test_covariate_determinism(small_geography):
    a = draw_covariates(small_geography, np.random.default_rng(4))
    b = draw_covariates(small_geography, np.random.default_rng(4))
    assert np.array_equal(a.pixel, b.pixel)
    assert np.array_equal(a.covariates, b.covariates)


# ---- population draws ----


def test_zero_signal_risks(small_frame):
    pop = draw_population(
        small_frame,
        0.5,
        np.random.default_rng(0),
        coefficients=(0.0,) * 5,
        sigma_area=0.0,
        sigma_cluster=0.0,
    )
    assert np.all(pop.risk == 0.5)
    assert abs(pop.p_true.mean() - 0.5) < 0.05


def test_p_true_matches_census_recount(small_frame):
    pop = draw_population(small_frame, 0.2, np.random.default_rng(8))
    for a in range(4):
        mask = small_frame.area == a
        assert pop.p_true[a] == pop.positives[mask].sum() / pop.size[mask].sum()


def test_cluster_size_poisson_mean(paper_frame):
    pop = draw_population(paper_frame, 0.1, np.random.default_rng(3))
    n = paper_frame.n_clusters
    assert abs(pop.size.mean() - 10.0) < 3 * math.sqrt(10.0 / n)


def test_prevalence_logit_normal_oracle(small_frame):
    mu, reps = 0.1, 25
    prevalences = np.array([
        (lambda p: p.positives.sum() / p.size.sum())(
            draw_population(small_frame, mu, np.random.default_rng(500 + k))
        )
        for k in range(reps)
    ])
    # direct Monte Carlo of E[expit(logit(mu) + x'beta + u + v)]
    rng = np.random.default_rng(99)
    rows = rng.integers(0, small_frame.n_clusters, size=400_000)
    shift = small_frame.covariates[rows] @ np.array([0.25, -0.25, 0.5, 0.25, 0.25])
    eta = (
        math.log(mu / (1 - mu))
        + shift
        + rng.normal(0.0, 0.25, rows.size)
        + rng.normal(0.0, 0.5, rows.size)
    )
    oracle = expit(eta).mean()
    se = prevalences.std(ddof=1) / math.sqrt(reps)
    assert abs(prevalences.mean() - oracle) < 3 * se + 0.003


def test_population_validation(small_frame):
    with pytest.raises(ValidationError, match="mu"):
        draw_population(small_frame, 1.0, np.random.default_rng(0))
    with pytest.raises(ValidationError, match="coefficients"):
        draw_population(
            small_frame, 0.5, np.random.default_rng(0), coefficients=(1.0, 2.0)
        )


# ---- survey sampling ----


def constant_size_population(frame, size=10, mu=0.3, seed=0) -> Population:
    pop = draw_population(frame, mu, np.random.default_rng(seed))
    sizes = np.full(frame.n_clusters, size)
    positives = np.minimum(pop.positives, size)
    totals = np.bincount(frame.area, weights=sizes, minlength=4)
    hits = np.bincount(frame.area, weights=positives, minlength=4)
    return replace(
        pop, size=sizes, positives=positives, p_true=hits / totals
    )


def test_equal_frame_measures_give_equal_weights():
    # flatten the frame's measure of size; every cluster then has pi = m / K
    geography = generate_geography(small_config(), np.random.default_rng(5))
    geography.population = np.ones_like(geography.population)
    frame = draw_covariates(geography, np.random.default_rng(6))
    pop = constant_size_population(frame)
    ds = sample_survey(pop, 8, np.random.default_rng(1))
    weights = {u.weight for u in ds.units}
    assert len(weights) == 1
    assert math.isclose(weights.pop(), 40 / 8)


def pps_inclusion_oracle(measure: np.ndarray, m: int) -> np.ndarray:
    """Inclusion probabilities with the certainty-selection rule applied."""
    measure = measure.astype(float).copy()
    pi = np.full(measure.size, np.nan)
    pool = np.ones(measure.size, dtype=bool)
    while True:
        over = pool & (measure >= measure[pool].sum() / m)
        if not over.any():
            break
        pi[over] = 1.0
        m -= int(over.sum())
        pool &= ~over
    pi[pool] = m * measure[pool] / measure[pool].sum()
    return pi


def test_sampled_weights_are_inverse_inclusion(small_frame):
    pop = draw_population(small_frame, 0.3, np.random.default_rng(2))
    ds = sample_survey(pop, 8, np.random.default_rng(3))
    # inclusion probabilities come from the frame's listed pixel populations
    measure = small_frame.geography.population[small_frame.pixel].astype(float)
    pi = np.full(measure.size, np.nan)
    for s in range(small_frame.geography.n_strata):
        members = small_frame.stratum == s
        pi[members] = pps_inclusion_oracle(measure[members], 8)
    seen = set()
    for u in ds.units:
        c = int(u.cluster_id[1:])
        seen.add(c)
        assert math.isclose(u.weight, 1.0 / pi[c], rel_tol=1e-12)
    assert len(seen) == 8 * small_frame.geography.n_strata


def test_oversized_cluster_becomes_certainty_selection():
    from saesmooth.simulation import _pps_sample

    measure = np.array([500.0] + [1.0] * 30)
    hits = np.zeros(31)
    rng = np.random.default_rng(12)
    for _ in range(2000):
        chosen, pi = _pps_sample(measure, 3, rng)
        assert 0 in chosen and pi[list(chosen).index(0)] == 1.0
        assert chosen.size == 3
        hits[chosen] += 1
    # the two non-certainty slots spread evenly over the thirty small ones
    assert hits[0] == 2000
    freq = hits[1:] / 2000
    assert np.all(np.abs(freq - 2 / 30) < 0.02)


def test_take_all_second_stage(small_frame):
    pop = draw_population(small_frame, 0.3, np.random.default_rng(4))
    ds = sample_survey(pop, 8, np.random.default_rng(5))
    per_cluster = {}
    for u in ds.units:
        c = int(u.cluster_id[1:])
        n, y = per_cluster.get(c, (0, 0))
        per_cluster[c] = (n + 1, y + int(u.response))
    assert len(per_cluster) == 8 * small_frame.geography.n_strata
    for c, (n, y) in per_cluster.items():
        assert n == pop.size[c]
        assert y == pop.positives[c]


def test_census_estimator_recovers_truth_exactly(small_frame):
    pop = draw_population(small_frame, 0.3, np.random.default_rng(7))
    ds = sample_survey(pop, rng=np.random.default_rng(8), census=True)
    direct = direct_estimates(ds)
    np.testing.assert_array_equal(direct.p_hat, pop.p_true)


def test_inclusion_probability_oracle():
    # systematic PPS inclusion frequencies match m * size / total
    sizes = np.arange(4.0, 16.0)
    m = 3
    target = m * sizes / sizes.sum()
    rng = np.random.default_rng(123)
    counts = np.zeros(sizes.size)
    reps = 300_000
    for _ in range(reps):
        counts[_systematic_pps(sizes, m, rng)] += 1
    freq = counts / reps
    assert np.all(np.abs(freq - target) / target < 0.02)


def test_pps_rejects_oversized_cluster():
    sizes = np.array([100.0, 1.0, 1.0, 1.0])
    with pytest.raises(ValidationError, match="interval"):
        _systematic_pps(sizes, 2, np.random.default_rng(0))


def test_stratum_too_small_rejected(small_frame):
    pop = draw_population(small_frame, 0.3, np.random.default_rng(9))
    with pytest.raises(ValidationError, match="cannot[\\s\\S]*sample|interval"):
        sample_survey(pop, 41, np.random.default_rng(0))


def test_survey_determinism(small_frame):
    pop = draw_population(small_frame, 0.3, np.random.default_rng(10))
    a = sample_survey(pop, 8, np.random.default_rng(11))
    b = sample_survey(pop, 8, np.random.default_rng(11))
    assert [
        (u.response, u.weight, u.stratum_id, u.cluster_id, u.area_id) for u in a.units
    ] == [(u.response, u.weight, u.stratum_id, u.cluster_id, u.area_id) for u in b.units]


def test_hajek_coverage_improves_with_sample_size(small_frame):
    # the design-based interval approaches nominal as clusters per stratum grow
    def coverage(m, reps=60):
        hits = total = 0
        for k in range(reps):
            pop = draw_population(small_frame, 0.3, np.random.default_rng(3000 + k))
            ds = sample_survey(pop, m, np.random.default_rng(6000 + k))
            est = hajek_intervals(direct_estimates(ds))
            ok = est.defined
            hits += int(
                np.sum(
                    (pop.p_true[ok] > est.lower[ok])
                    & (pop.p_true[ok] < est.upper[ok])
                )
            )
            total += int(ok.sum())
        return hits / total

    low, high = coverage(4), coverage(12)
    assert abs(high - 0.9) <= abs(low - 0.9) + 0.02


# ---- metrics ----


def make_estimates(point, lower, upper, defined=None) -> AreaEstimates:
    point = np.asarray(point, dtype=np.float64)
    names = tuple(f"a{i}" for i in range(point.size))
    return AreaEstimates(
        areas=names,
        method="test",
        point=point,
        lower=np.asarray(lower, dtype=np.float64),
        upper=np.asarray(upper, dtype=np.float64),
        defined=None if defined is None else np.asarray(defined, dtype=bool),
    )


def test_metrics_forced_arithmetic():
    est = make_estimates([0.2, 0.5], [0.1, 0.4], [0.3, 0.8])
    m = compute_metrics(est, [0.25, 0.45])
    assert math.isclose(m.rmse, math.sqrt((0.05**2 + 0.05**2) / 2))
    assert math.isclose(m.mae, 0.05)
    assert m.cov90 == 1.0
    assert math.isclose(m.mil, (0.2 + 0.4) / 2)


def test_metrics_open_interval_boundary():
    est = make_estimates([0.2], [0.1], [0.3])
    assert compute_metrics(est, [0.1]).cov90 == 0.0
    assert compute_metrics(est, [0.3]).cov90 == 0.0
    assert compute_metrics(est, [0.10001]).cov90 == 1.0
    # degenerate zero-width interval can never cover
    degenerate = make_estimates([0.2], [0.2], [0.2])
    assert compute_metrics(degenerate, [0.2]).cov90 == 0.0


def test_metrics_undefined_interval_counts_zero():
    est = make_estimates(
        [0.0, 0.5], [np.nan, 0.4], [np.nan, 0.6], defined=[False, True]
    )
    m = compute_metrics(est, [0.0, 0.5])
    assert m.cov90 == 0.5
    assert math.isclose(m.mil, 0.1)
    assert math.isclose(m.mae, 0.0)


def test_metrics_resummation_oracle():
    rng = np.random.default_rng(77)
    p = rng.random(12) * 0.5 + 0.2
    half = rng.random(12) * 0.1
    truth = rng.random(12) * 0.5 + 0.2
    est = make_estimates(p, np.maximum(p - half, 0), np.minimum(p + half, 1))
    m = compute_metrics(est, truth)
    rmse = math.sqrt(sum((a - b) ** 2 for a, b in zip(p, truth)) / 12)
    mae = sum(abs(a - b) for a, b in zip(p, truth)) / 12
    cov = sum(
        1 for a, lo, hi in zip(truth, est.lower, est.upper) if lo < a < hi
    ) / 12
    mil = sum(hi - lo for lo, hi in zip(est.lower, est.upper)) / 12
    assert math.isclose(m.rmse, rmse)
    assert math.isclose(m.mae, mae)
    assert math.isclose(m.cov90, cov)
    assert math.isclose(m.mil, mil)


def test_metrics_permutation_invariance():
    rng = np.random.default_rng(42)
    p = rng.random(9)
    lo = np.maximum(p - 0.05, 0)
    hi = np.minimum(p + 0.08, 1)
    truth = rng.random(9)
    base = compute_metrics(make_estimates(p, lo, hi), truth)
    perm = rng.permutation(9)
    shuffled = compute_metrics(
        make_estimates(p[perm], lo[perm], hi[perm]), truth[perm]
    )
    assert base == shuffled


def test_metrics_validation():
    est = make_estimates([0.2, 0.3], [0.1, 0.2], [0.3, 0.4])
    with pytest.raises(ValidationError, match="truth"):
        compute_metrics(est, [0.5])
    with pytest.raises(ValidationError):
        Metrics(rmse=0.1, mae=0.1, cov90=1.5, mil=0.1)
    with pytest.raises(ValidationError):
        Metrics(rmse=-0.1, mae=0.1, cov90=0.5, mil=0.1)


# ---- scenarios and the benchmark loop ----


def test_scenario_presets():
    mu01 = make_scenario("mu01")
    mu05 = make_scenario("mu05")
    big = make_scenario("large_sample")
    assert (mu01.mu, mu05.mu, big.mu) == (0.1, 0.5, 0.5)
    assert (mu01.clusters_sampled, big.clusters_sampled) == (8, 25)
    assert mu01.geography.n_strata == 73
    with pytest.raises(ValidationError, match="unknown scenario"):
        make_scenario("mu99")


def test_scenario_from_dict_roundtrip():
    scen = scenario_from_dict({"label": "mu05", "n_replications": 7})
    assert scen.mu == 0.5 and scen.n_replications == 7
    custom = scenario_from_dict(
        {"mu": 0.25, "grid": 24, "n_areas": 4, "clusters_per_stratum": 40}
    )
    assert custom.geography.n_areas == 4
    with pytest.raises(ValidationError, match="unknown"):
        scenario_from_dict({"mu": 0.2, "bogus": 1})
    with pytest.raises(ValidationError, match="mu"):
        scenario_from_dict({"n_replications": 5})
    with pytest.raises(ValidationError, match="object"):
        scenario_from_dict([1, 2])


def tiny_scenario(reps=2) -> ScenarioConfig:
    return ScenarioConfig(
        label="tiny",
        mu=0.3,
        geography=small_config(),
        clusters_sampled=8,
        n_replications=reps,
    )


@pytest.fixture(scope="module")
def tiny_benchmark():
    config = SamplerConfig(n_chains=2, n_warmup=150, n_samples=150)
    return run_benchmark(tiny_scenario(), seed=11, sampler_config=config)


def test_benchmark_shape_and_rows(tiny_benchmark):
    res = tiny_benchmark
    assert res.methods == METHOD_ORDER
    assert res.n_completed == 2 and res.n_requested == 2
    assert res.failures == []
    for method in METHOD_ORDER:
        row = res.metrics[method]
        assert set(row) == {"rmse", "mae", "cov90", "mil"}
        assert all(np.isfinite(v) for v in row.values())
        assert 0.0 <= row["cov90"] <= 1.0
        assert res.per_replication[method].shape == (2, 4)
    table = res.metric_table()
    assert table.shape == (5, 4)


def test_benchmark_reproducible_across_workers(tiny_benchmark):
    config = SamplerConfig(n_chains=2, n_warmup=150, n_samples=150)
    again = run_benchmark(tiny_scenario(), seed=11, sampler_config=config, workers=2)
    for method in METHOD_ORDER:
        np.testing.assert_array_equal(
            tiny_benchmark.per_replication[method], again.per_replication[method]
        )


def test_benchmark_csv_format(tiny_benchmark):
    text = benchmark_csv(tiny_benchmark)
    lines = text.strip().split("\n")
    assert lines[0] == "method,rmse_x100,mae_x100,cov90_x100,mil_x100"
    assert len(lines) == 6
    assert [ln.split(",")[0] for ln in lines[1:]] == list(METHOD_ORDER)
    hajek = lines[1].split(",")
    assert float(hajek[1]) == pytest.approx(
        100 * tiny_benchmark.metrics["Hajek"]["rmse"], rel=1e-4
    )


def test_benchmark_failure_accounting(monkeypatch):
    import saesmooth.simulation as sim

    real = sim._one_replication
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 1:
            raise SamplingError("synthetic failure")
        return real(*args, **kwargs)

    monkeypatch.setattr(sim, "_one_replication", flaky)
    config = SamplerConfig(n_chains=1, n_warmup=100, n_samples=100)
    res = run_benchmark(tiny_scenario(), seed=11, sampler_config=config)
    assert res.n_completed == 1
    assert len(res.failures) == 1 and "synthetic failure" in res.failures[0]
    for method in METHOD_ORDER:
        assert res.per_replication[method].shape == (1, 4)


def test_benchmark_replication_override():
    with pytest.raises(ValidationError):
        run_benchmark(tiny_scenario(), n_replications=0, seed=1)


def test_scenario_validation():
    with pytest.raises(ValidationError):
        ScenarioConfig(label="x", mu=1.5)
    with pytest.raises(ValidationError):
        ScenarioConfig(label="x", mu=0.5, n_replications=0)
