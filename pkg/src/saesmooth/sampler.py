"""Adaptive gradient-based MCMC engine with convergence diagnostics.

The main algorithm is dynamic-trajectory Hamiltonian Monte Carlo: each
iteration grows a leapfrog trajectory by doubling until a U-turn criterion
fires (checked across the whole trajectory and across merged subtrees), then
draws the next state from the trajectory by multinomial weighting.  Warmup
adapts the step size by dual averaging and a diagonal mass matrix over
doubling estimation windows.  An adaptive random-walk Metropolis fallback is
selectable for debugging targets whose gradients are suspect.

A target density is any callable ``x -> (log_density, gradient)`` on an
unconstrained real vector.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConvergenceWarning, SamplingError, ValidationError

__all__ = [
    "SamplerConfig",
    "PosteriorSamples",
    "run_chains",
    "split_rhat",
    "effective_sample_size",
    "sampler_config_from_dict",
]

# dual averaging constants (shrinkage target scale, damping, decay)
DA_GAMMA = 0.05
DA_T0 = 10.0
DA_KAPPA = 0.75

# warmup schedule: step-size-only buffers around doubling mass windows
INIT_BUFFER = 75
TERM_BUFFER = 50
BASE_WINDOW = 25

_LOG_TWO = math.log(2.0)

_ALGORITHMS = ("nuts", "rwm")


@dataclass
class SamplerConfig:
    """Settings for :func:`run_chains`.

    ``divergence_threshold`` is the energy error above which a leapfrog step
    is labelled divergent; ``init_radius`` bounds the uniform jitter used to
    draw starting points in unconstrained space.
    """

    n_chains: int = 4
    n_warmup: int = 1000
    n_samples: int = 1000
    seed: int = 0
    target_accept: float = 0.8
    max_tree_depth: int = 10
    init_radius: float = 2.0
    max_init_retries: int = 100
    divergence_threshold: float = 1000.0
    algorithm: str = "nuts"

    def __post_init__(self):
        for name in ("n_chains", "n_warmup", "n_samples", "max_tree_depth",
                     "max_init_retries"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ValidationError(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise ValidationError(f"{name} must be positive, got {value}")
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise ValidationError(f"seed must be an integer, got {self.seed!r}")
        if self.seed < 0 or self.seed > 2**64 - 1:
            raise ValidationError("seed must fit in an unsigned 64-bit integer")
        if not 0.0 < self.target_accept < 1.0:
            raise ValidationError(
                f"target_accept must lie in (0, 1), got {self.target_accept}")
        if not self.init_radius >= 0.0:
            raise ValidationError("init_radius must be nonnegative")
        if not self.divergence_threshold > 0.0:
            raise ValidationError("divergence_threshold must be positive")
        if self.algorithm not in _ALGORITHMS:
            raise ValidationError(
                f"algorithm must be one of {_ALGORITHMS}, got {self.algorithm!r}")


def sampler_config_from_dict(obj: dict) -> SamplerConfig:
    """Build a SamplerConfig from a parsed JSON object with strict key checking."""
    if not isinstance(obj, dict):
        raise ValidationError("sampler configuration must be a JSON object")
    allowed = set(SamplerConfig.__dataclass_fields__)
    unknown = set(obj) - allowed
    if unknown:
        raise ValidationError(
            f"unknown sampler configuration keys: {sorted(unknown)}; "
            f"allowed keys are {sorted(allowed)}")
    return SamplerConfig(**obj)


@dataclass
class PosteriorSamples:
    """Post-warmup draws from all chains plus convergence diagnostics.

    ``draws`` has shape (n_chains, n_samples, dim) and never contains warmup
    iterations.  ``rhat`` and ``ess`` are per-parameter arrays aligned with
    ``parameter_names``; both are NaN when too few chains or draws are
    available to estimate them.
    """

    draws: np.ndarray
    parameter_names: tuple
    rhat: np.ndarray
    ess: np.ndarray
    divergence_count: int
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.draws = np.asarray(self.draws, dtype=float)
        if self.draws.ndim != 3:
            raise ValidationError("draws must have shape (chains, iterations, dim)")
        self.parameter_names = tuple(str(n) for n in self.parameter_names)
        if len(self.parameter_names) != self.draws.shape[2]:
            raise ValidationError(
                f"{len(self.parameter_names)} parameter names for "
                f"dimension {self.draws.shape[2]}")
        self.rhat = np.asarray(self.rhat, dtype=float)
        self.ess = np.asarray(self.ess, dtype=float)
        if self.rhat.shape != (self.draws.shape[2],):
            raise ValidationError("rhat must have one entry per parameter")
        if self.ess.shape != (self.draws.shape[2],):
            raise ValidationError("ess must have one entry per parameter")

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_samples(self) -> int:
        return self.draws.shape[1]

    @property
    def dim(self) -> int:
        return self.draws.shape[2]

    def flat(self) -> np.ndarray:
        """All draws pooled across chains, shape (n_chains * n_samples, dim)."""
        return self.draws.reshape(-1, self.dim)

    def to_draws_csv(self, path) -> None:
        """Dump every retained draw, one row per (chain, iteration)."""
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["chain", "iteration", *self.parameter_names])
            for c in range(self.n_chains):
                for i in range(self.n_samples):
                    writer.writerow(
                        [c + 1, i + 1, *(repr(float(v)) for v in self.draws[c, i])])

    def diagnostics_summary(self) -> dict:
        """JSON-serializable diagnostics, including per-parameter R-hat and ESS."""
        summary = dict(self.diagnostics)
        summary["divergence_count"] = int(self.divergence_count)
        summary["rhat"] = {n: float(v) for n, v in zip(self.parameter_names, self.rhat)}
        summary["ess"] = {n: float(v) for n, v in zip(self.parameter_names, self.ess)}
        return summary

    def to_diagnostics_json(self, path) -> None:
        with open(path, "w") as handle:
            json.dump(self.diagnostics_summary(), handle, indent=2, sort_keys=True)
            handle.write("\n")


# ---------------------------------------------------------------------------
# Hamiltonian dynamics


def kinetic_energy(r: np.ndarray, inv_mass: np.ndarray) -> float:
    return 0.5 * float(np.dot(r, inv_mass * r))


def leapfrog(target, x, r, grad, eps, inv_mass):
    """One leapfrog step of size eps; returns (x, r, log_density, gradient)."""
    r_half = r + (0.5 * eps) * grad
    x_new = x + eps * (inv_mass * r_half)
    lp_new, grad_new = target(x_new)
    r_new = r_half + (0.5 * eps) * np.asarray(grad_new, dtype=float)
    return x_new, r_new, float(lp_new), np.asarray(grad_new, dtype=float)


def _energy_shift(lp, r, inv_mass, h0):
    """Log density ratio of a phase point relative to the trajectory start."""
    h = lp - kinetic_energy(r, inv_mass)
    if not math.isfinite(h):
        return -math.inf
    return h - h0


class _Tree:
    """A contiguous trajectory segment tracked during doubling."""

    __slots__ = (
        "x_minus", "r_minus", "grad_minus",
        "x_plus", "r_plus", "grad_plus",
        "r_sum", "logw", "x", "lp", "grad",
        "alpha", "n_alpha", "stop", "diverged",
    )

    def __init__(self, x, r, grad, lp, logw, alpha, n_alpha, stop, diverged):
        self.x_minus = x
        self.r_minus = r
        self.grad_minus = grad
        self.x_plus = x
        self.r_plus = r
        self.grad_plus = grad
        self.r_sum = r
        self.logw = logw
        self.x = x
        self.lp = lp
        self.grad = grad
        self.alpha = alpha
        self.n_alpha = n_alpha
        self.stop = stop
        self.diverged = diverged


def _no_uturn(r_lo, r_hi, rho, inv_mass):
    # momentum at each end of a span must still point along the span's net drift
    return (np.dot(inv_mass * r_lo, rho) > 0.0
            and np.dot(inv_mass * r_hi, rho) > 0.0)


def _combine(old: _Tree, new: _Tree, forward: bool, inv_mass, rng, root: bool) -> _Tree:
    """Merge a freshly built subtree into the tree it extends.

    ``forward`` says whether the new subtree sits later in integration time.
    Root merges (whole-trajectory level) select the proposal with probability
    w_new / w_old, biasing moves away from the start point; within-tree
    merges use plain multinomial weighting w_new / (w_old + w_new).
    """
    old.alpha += new.alpha
    old.n_alpha += new.n_alpha
    old.diverged = old.diverged or new.diverged
    if new.stop:
        old.stop = True
        return old

    denom = old.logw if root else np.logaddexp(old.logw, new.logw)
    shift = new.logw - denom
    prob = math.exp(min(0.0, shift)) if math.isfinite(shift) else 0.0
    if rng.random() < prob:
        old.x, old.lp, old.grad = new.x, new.lp, new.grad
    old.logw = np.logaddexp(old.logw, new.logw)

    # orient the pieces in integration-time order before updating the ends;
    # the interface momenta enter the across-subtree U-turn checks
    if forward:
        left_sum, right_sum = old.r_sum, new.r_sum
        lo_outer, lo_inner = old.r_minus, old.r_plus
        hi_inner, hi_outer = new.r_minus, new.r_plus
        old.x_plus, old.r_plus, old.grad_plus = new.x_plus, new.r_plus, new.grad_plus
    else:
        left_sum, right_sum = new.r_sum, old.r_sum
        lo_outer, lo_inner = new.r_minus, new.r_plus
        hi_inner, hi_outer = old.r_minus, old.r_plus
        old.x_minus, old.r_minus, old.grad_minus = (
            new.x_minus, new.r_minus, new.grad_minus)

    rho = left_sum + right_sum
    old.r_sum = rho
    ok = _no_uturn(lo_outer, hi_outer, rho, inv_mass)
    ok = ok and _no_uturn(lo_outer, hi_inner, left_sum + hi_inner, inv_mass)
    ok = ok and _no_uturn(lo_inner, hi_outer, right_sum + lo_inner, inv_mass)
    old.stop = not ok
    return old


def _build_tree(target, x, r, grad, direction, depth, eps, inv_mass,
                h0, threshold, rng) -> _Tree:
    """Build a subtree of 2**depth leapfrog states beyond the edge (x, r, grad)."""
    if depth == 0:
        x2, r2, lp2, grad2 = leapfrog(target, x, r, grad, direction * eps, inv_mass)
        shift = _energy_shift(lp2, r2, inv_mass, h0)
        diverged = -shift > threshold
        alpha = math.exp(min(0.0, shift))
        return _Tree(x2, r2, grad2, lp2, logw=shift, alpha=alpha, n_alpha=1,
                     stop=diverged, diverged=diverged)

    first = _build_tree(target, x, r, grad, direction, depth - 1, eps, inv_mass,
                        h0, threshold, rng)
    if first.stop:
        return first
    if direction > 0:
        edge = (first.x_plus, first.r_plus, first.grad_plus)
    else:
        edge = (first.x_minus, first.r_minus, first.grad_minus)
    second = _build_tree(target, *edge, direction, depth - 1, eps, inv_mass,
                         h0, threshold, rng)
    return _combine(first, second, direction > 0, inv_mass, rng, root=False)


def _nuts_transition(target, x, lp, grad, eps, inv_mass, rng, max_depth, threshold):
    """One dynamic-trajectory update; returns the new state plus statistics."""
    r0 = rng.standard_normal(x.size) / np.sqrt(inv_mass)
    h0 = lp - kinetic_energy(r0, inv_mass)
    tree = _Tree(x, r0, grad, lp, logw=0.0, alpha=0.0, n_alpha=0,
                 stop=False, diverged=False)
    depth = 0
    while depth < max_depth and not tree.stop:
        direction = 1 if rng.random() < 0.5 else -1
        if direction > 0:
            edge = (tree.x_plus, tree.r_plus, tree.grad_plus)
        else:
            edge = (tree.x_minus, tree.r_minus, tree.grad_minus)
        subtree = _build_tree(target, *edge, direction, depth, eps, inv_mass,
                              h0, threshold, rng)
        tree = _combine(tree, subtree, direction > 0, inv_mass, rng, root=True)
        depth += 1
    accept_stat = tree.alpha / tree.n_alpha if tree.n_alpha else 0.0
    hit_max = depth == max_depth and not tree.stop
    return (tree.x, tree.lp, tree.grad, accept_stat, tree.n_alpha,
            tree.diverged, hit_max)


# ---------------------------------------------------------------------------
# Warmup adaptation


class _DualAveraging:
    """Nesterov dual averaging of log step size toward a target acceptance."""

    def __init__(self, eps0: float, target: float):
        self.mu = math.log(10.0 * eps0)
        self.log_eps = math.log(eps0)
        self.log_eps_bar = 0.0
        self.h_bar = 0.0
        self.count = 0
        self.target = target

    def step(self, accept_stat: float) -> float:
        self.count += 1
        frac = 1.0 / (self.count + DA_T0)
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.target - accept_stat)
        self.log_eps = self.mu - math.sqrt(self.count) / DA_GAMMA * self.h_bar
        decay = self.count ** (-DA_KAPPA)
        self.log_eps_bar = decay * self.log_eps + (1.0 - decay) * self.log_eps_bar
        return math.exp(self.log_eps)

    @property
    def adapted(self) -> float:
        return math.exp(self.log_eps_bar)


class _Welford:
    """Streaming mean and variance for mass-matrix windows."""

    def __init__(self, dim: int):
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def push(self, x: np.ndarray) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def regularized_variance(self) -> np.ndarray:
        # shrink toward a small diagonal so early windows cannot collapse
        n = self.count
        var = self.m2 / (n - 1)
        return (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))


def _adaptation_schedule(n_warmup: int):
    """Start of mass-window collection and the iteration counts closing windows."""
    init_buf, base, term_buf = INIT_BUFFER, BASE_WINDOW, TERM_BUFFER
    if n_warmup < 20:
        return n_warmup, []
    if init_buf + base + term_buf > n_warmup:
        init_buf = int(round(0.15 * n_warmup))
        term_buf = int(round(0.10 * n_warmup))
        base = n_warmup - init_buf - term_buf
    ends = []
    start, size, last = init_buf, base, n_warmup - term_buf
    while start < last:
        end = start + size
        if end + 2 * size >= last:
            end = last
        ends.append(end)
        start, size = end, size * 2
    return init_buf, ends


def _find_reasonable_epsilon(target, x, lp, grad, inv_mass, rng) -> float:
    """Double or halve the step size until one-step acceptance crosses 1/2."""
    eps = 1.0
    r = rng.standard_normal(x.size) / np.sqrt(inv_mass)
    h0 = lp - kinetic_energy(r, inv_mass)

    def shift_at(step):
        _, r2, lp2, _ = leapfrog(target, x, r, grad, step, inv_mass)
        h = lp2 - kinetic_energy(r2, inv_mass)
        return h - h0 if math.isfinite(h) else -math.inf

    shift = shift_at(eps)
    direction = 1 if shift > -_LOG_TWO else -1
    for _ in range(100):
        if direction > 0 and not shift > -_LOG_TWO:
            return eps
        if direction < 0 and not shift < -_LOG_TWO:
            return eps
        eps *= 2.0 ** direction
        if eps > 1e7 or eps < 1e-10:
            raise SamplingError(
                f"no workable leapfrog step size (search reached {eps:.3g})")
        shift = shift_at(eps)
    raise SamplingError("step size search failed to settle after 100 doublings")


# ---------------------------------------------------------------------------
# Chain drivers


def _draw_initial_point(target, dim, config, chain_index, rng):
    lp = -math.inf
    for _ in range(config.max_init_retries):
        x = rng.uniform(-config.init_radius, config.init_radius, dim)
        lp, grad = target(x)
        lp = float(lp)
        grad = np.asarray(grad, dtype=float)
        if math.isfinite(lp) and np.all(np.isfinite(grad)):
            return x, lp, grad
    raise SamplingError(
        f"chain {chain_index}: log density not finite at any of "
        f"{config.max_init_retries} initialization points "
        f"(last log density {lp!r}); the model may be misconfigured")


def _run_chain(target, dim, config: SamplerConfig, chain_index: int, seed_seq):
    rng = np.random.default_rng(seed_seq)
    x, lp, grad = _draw_initial_point(target, dim, config, chain_index, rng)
    if config.algorithm == "rwm":
        return _run_chain_rwm(target, dim, config, rng, x, lp)

    inv_mass = np.ones(dim)
    eps = _find_reasonable_epsilon(target, x, lp, grad, inv_mass, rng)
    # dual averaging runs over all of warmup; only the mass matrix is windowed
    averaging = _DualAveraging(eps, config.target_accept)
    collect_start, window_ends = _adaptation_schedule(config.n_warmup)
    ends = set(window_ends)
    collect_stop = window_ends[-1] if window_ends else 0
    welford = _Welford(dim)
    warmup_div = 0

    for i in range(config.n_warmup):
        x, lp, grad, accept_stat, _, diverged, _ = _nuts_transition(
            target, x, lp, grad, eps, inv_mass, rng,
            config.max_tree_depth, config.divergence_threshold)
        warmup_div += diverged
        eps = averaging.step(accept_stat)
        if collect_start <= i < collect_stop:
            welford.push(x)
        if (i + 1) in ends:
            if welford.count >= 2:
                inv_mass = welford.regularized_variance()
            welford = _Welford(dim)
    eps = averaging.adapted

    draws = np.empty((config.n_samples, dim))
    accept_sum = 0.0
    divergences = 0
    treedepth_hits = 0
    n_leapfrog = 0
    for i in range(config.n_samples):
        x, lp, grad, accept_stat, leaves, diverged, hit_max = _nuts_transition(
            target, x, lp, grad, eps, inv_mass, rng,
            config.max_tree_depth, config.divergence_threshold)
        draws[i] = x
        accept_sum += accept_stat
        divergences += diverged
        treedepth_hits += hit_max
        n_leapfrog += leaves

    return {
        "draws": draws,
        "step_size": float(eps),
        "mean_accept_stat": accept_sum / config.n_samples,
        "divergences": int(divergences),
        "warmup_divergences": int(warmup_div),
        "max_treedepth_hits": int(treedepth_hits),
        "n_leapfrog": int(n_leapfrog),
    }


def _rwm_transition(target, x, lp, scale_vec, rng):
    proposal = x + scale_vec * rng.standard_normal(x.size)
    lp_new, _ = target(proposal)
    lp_new = float(lp_new)
    shift = lp_new - lp if math.isfinite(lp_new) else -math.inf
    accept_prob = math.exp(min(0.0, shift))
    if rng.random() < accept_prob:
        return proposal, lp_new, accept_prob
    return x, lp, accept_prob


def _run_chain_rwm(target, dim, config: SamplerConfig, rng, x, lp):
    """Adaptive random-walk Metropolis fallback (no gradients used)."""
    log_scale = math.log(2.38 / math.sqrt(dim))
    sd = np.ones(dim)
    collect_start, window_ends = _adaptation_schedule(config.n_warmup)
    ends = set(window_ends)
    collect_stop = window_ends[-1] if window_ends else 0
    welford = _Welford(dim)

    for i in range(config.n_warmup):
        x, lp, accept_prob = _rwm_transition(target, x, lp,
                                             math.exp(log_scale) * sd, rng)
        log_scale += (accept_prob - config.target_accept) / math.sqrt(i + 1.0)
        if collect_start <= i < collect_stop:
            welford.push(x)
        if (i + 1) in ends:
            if welford.count >= 2:
                sd = np.sqrt(welford.regularized_variance())
            welford = _Welford(dim)

    scale_vec = math.exp(log_scale) * sd
    draws = np.empty((config.n_samples, dim))
    accept_sum = 0.0
    for i in range(config.n_samples):
        x, lp, accept_prob = _rwm_transition(target, x, lp, scale_vec, rng)
        draws[i] = x
        accept_sum += accept_prob

    return {
        "draws": draws,
        "step_size": float(math.exp(log_scale)),
        "mean_accept_stat": accept_sum / config.n_samples,
        "divergences": 0,
        "warmup_divergences": 0,
        "max_treedepth_hits": 0,
        "n_leapfrog": 0,
    }


def run_chains(target: Callable, dim: int, config: Optional[SamplerConfig] = None,
               *, parameter_names: Optional[Sequence[str]] = None,
               workers: int = 1) -> PosteriorSamples:
    """Sample a target density and return post-warmup draws with diagnostics.

    Each chain owns an independent RNG stream spawned from the master seed,
    so running chains serially or across worker processes yields identical
    results.  Chains are merged in chain order.
    """
    if config is None:
        config = SamplerConfig()
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise ValidationError(f"dim must be a positive integer, got {dim!r}")
    dim = int(dim)
    if parameter_names is None:
        parameter_names = tuple(f"x{i}" for i in range(dim))
    else:
        parameter_names = tuple(str(n) for n in parameter_names)
        if len(parameter_names) != dim:
            raise ValidationError(
                f"{len(parameter_names)} parameter names for dimension {dim}")

    seeds = np.random.SeedSequence(config.seed).spawn(config.n_chains)
    if workers == 1 or config.n_chains == 1:
        results = [_run_chain(target, dim, config, c, seeds[c])
                   for c in range(config.n_chains)]
    else:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=workers)(
            delayed(_run_chain)(target, dim, config, c, seeds[c])
            for c in range(config.n_chains))

    draws = np.stack([r["draws"] for r in results])
    divergence_count = sum(r["divergences"] for r in results)
    total_kept = config.n_chains * config.n_samples
    divergence_rate = divergence_count / total_kept

    flags = []
    constant = [parameter_names[k] for k in range(dim)
                if np.all(draws[:, :, k] == draws[0, 0, k])]
    if constant:
        flags.append("constant_parameters")

    if config.n_chains >= 2 and config.n_samples >= 4:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            rhat = split_rhat(draws)
            ess = effective_sample_size(draws)
    else:
        rhat = np.full(dim, np.nan)
        ess = np.full(dim, np.nan)
        flags.append("diagnostics_unavailable")

    if divergence_rate > 0.10:
        flags.append("high_divergence_rate")
        warnings.warn(
            f"{divergence_count} of {total_kept} post-warmup iterations diverged "
            f"({100 * divergence_rate:.1f}%); the posterior geometry may not be "
            "explored correctly", ConvergenceWarning, stacklevel=2)
    if constant:
        warnings.warn(
            f"parameters with zero posterior variance: {constant}",
            ConvergenceWarning, stacklevel=2)

    diagnostics = {
        "algorithm": config.algorithm,
        "n_chains": config.n_chains,
        "n_warmup": config.n_warmup,
        "n_samples": config.n_samples,
        "seed": int(config.seed),
        "target_accept": config.target_accept,
        "max_tree_depth": config.max_tree_depth,
        "divergence_rate": divergence_rate,
        "max_rhat": float(np.nanmax(rhat)) if np.any(np.isfinite(rhat)) else float("nan"),
        "min_ess": float(np.nanmin(ess)) if np.any(np.isfinite(ess)) else float("nan"),
        "constant_parameters": constant,
        "flags": flags,
        "chains": [
            {"chain": c + 1,
             "step_size": r["step_size"],
             "mean_accept_stat": r["mean_accept_stat"],
             "divergences": r["divergences"],
             "warmup_divergences": r["warmup_divergences"],
             "max_treedepth_hits": r["max_treedepth_hits"],
             "n_leapfrog": r["n_leapfrog"]}
            for c, r in enumerate(results)
        ],
    }
    return PosteriorSamples(draws=draws, parameter_names=parameter_names,
                            rhat=rhat, ess=ess,
                            divergence_count=divergence_count,
                            diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# Convergence diagnostics


def _split_halves(draws):
    """Validate draws and split each chain into halves, shape (2C, N//2, P)."""
    arr = np.asarray(draws, dtype=float)
    single = arr.ndim == 2
    if single:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValidationError(
            "draws must have shape (chains, iterations) or (chains, iterations, params)")
    n_chains, n_draws, _ = arr.shape
    if n_chains < 2:
        raise ValidationError("diagnostics need at least 2 chains")
    if n_draws < 4:
        raise ValidationError("diagnostics need at least 4 draws per chain")
    half = n_draws // 2
    splits = np.concatenate([arr[:, :half, :], arr[:, n_draws - half:, :]], axis=0)
    return splits, single


def split_rhat(draws):
    """Split-chain potential scale reduction factor, per parameter.

    Accepts (chains, iterations) or (chains, iterations, params) arrays of
    post-warmup draws.  Constant parameters are reported as 1 with a warning;
    chains that are internally constant but disagree give infinity.
    """
    splits, single = _split_halves(draws)
    m, n, p = splits.shape
    means = splits.mean(axis=1)
    within = splits.var(axis=1, ddof=1).mean(axis=0)
    between_over_n = means.var(axis=0, ddof=1)
    out = np.empty(p)
    degenerate = False
    for k in range(p):
        col = splits[:, :, k]
        # exact-equality check: roundoff keeps the variance of a constant
        # array slightly positive, which would silently corrupt the ratio
        if np.all(col == col[:, :1], axis=1).all():
            degenerate = True
            out[k] = 1.0 if np.all(col == col[0, 0]) else math.inf
        else:
            var_plus = (n - 1) / n * within[k] + between_over_n[k]
            out[k] = math.sqrt(var_plus / within[k])
    if degenerate:
        warnings.warn("zero within-chain variance; R-hat reported as 1 for "
                      "constant parameters", ConvergenceWarning, stacklevel=2)
    return float(out[0]) if single else out


def _autocovariance_rows(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of each row via FFT, shape preserved."""
    m, n = x.shape
    centered = x - x.mean(axis=1, keepdims=True)
    nfft = 1 << int(2 * n - 1).bit_length()
    spec = np.fft.rfft(centered, nfft, axis=1)
    acov = np.fft.irfft(spec * np.conj(spec), nfft, axis=1)[:, :n]
    return acov / n


def effective_sample_size(draws):
    """Autocorrelation-adjusted sample size, per parameter.

    Uses the initial positive then monotone truncation of the pairwise
    autocorrelation sums (Geyer), pooling split chains.  Constant parameters
    are reported as NaN with a warning.
    """
    splits, single = _split_halves(draws)
    m, n, p = splits.shape
    total = m * n
    out = np.empty(p)
    any_constant = False
    acov = np.empty((m, n, p))
    for k in range(p):
        acov[:, :, k] = _autocovariance_rows(splits[:, :, k])
    chain_means = splits.mean(axis=1)
    for k in range(p):
        if np.all(splits[:, :, k] == splits[0, 0, k]):
            out[k] = math.nan
            any_constant = True
            continue
        chain_var = acov[:, 0, k] * n / (n - 1)
        mean_var = chain_var.mean()
        if mean_var == 0.0:
            out[k] = math.nan
            any_constant = True
            continue
        var_plus = mean_var * (n - 1) / n + chain_means[:, k].var(ddof=1)
        rho = np.zeros(n)
        rho[0] = 1.0
        rho_even = 1.0
        rho_odd = 1.0 - (mean_var - acov[:, 1, k].mean()) / var_plus
        rho[1] = rho_odd
        s = 1
        while s < n - 4 and rho_even + rho_odd > 0.0:
            rho_even = 1.0 - (mean_var - acov[:, s + 1, k].mean()) / var_plus
            rho_odd = 1.0 - (mean_var - acov[:, s + 2, k].mean()) / var_plus
            if rho_even + rho_odd >= 0.0:
                rho[s + 1] = rho_even
                rho[s + 2] = rho_odd
            s += 2
        max_s = s
        # carry the last positive even term; helps antithetic chains
        if rho_even > 0.0 and max_s + 1 < n:
            rho[max_s + 1] = rho_even
        # enforce monotone decay of the pair sums
        for t in range(1, max_s - 2, 2):
            if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
                rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0
                rho[t + 2] = rho[t + 1]
        tau = -1.0 + 2.0 * rho[:max_s].sum() + rho[max_s + 1 if max_s + 1 < n else n - 1]
        tau = max(tau, 1.0 / math.log10(total))
        out[k] = min(total / tau, total * math.log10(total))
    if any_constant:
        warnings.warn("constant series has no effective sample size; reported NaN",
                      ConvergenceWarning, stacklevel=2)
    return float(out[0]) if single else out
