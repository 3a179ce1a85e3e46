"""Command-line entry point for reproducible estimation runs.

One binary with four subcommands: ``direct`` turns survey microdata into
design-based estimates, ``fit`` runs one model variant on a direct-estimates
table, ``benchmark`` replays the full simulation comparison, and
``simulate`` writes a synthetic survey for the other commands to consume.

Every command is a pure function of its input files, flags, and the single
``--seed``: outputs are byte-identical across reruns and worker counts.
Each run drops exactly one ``manifest.json`` in the output directory
recording the command line, a hash of the resolved configuration, the
package version, and SHA-256 digests of all inputs and outputs, so any
result can be re-derived by replaying the recorded arguments.

Exit codes: 0 success, 2 validation error, 3 convergence warning
(any R-hat above 1.05), 4 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SamplingError, ValidationError
from .graph import build_graph, icar_precision, read_adjacency, read_area_names, scale_icar
from .model import ModelData, PosteriorDensity, model_config_from_dict
from .sampler import SamplerConfig, run_chains, sampler_config_from_dict
from .simulation import (
    benchmark_csv,
    draw_covariates,
    draw_population,
    generate_geography,
    make_scenario,
    run_benchmark,
    sample_survey,
    scenario_from_dict,
)
from .summary import estimates_csv, hajek_intervals, summarize_areas, summarize_hypers
from .survey import DirectEstimates, SurveyDataset, direct_estimates

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
EXIT_INTERNAL = 4

RHAT_LIMIT = 1.05
CSV_DIGITS = 6
SCENARIO_CHOICES = ("mu01", "mu05", "large_sample")


# ---- plumbing ----


def _input_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"input file not found: {path}")
    return p


def _out_dir(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _load_json(path: Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as err:
        raise ValidationError(f"{path}: not valid JSON ({err})") from None


def _fmt(value: float) -> str:
    return format(float(value), f".{CSV_DIGITS}g")


def write_manifest(out: Path, command: str, argv, resolved: dict, seed: int,
                   inputs, outputs) -> Path:
    """Record the run: configuration hash plus digests of inputs and outputs.

    The hash covers the resolved configuration only, never worker counts or
    paths, so runs that must produce identical bytes share a hash.
    """
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    manifest = {
        "command": command,
        "argv": list(argv),
        "config": resolved,
        "config_hash": hashlib.sha256(canonical.encode()).hexdigest(),
        "seed": int(seed),
        "version": __version__,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
        "outputs": {name: _sha256(out / name) for name in outputs},
    }
    path = out / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _resolve_level(flag_value, config_value) -> float:
    # explicit flag wins, then the config file, then the 90% default
    if flag_value is not None:
        return float(flag_value)
    if config_value is not None:
        return float(config_value)
    return 0.9


def _scenario_from_args(args):
    """Scenario from --scenario preset or --config JSON (exactly one)."""
    if args.scenario and args.config:
        raise ValidationError("pass either --scenario or --config, not both")
    if args.config:
        path = _input_file(args.config)
        return scenario_from_dict(_load_json(path)), [path]
    if args.scenario:
        return make_scenario(args.scenario), []
    raise ValidationError("a scenario is required: --scenario NAME or --config FILE")


def _scenario_dict(scenario) -> dict:
    payload = asdict(scenario)
    payload["coefficients"] = list(payload["coefficients"])
    return payload


def _sampler_overrides(args, base: dict) -> dict:
    for flag, key in (("chains", "n_chains"), ("warmup", "n_warmup"),
                      ("samples", "n_samples")):
        value = getattr(args, flag, None)
        if value is not None:
            base[key] = value
    base["seed"] = args.seed
    return base


# ---- subcommands ----


def cmd_direct(args, argv) -> int:
    out = _out_dir(args.out)
    inputs = [_input_file(args.microdata)]
    areas = None
    if args.areas:
        inputs.append(_input_file(args.areas))
        areas = read_area_names(args.areas)
    level = _resolve_level(args.level, None)

    dataset = SurveyDataset.from_csv(args.microdata, areas=areas)
    direct = direct_estimates(dataset)
    estimates = hajek_intervals(direct, level)

    direct.to_csv(out / "direct.csv", sig_digits=CSV_DIGITS)
    (out / "estimates.csv").write_text(estimates_csv([estimates]), encoding="utf-8")
    resolved = {"command": "direct", "level": level,
                "areas_from_file": args.areas is not None}
    write_manifest(out, "direct", argv, resolved, args.seed, inputs,
                   ["direct.csv", "estimates.csv"])
    print(f"direct estimates for {direct.n_areas} areas -> {out}")
    return EXIT_OK


def cmd_fit(args, argv) -> int:
    out = _out_dir(args.out)
    inputs = [_input_file(args.direct_estimates)]
    direct = DirectEstimates.from_csv(args.direct_estimates)
    spatial = args.spatial == "on"
    smooth_variance = args.variant == "js"

    file_config = {}
    if args.config:
        path = _input_file(args.config)
        inputs.append(path)
        file_config = _load_json(path)
        if not isinstance(file_config, dict):
            raise ValidationError(f"{path}: config must be a JSON object")
        unknown = set(file_config) - {"model", "sampler"}
        if unknown:
            raise ValidationError(
                f"unknown config sections {sorted(unknown)}; "
                "expected 'model' and/or 'sampler'"
            )
    model_section = dict(file_config.get("model", {}))
    for key in ("spatial", "smooth_variance"):
        if key in model_section:
            raise ValidationError(
                f"config key {key!r} is controlled by --spatial/--variant"
            )
    for key in ("covariates", "gvf_extra"):
        if key in model_section:
            raise ValidationError(
                f"config key {key!r} needs column bindings; use the library API"
            )
    level = _resolve_level(args.level, model_section.pop("interval_level", None))
    model_section["spatial"] = spatial
    model_section["smooth_variance"] = smooth_variance
    model_section["interval_level"] = level
    config = model_config_from_dict(
        model_section, np.ones((direct.n_areas, 1))
    )

    q_star = None
    if spatial:
        if not args.adjacency:
            raise ValidationError("spatial fits require --adjacency")
        adjacency = _input_file(args.adjacency)
        inputs.append(adjacency)
        graph = build_graph(read_adjacency(adjacency), list(direct.areas))
        q_star = scale_icar(
            icar_precision(graph), allow_components=args.allow_components
        )
    density = PosteriorDensity(config, ModelData(direct=direct, q_star=q_star))

    sampler_config = sampler_config_from_dict(
        _sampler_overrides(args, dict(file_config.get("sampler", {})))
    )
    samples = run_chains(
        density.value_and_grad,
        density.dim,
        sampler_config,
        parameter_names=density.parameter_names,
        workers=args.workers,
    )
    estimates = summarize_areas(samples, density, level)
    hypers = summarize_hypers(samples, config, level)

    (out / "estimates.csv").write_text(estimates_csv([estimates]), encoding="utf-8")
    with open(out / "hyperparameters.json", "w", encoding="utf-8") as fh:
        json.dump({"method": hypers.method, "level": level,
                   "parameters": hypers.as_dict()}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    samples.to_diagnostics_json(out / "diagnostics.json")
    outputs = ["estimates.csv", "hyperparameters.json", "diagnostics.json"]
    if args.draws:
        samples.to_draws_csv(out / "draws.csv")
        outputs.append("draws.csv")

    resolved = {
        "command": "fit",
        "variant": args.variant,
        "spatial": spatial,
        "allow_components": bool(args.allow_components),
        "level": level,
        "model": {k: v for k, v in sorted(model_section.items())},
        "sampler": asdict(sampler_config),
    }
    write_manifest(out, "fit", argv, resolved, args.seed, inputs, outputs)

    rhat = samples.rhat[np.isfinite(samples.rhat)]
    worst = float(rhat.max()) if rhat.size else float("nan")
    print(f"{estimates.method}: {direct.n_areas} areas, "
          f"max R-hat {worst:.3f}, {samples.divergence_count} divergences -> {out}")
    if worst > RHAT_LIMIT:
        print(f"warning: max R-hat {worst:.3f} exceeds {RHAT_LIMIT}; "
              "treat estimates with caution", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def cmd_benchmark(args, argv) -> int:
    out = _out_dir(args.out)
    scenario, inputs = _scenario_from_args(args)
    sampler_config = sampler_config_from_dict(
        _sampler_overrides(args, {"n_chains": 4, "n_warmup": 500, "n_samples": 500})
    )
    result = run_benchmark(
        scenario,
        n_replications=args.replications,
        seed=args.seed,
        sampler_config=sampler_config,
        workers=args.workers,
    )

    (out / "benchmark.csv").write_text(benchmark_csv(result), encoding="utf-8")
    lines = ["method,replication,rmse,mae,cov90,mil"]
    for method in result.methods:
        for r, row in enumerate(result.per_replication[method]):
            lines.append(",".join([method, str(r), *(_fmt(v) for v in row)]))
    (out / "replications.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    resolved = {
        "command": "benchmark",
        "scenario": _scenario_dict(scenario),
        "replications": result.n_requested,
        "sampler": asdict(sampler_config),
    }
    write_manifest(out, "benchmark", argv, resolved, args.seed, inputs,
                   ["benchmark.csv", "replications.csv"])
    print(f"{scenario.label}: {result.n_completed}/{result.n_requested} "
          f"replications -> {out}")
    for failure in result.failures:
        print(f"warning: {failure}", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args, argv) -> int:
    out = _out_dir(args.out)
    scenario, inputs = _scenario_from_args(args)
    clusters = args.clusters_sampled or scenario.clusters_sampled

    geo_stream, frame_stream, rep_stream = np.random.SeedSequence(args.seed).spawn(3)
    geography = generate_geography(
        scenario.geography, np.random.default_rng(geo_stream)
    )
    frame = draw_covariates(geography, np.random.default_rng(frame_stream))
    rng = np.random.default_rng(rep_stream)
    population = draw_population(
        frame,
        scenario.mu,
        rng,
        coefficients=scenario.coefficients,
        sigma_area=scenario.sigma_area,
        sigma_cluster=scenario.sigma_cluster,
        mean_cluster_size=scenario.mean_cluster_size,
    )
    dataset = sample_survey(population, clusters, rng)

    dataset.to_csv(out / "survey.csv", sig_digits=CSV_DIGITS)
    truth = ["area,p_true"]
    truth += [f"{name},{_fmt(p)}"
              for name, p in zip(geography.area_names, population.p_true)]
    (out / "truth.csv").write_text("\n".join(truth) + "\n", encoding="utf-8")
    edges = ["# area adjacency: two tab-separated names per line"]
    edges += [f"{geography.area_names[i]}\t{geography.area_names[j]}"
              for i, j in geography.area_edges]
    (out / "adjacency.txt").write_text("\n".join(edges) + "\n", encoding="utf-8")
    (out / "areas.txt").write_text(
        "\n".join(geography.area_names) + "\n", encoding="utf-8"
    )

    resolved = {
        "command": "simulate",
        "scenario": _scenario_dict(scenario),
        "clusters_sampled": clusters,
    }
    write_manifest(out, "simulate", argv, resolved, args.seed, inputs,
                   ["survey.csv", "truth.csv", "adjacency.txt", "areas.txt"])
    print(f"simulated survey: {dataset.n_units} units over "
          f"{geography.n_areas} areas -> {out}")
    return EXIT_OK


# ---- parser ----


def _add_common(parser) -> None:
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0,
                        help="master seed; all randomness derives from it")
    parser.add_argument("--workers", type=int, default=1,
                        help="parallelism cap (never changes results)")


def _add_sampler_flags(parser) -> None:
    parser.add_argument("--chains", type=int, help="MCMC chains")
    parser.add_argument("--warmup", type=int, help="warmup iterations per chain")
    parser.add_argument("--samples", type=int, help="kept iterations per chain")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="saesmooth",
        description="Small-area proportion estimation with smoothed "
                    "area-level models",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("direct",
                       help="design-based direct estimates from microdata")
    p.add_argument("microdata", help="survey CSV "
                   "(response,weight,stratum,cluster,area)")
    p.add_argument("--areas", help="file with the full area universe, "
                   "one name per line")
    p.add_argument("--level", type=float, help="interval level (default 0.9)")
    _add_common(p)
    p.set_defaults(func=cmd_direct)

    p = sub.add_parser("fit", help="fit one model variant to direct estimates")
    p.add_argument("direct_estimates", help="direct-estimates CSV "
                   "(output of the direct command)")
    p.add_argument("--variant", choices=("ms", "js"), required=True,
                   help="ms: smooth means only; js: smooth means and variances")
    p.add_argument("--spatial", choices=("on", "off"), required=True)
    p.add_argument("--adjacency", help="area adjacency file (spatial fits)")
    p.add_argument("--allow-components", action="store_true",
                   help="accept a disconnected adjacency graph")
    p.add_argument("--config", help="JSON with optional model/sampler sections")
    p.add_argument("--level", type=float, help="interval level (default 0.9)")
    p.add_argument("--draws", action="store_true",
                   help="also write full-precision draws.csv")
    _add_sampler_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("benchmark",
                       help="replicate the estimator comparison study")
    p.add_argument("--scenario", choices=SCENARIO_CHOICES)
    p.add_argument("--config", help="JSON scenario configuration")
    p.add_argument("--replications", type=int,
                   help="override the scenario's replication count")
    _add_sampler_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("simulate",
                       help="write one synthetic survey with known truth")
    p.add_argument("--scenario", choices=SCENARIO_CHOICES)
    p.add_argument("--config", help="JSON scenario configuration")
    p.add_argument("--clusters-sampled", type=int, dest="clusters_sampled",
                   help="override sampled clusters per stratum")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, argv)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except SamplingError as err:
        print(f"sampling failure: {err}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as err:  # anything unforeseen is an internal error
        print(f"internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
