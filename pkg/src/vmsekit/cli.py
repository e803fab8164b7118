"""Command-line entry point.

Subcommands: schrodinger, liouville, rte, campaign, convergence,
kl-inspect. Each accepts --config <path> (TOML config or a JSON run
manifest), repeated --set key=value overrides, and --out-dir. Outputs are
CSV files plus a manifest.json holding the fully-resolved configuration,
per-stage wall-clock times, seeds, and summary results; the manifest can
be passed back to --config to reproduce the CSVs byte for byte.

Exit status is 0 on success. On failure a single machine-readable JSON
line {"error": <type>, "message": <text>} is printed to stderr and the
exit status is nonzero (2 for configuration/usage problems, 3 for solver
failures).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, config_to_dict, parse_config
from .csvio import (
    default_output_dir,
    write_csv,
    write_grid_csv,
    write_manifest,
)
from .ensemble import (
    CampaignSpec,
    derive_seed,
    deterministic_convergence,
    ensemble_convergence,
    l1_distance,
    run_campaign,
)
from .errors import ConfigError, VmsekitError
from .grids import make_grid, make_velocity_grid
from .klfield import FieldEvaluator, build_basis, sample_realization
from .liouville import evaluate_liouville
from .rte import RteRun, solve_rte
from .schrodinger import (
    SchrodingerRun,
    resolution_for,
    solve_vmse,
)


class _Stages:
    """Wall-clock bookkeeping for the manifest."""

    def __init__(self):
        self.records = []

    def run(self, name, fn):
        t0 = time.perf_counter()
        out = fn()
        self.records.append({"name": name, "seconds": time.perf_counter() - t0})
        return out


def _eps_tag(eps: float) -> str:
    n = -math.log2(eps)
    if abs(n - round(n)) < 1e-9:
        return f"n{int(round(n))}"
    return f"eps{eps:.6g}"


def _wave_grid(cfg: ExperimentConfig, eps: float):
    sch = cfg.schrodinger
    if sch.M is not None or sch.dt is not None:
        if sch.M is None or sch.dt is None:
            raise ConfigError("grid overrides need both schrodinger.M and schrodinger.dt")
        return make_grid(cfg.L, sch.M, cfg.T, sch.dt)
    return resolution_for(eps, cfg.L, cfg.T, cfg.rule)


def _x_nodes(cfg: ExperimentConfig, M: int | None):
    m = M if M is not None else max(256, int(round(cfg.L * 2.0**8)))
    if m % 2:
        m += 1
    return make_grid(cfg.L, m, cfg.T, cfg.T).x


def _velocity_window(cfg: ExperimentConfig, opts):
    p0 = cfg.packet.p0
    k_min = opts.k_min if opts.k_min is not None else p0 - 0.6
    k_max = opts.k_max if opts.k_max is not None else p0 + 0.6
    if k_min >= k_max:
        raise ConfigError(f"empty velocity window [{k_min}, {k_max}]")
    return k_min, k_max


def _output_times(cfg: ExperimentConfig):
    return cfg.output_times if cfg.output_times else (cfg.T,)


def _need_corr(cfg: ExperimentConfig):
    if cfg.corr is None:
        raise ConfigError(
            "this command needs a random field: add a [field] section (D, a, b)"
        )
    return cfg.corr


# ---------------------------------------------------------------------------
# subcommand handlers: cfg, out_dir, stages -> (results dict, output paths)


def cmd_schrodinger(cfg: ExperimentConfig, out: Path, stages: _Stages):
    eps = cfg.single_eps()
    grid = _wave_grid(cfg, eps)
    field = None
    seeds = ()
    if cfg.corr is not None and cfg.corr.D != 0.0:
        basis = stages.run(
            "kl-basis",
            lambda: build_basis(cfg.corr, eps, cfg.T, cfg.L,
                                threshold=cfg.ensemble.kl_threshold),
        )
        seed = derive_seed(cfg.ensemble.master_seed, eps, 0)
        real = sample_realization(basis, seed, cfg.ensemble.distribution)
        field = FieldEvaluator(basis, cfg.corr, real, grid.x)
        seeds = (seed,)
    run = SchrodingerRun(
        grid=grid, eps=eps, model=cfg.model, packet=cfg.packet,
        output_times=_output_times(cfg),
        tol=cfg.schrodinger.cn_tol, maxit=cfg.schrodinger.maxit,
    )
    trace = stages.run("wave-solve", lambda: solve_vmse(run, field=field))
    path = write_grid_csv(out / "trace.csv", "t", trace.times, "x", grid.x,
                          {"rho": trace.rho, "J": trace.J})
    results = {
        "eps": eps, "M": grid.M, "dt": grid.dt,
        "norm_drift": trace.norm_drift, "seeds": list(seeds),
    }
    return results, [path]


def cmd_liouville(cfg: ExperimentConfig, out: Path, stages: _Stages):
    opts = cfg.liouville
    x = _x_nodes(cfg, None)
    times = _output_times(cfg)
    vgrid = None
    if opts.mode == "regularized":
        k_min, k_max = _velocity_window(cfg, opts)
        vgrid = make_velocity_grid(k_min, k_max,
                                   opts.nk if opts.nk else 1024)
    eps = cfg.eps if opts.mode == "packet" else None
    rho = np.empty((len(times), x.size))
    J = np.empty((len(times), x.size))

    def solve_all():
        for i, t in enumerate(times):
            res = evaluate_liouville(
                cfg.model, cfg.packet, x, t, cfg.L,
                mode=opts.mode, eps=eps, vgrid=vgrid, tol=opts.tol,
                ny=opts.ny, nk=opts.nk or 513,
                delta_width_cells=opts.delta_width_cells,
                sigma_k=opts.sigma_k,
            )
            rho[i], J[i] = res["rho0"], res["J0"]

    stages.run("liouville-solve", solve_all)
    path = write_grid_csv(out / "profile.csv", "t", times, "x", x,
                          {"rho0": rho, "J0": J})
    return {"mode": opts.mode, "M": x.size}, [path]


def cmd_rte(cfg: ExperimentConfig, out: Path, stages: _Stages):
    opts = cfg.rte
    m = opts.M if opts.M is not None else max(256, int(round(cfg.L * 2.0**8)))
    if m % 2:
        m += 1
    dt = opts.dt if opts.dt is not None else cfg.T / 64.0
    grid = make_grid(cfg.L, m, cfg.T, dt)
    k_min, k_max = _velocity_window(cfg, opts)
    has_collision = cfg.corr is not None and cfg.corr.D != 0.0
    if opts.nk is not None:
        nk = opts.nk
    else:
        dk = 2.0**-10 if has_collision else 2.0**-9
        nk = int(round((k_max - k_min) / dk)) + 1
    vgrid = make_velocity_grid(k_min, k_max, nk)
    run = RteRun(
        grid=grid, vgrid=vgrid, model=cfg.model, packet=cfg.packet,
        corr=cfg.corr if has_collision else None,
        output_times=_output_times(cfg),
        delta_width_cells=opts.delta_width_cells, sigma_k=opts.sigma_k,
    )
    trace = stages.run("rte-solve", lambda: solve_rte(run))
    paths = [write_grid_csv(out / "profile.csv", "t", trace.times, "x", grid.x,
                            {"rho0": trace.rho, "J0": trace.J})]
    if opts.save_phase:
        pd = trace.density
        paths.append(write_grid_csv(out / "phase.csv", "x", pd.x, "k", pd.k,
                                    {"W": pd.W}))
    results = {
        "M": m, "nk": nk, "k_min": k_min, "k_max": k_max,
        "collision": has_collision,
        "mass_drift": trace.mass_drift,
        "edge_mass_max": trace.edge_mass_max,
        "n_substeps": trace.n_substeps,
    }
    return results, paths


def _stats_files(out: Path, stats_by_eps: dict, save_cov: bool):
    paths = []
    for eps in sorted(stats_by_eps, reverse=True):
        st = stats_by_eps[eps]
        tag = _eps_tag(eps)
        paths.append(write_grid_csv(
            out / f"stats_{tag}.csv", "t", st.times, "x", st.x,
            {"mean_rho": st.mean_rho, "std_rho": st.std_rho,
             "mean_J": st.mean_J, "std_J": st.std_J},
        ))
        if save_cov:
            paths.append(write_grid_csv(
                out / f"cov_{tag}.csv", "x", st.x, "y", st.x,
                {"cov_rho": st.cov_rho, "cov_J": st.cov_J},
            ))
    return paths


def _campaign_spec(cfg: ExperimentConfig, eps_list) -> CampaignSpec:
    return CampaignSpec(
        model=cfg.model, corr=_need_corr(cfg), packet=cfg.packet,
        L=cfg.L, T=cfg.T, eps_list=tuple(eps_list),
        n_samples=cfg.ensemble.n_samples,
        master_seed=cfg.ensemble.master_seed,
        distribution=cfg.ensemble.distribution,
        rule=cfg.rule, output_times=_output_times(cfg),
        kl_threshold=cfg.ensemble.kl_threshold,
        cn_tol=cfg.schrodinger.cn_tol,
        max_failure_fraction=cfg.ensemble.max_failure_fraction,
    )


def cmd_campaign(cfg: ExperimentConfig, out: Path, stages: _Stages):
    if cfg.ensemble.gammas:
        return _cmd_scaling(cfg, out, stages)
    eps_list = cfg.eps_list if cfg.eps_list else (cfg.single_eps(),)
    spec = _campaign_spec(cfg, eps_list)
    stats = stages.run("campaign", lambda: run_campaign(spec))
    paths = _stats_files(out, stats, cfg.ensemble.save_cov)
    results = {
        "eps_list": [float(e) for e in eps_list],
        "n_samples": spec.n_samples,
        "per_eps": {
            _eps_tag(e): {
                "n_kl_terms": stats[e].n_kl_terms,
                "n_failed": stats[e].n_failed,
                "norm_drift_max": stats[e].norm_drift_max,
                "clamp_total": stats[e].clamp_total,
                "seed_first": stats[e].seeds[0],
                "seed_last": stats[e].seeds[-1],
            }
            for e in eps_list
        },
    }
    return results, paths


def _cmd_scaling(cfg: ExperimentConfig, out: Path, stages: _Stages):
    """Fixed eps, varying perturbation exponent gamma; gaps vs the
    unperturbed deterministic profile."""
    eps = cfg.single_eps()
    grid = _wave_grid(cfg, eps)
    base = stages.run("baseline", lambda: solve_vmse(SchrodingerRun(
        grid=grid, eps=eps, model=cfg.model, packet=cfg.packet,
        output_times=(cfg.T,), tol=cfg.schrodinger.cn_tol,
    )))
    dx = cfg.L / grid.M
    gammas, gaps_rho, gaps_J = [], [], []
    paths = []
    for gamma in cfg.ensemble.gammas:
        model = replace(cfg.model, gamma=gamma)
        spec = replace(_campaign_spec(cfg, (eps,)), model=model)
        stats = stages.run(f"campaign-gamma={gamma:g}",
                           lambda s=spec: run_campaign(s))
        st = stats[eps]
        gammas.append(gamma)
        gaps_rho.append(l1_distance(st.mean_rho[-1], base.rho[-1], dx))
        gaps_J.append(l1_distance(st.mean_J[-1], base.J[-1], dx))
        tag = f"gamma{gamma:g}".replace(".", "p")
        paths.append(write_grid_csv(
            out / f"stats_{tag}.csv", "t", st.times, "x", st.x,
            {"mean_rho": st.mean_rho, "std_rho": st.std_rho,
             "mean_J": st.mean_J, "std_J": st.std_J},
        ))
    paths.insert(0, write_csv(out / "scaling.csv", {
        "gamma": gammas, "gap_rho": gaps_rho, "gap_J": gaps_J,
    }))
    results = {
        "eps": eps, "n_samples": cfg.ensemble.n_samples,
        "gaps": {f"{g:g}": {"rho": r, "J": j}
                 for g, r, j in zip(gammas, gaps_rho, gaps_J)},
    }
    return results, paths


def cmd_convergence(cfg: ExperimentConfig, out: Path, stages: _Stages):
    if not cfg.eps_list:
        raise ConfigError("convergence needs eps_list")
    if cfg.experiment in ("RandomRTEComparison", "ScalingStudy"):
        return _cmd_convergence_random(cfg, out, stages)
    slopes, profiles = stages.run("convergence", lambda: deterministic_convergence(
        cfg.model, cfg.packet, cfg.L, cfg.T, cfg.eps_list,
        rule=cfg.rule, reference=cfg.ensemble.reference,
        cn_tol=cfg.schrodinger.cn_tol, trace_tol=cfg.liouville.tol,
    ))
    paths = [write_csv(out / "errors.csv", {
        "eps": [r.eps for r in slopes],
        "err_rho": [r.err_rho for r in slopes],
        "err_J": [r.err_J for r in slopes],
    })]
    for r in slopes:
        prof = profiles[r.eps]
        paths.append(write_csv(out / f"profile_{_eps_tag(r.eps)}.csv", {
            "x": prof["x"], "rho": prof["rho"], "J": prof["J"],
            "rho0": prof["rho0"], "J0": prof["J0"],
        }))
    results = {
        "reference": cfg.ensemble.reference,
        "slope_rho": slopes[0].fitted_slope_rho,
        "slope_J": slopes[0].fitted_slope_J,
        "errors": {_eps_tag(r.eps): {"rho": r.err_rho, "J": r.err_J}
                   for r in slopes},
    }
    return results, paths


def _cmd_convergence_random(cfg: ExperimentConfig, out: Path, stages: _Stages):
    corr = _need_corr(cfg)
    opts = cfg.rte
    m = opts.M if opts.M is not None else max(256, int(round(cfg.L * 2.0**8)))
    if m % 2:
        m += 1
    grid = make_grid(cfg.L, m, cfg.T, opts.dt if opts.dt else cfg.T / 64.0)
    k_min, k_max = _velocity_window(cfg, opts)
    nk = opts.nk if opts.nk is not None else int(round((k_max - k_min) / 2.0**-10)) + 1
    vgrid = make_velocity_grid(k_min, k_max, nk)
    ref = stages.run("reference", lambda: solve_rte(RteRun(
        grid=grid, vgrid=vgrid, model=cfg.model, packet=cfg.packet,
        corr=corr if corr.D != 0.0 else None, output_times=(cfg.T,),
        delta_width_cells=opts.delta_width_cells, sigma_k=opts.sigma_k,
    )))
    spec = _campaign_spec(cfg, cfg.eps_list)
    stats = stages.run("campaign", lambda: run_campaign(spec))
    reports = ensemble_convergence(stats, grid.x, ref.rho[-1], ref.J[-1], cfg.L)
    paths = [write_csv(out / "errors.csv", {
        "eps": [r.eps for r in reports],
        "err_rho": [r.err_rho for r in reports],
        "err_J": [r.err_J for r in reports],
    })]
    paths.append(write_grid_csv(out / "reference.csv", "t", ref.times,
                                "x", grid.x, {"rho0": ref.rho, "J0": ref.J}))
    paths.extend(_stats_files(out, stats, cfg.ensemble.save_cov))
    results = {
        "n_samples": spec.n_samples,
        "smoke": cfg.ensemble.smoke,
        "slope_rho": reports[0].fitted_slope_rho,
        "slope_J": reports[0].fitted_slope_J,
        "errors": {_eps_tag(r.eps): {"rho": r.err_rho, "J": r.err_J}
                   for r in reports},
        "per_eps": {_eps_tag(e): {"n_kl_terms": stats[e].n_kl_terms,
                                  "n_failed": stats[e].n_failed}
                    for e in cfg.eps_list},
    }
    return results, paths


def cmd_kl_inspect(cfg: ExperimentConfig, out: Path, stages: _Stages):
    corr = _need_corr(cfg)
    eps = cfg.single_eps()
    basis = stages.run("kl-basis", lambda: build_basis(
        corr, eps, cfg.T, cfg.L, threshold=cfg.ensemble.kl_threshold))
    i = basis.pair_time
    j = basis.pair_space
    paths = [write_csv(out / "modes.csv", {
        "rank": np.arange(1, basis.n_terms + 1),
        "i": i, "j": j,
        "w_time": basis.time_freqs[i - 1],
        "v_space": basis.space_freqs[j - 1],
        "lambda_time": basis.time_eigs[i - 1],
        "sigma_space": basis.space_eigs[j - 1],
        "amp": basis.pair_amps,
    })]
    lead = basis.pair_amps[0]
    results = {
        "eps": eps,
        "n_terms": basis.n_terms,
        "threshold": cfg.ensemble.kl_threshold,
        "weakest_ratio": float(basis.pair_amps[-1] / lead),
    }
    return results, paths


HANDLERS = {
    "schrodinger": cmd_schrodinger,
    "liouville": cmd_liouville,
    "rte": cmd_rte,
    "campaign": cmd_campaign,
    "convergence": cmd_convergence,
    "kl-inspect": cmd_kl_inspect,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # machine-readable usage failures
        print(json.dumps({"error": "UsageError", "message": message}),
              file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="vmsekit",
        description="Varying-mass Schrodinger simulations and their "
                    "kinetic limits.",
    )
    parser.add_argument("--version", action="version",
                        version=f"vmsekit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in HANDLERS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None,
                       help="TOML config or JSON run manifest")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("--out-dir", default=None,
                       help="output directory (default: $VMSEKIT_OUT_DIR "
                            "or ./vmsekit-out)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config, args.set)
        out = Path(args.out_dir) if args.out_dir else (
            Path(cfg.out_dir) if cfg.out_dir else default_output_dir())
        out.mkdir(parents=True, exist_ok=True)
        stages = _Stages()
        t0 = time.perf_counter()
        results, paths = HANDLERS[args.command](cfg, out, stages)
        manifest = {
            "tool": "vmsekit",
            "version": __version__,
            "command": args.command,
            "experiment": cfg.experiment,
            "config": config_to_dict(cfg),
            "results": results,
            "stages": stages.records,
            "total_seconds": time.perf_counter() - t0,
            "outputs": [p.name for p in paths],
        }
        mpath = write_manifest(out / "manifest.json", manifest)
        for p in paths + [mpath]:
            print(p)
        return 0
    except ConfigError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    except VmsekitError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 3
    except Exception as exc:  # keep the failure contract machine-readable
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
