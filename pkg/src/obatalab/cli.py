"""Batch front-end: subcommands over every module, CSV/JSON/SVG artifacts.

Exit-code contract: 0 success, 1 crash or invalid input, 2 mathematical
violation (failed CD check, broken inequality, flagged scaling). Every run
writes results.csv and summary.json into --out; summary.json carries the
config hash and the tolerances in force and is byte-stable across repeated
runs (volatile data like runtime goes to the run_info.json sidecar).
"""
import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NonCDInputError, ObataLabError
from .isoperimetry import ProfileQuery, profile
from .localization import (
    SuspensionGeometry,
    assemble_main,
    bad_set_energy,
    global_deficit,
    load_family,
    long_mass_bound,
    normalize,
    per_ray_cosine,
    pole_concentration,
    select_long_rays,
    variance_bound,
    volume_control,
)
from .measures import Grid, cd_check, load_density_csv, model_density
from .obata1d import (
    FAMILIES,
    ExperimentSpec,
    deficit_distance_sweep,
    diameter_deficit_sweep,
    upper_gap_check,
)
from .plotting import render_plot
from .spectral import neumann_eigs

CD_TOL = 1e-8


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict
    out: str = "out"
    seed: int = 0
    grid: int = 4096

    def canonical(self):
        doc = {
            "command": self.command,
            "params": self.params,
            "seed": self.seed,
            "grid": self.grid,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class _Artifact:
    header: tuple
    rows: list
    results: dict
    tolerances: dict
    plot: dict = None
    exit_code: int = 0


def _cell(x):
    if isinstance(x, bool) or isinstance(x, np.bool_):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def _write_artifacts(config: RunConfig, art: _Artifact, runtime):
    os.makedirs(config.out, exist_ok=True)
    csv_path = os.path.join(config.out, "results.csv")
    with open(csv_path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(art.header)
        for row in art.rows:
            writer.writerow([_cell(x) for x in row])

    from obatalab import __version__

    summary = {
        "version": __version__,
        "command": config.command,
        "config": {
            "params": config.params,
            "seed": config.seed,
            "grid": config.grid,
        },
        "config_hash": hashlib.sha256(config.canonical().encode()).hexdigest(),
        "seed": config.seed,
        "tolerances": art.tolerances,
        "results": art.results,
    }
    with open(os.path.join(config.out, "summary.json"), "w", newline="\n") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(os.path.join(config.out, "run_info.json"), "w", newline="\n") as fh:
        json.dump({"runtime_seconds": runtime}, fh, sort_keys=True, indent=2)
        fh.write("\n")

    if art.plot is not None and art.rows:
        render_plot(csv_path, os.path.join(config.out, "plot.svg"), **art.plot)


def _run_profile(config: RunConfig) -> _Artifact:
    p = config.params
    q = ProfileQuery(N=p["dim"], D=p["diam"], v=p["v"])
    res = profile(q)
    print(f"profile I_{{{q.N:g},{q.D:g}}}({q.v:g}) = {res.value:.12g}")
    return _Artifact(
        header=("v", "value", "argmin_b", "R", "evals"),
        rows=[(q.v, res.value, res.argmin_b, res.R_at_argmin, res.iterations)],
        results={
            "value": res.value,
            "argmin_b": res.argmin_b,
            "R": res.R_at_argmin,
            "evals": res.iterations,
        },
        tolerances={"bracket_tol": 1e-9, "residual_tol": 1e-12},
    )


def _build_interval(config: RunConfig):
    p = config.params
    N = p["dim"]
    if p.get("density"):
        kappa = p.get("kappa")
        if kappa is None:
            kappa = N - 1.0
        return load_density_csv(p["density"], K=kappa, N=N)
    D = p.get("diam") or math.pi
    return model_density(N, Grid.uniform(D, config.grid))


def _run_spectrum(config: RunConfig) -> _Artifact:
    k = int(config.params.get("k") or 1)
    w = _build_interval(config)
    res = neumann_eigs(w, k=k)
    rows = []
    for j in range(len(res.eigenvalues)):
        err = res.err_bar[j]
        rows.append((
            j + 1,
            float(res.eigenvalues[j]),
            float(res.rayleigh[j]),
            float(res.residuals[j]),
            float(err) if math.isfinite(err) else math.nan,
        ))
    lam1 = float(res.eigenvalues[0])
    print(f"lambda1 = {lam1:.12g} (lambda0 residual {res.lam0:.3g})")
    return _Artifact(
        header=("index", "eigenvalue", "rayleigh", "residual", "err_bar"),
        rows=rows,
        results={"lambda1": lam1, "lambda0": res.lam0},
        tolerances={"model_lambda1_rel": 1e-5},
    )


def _parse_points(raw):
    if not raw:
        return ()
    try:
        return tuple(float(tok) for tok in raw.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"bad sweep point list {raw!r}") from exc


def _run_obata(config: RunConfig) -> _Artifact:
    p = config.params
    N = p["dim"]
    eps = _parse_points(p.get("points"))
    D_sweep = [math.pi - e for e in eps] if eps else None
    ds = diameter_deficit_sweep(N, D_sweep, grid_n=config.grid)
    ug = upper_gap_check(N, grid_n=config.grid)
    rows = [
        (float(e), float(g), float(lo), bool(h), float(g / lo))
        for e, g, lo, h in zip(ds.eps, ds.gap, ds.lower, ds.holds)
    ]
    status = "ok" if ds.all_hold else "VIOLATED"
    print(
        f"diameter sweep N={N:g}: slope {ds.fit.slope:.4f} "
        f"(target {N:g}), lower bound {status}"
    )
    return _Artifact(
        header=("eps", "gap", "lower", "holds", "ratio"),
        rows=rows,
        results={
            "slope": ds.fit.slope,
            "intercept": ds.fit.intercept,
            "r_squared": ds.fit.r_squared,
            "all_hold": ds.all_hold,
            "ratio_range": list(ds.ratio_range),
            "upper_gap_max_ratio": ug.max_ratio,
            "upper_gap_spread": ug.spread,
            "upper_candidate_max_ratio": ug.candidate_max_ratio,
        },
        tolerances={"direction_slack": 0.0, "fit_flag_r2": 0.98},
        plot={"x": "eps", "y": "gap", "loglog": True, "annotate": True},
        exit_code=0 if ds.all_hold else 2,
    )


def _run_sweep(config: RunConfig) -> _Artifact:
    p = config.params
    spec = ExperimentSpec(
        N=p["dim"],
        family=p["family"],
        grid_n=config.grid,
        sweep=_parse_points(p.get("points")),
        seed=config.seed,
    )
    res = deficit_distance_sweep(spec)
    rows = list(zip(res.param, res.delta, res.dist_l2, res.dist_w12, res.lambda1))
    stable = res.constant_spread <= 10.0
    print(
        f"{spec.family} N={spec.N:g}: exponent {res.fit.slope:.4f} "
        f"(target {res.target:g}), constant spread {res.constant_spread:.3f}"
    )
    return _Artifact(
        header=("param", "delta", "dist_l2", "dist_w12", "lambda1"),
        rows=rows,
        results={
            "family": spec.family,
            "target": res.target,
            "slope": res.fit.slope,
            "intercept": res.fit.intercept,
            "r_squared": res.fit.r_squared,
            "constant_range": list(res.constant_range),
            "excluded": res.excluded,
            "slope_l2": res.fit_l2.slope,
        },
        tolerances={"deficit_guard": 0.5, "stable_constant_spread": 10.0},
        plot={"x": "delta", "y": "dist_w12", "loglog": True, "annotate": True},
        exit_code=0 if stable else 2,
    )


def _run_localize(config: RunConfig) -> _Artifact:
    p = config.params
    beta = p.get("beta")
    gamma = p.get("gamma")
    fam = load_family(p["config"])
    fam = normalize(fam)
    ledger = global_deficit(fam)
    sel = select_long_rays(fam, ledger, beta)
    bad = bad_set_energy(fam, ledger)
    prc = per_ray_cosine(fam, sel.Q_long)
    ledger.c = prc.c
    var = variance_bound(fam, ledger, beta, gamma)
    mass = long_mass_bound(fam, ledger, beta, gamma)
    geo = SuspensionGeometry.from_family(fam)
    pole = pole_concentration(geo, sel.Q_long, delta=ledger.delta, beta=var.beta)

    # spot-check the ball-volume sandwich away from the pole-distance edge;
    # the sandwich is only claimed for suspension-complete families (no
    # unspanned mass, every ray starting at the pole)
    volume_checked = 0
    suspension_complete = fam.unspanned_mass == 0.0 and all(
        ray.a == 0.0 for ray in fam.rays
    )
    if suspension_complete and geo.pole_distance > 0.4:
        for r in np.linspace(0.1, geo.pole_distance - 0.05, 16):
            volume_control(geo, float(r))
            volume_checked += 1

    asm = assemble_main(fam, geo, ledger)

    longs = set(sel.Q_long)
    rows = []
    for i, ray in enumerate(fam.rays):
        rows.append((
            i,
            ray.weight,
            ray.w.grid.D,
            ray.a,
            ray.b,
            float(ledger.c[i]),
            float(ledger.delta_q[i]),
            i in longs,
            float(prc.dist[i]),
        ))
    flags = {
        "variance": var.flagged,
        "long_mass": mass.flagged,
        "unspanned": mass.unspanned_flagged,
        "pole": pole.flagged,
    }
    flagged = any(flags.values())
    print(
        f"localize: delta {ledger.delta:.6g}, final_dist {asm.final_dist:.6g}, "
        f"flags {'none' if not flagged else ','.join(k for k, v in flags.items() if v)}"
    )
    return _Artifact(
        header=("ray", "weight", "D", "a", "b", "c", "delta_q", "long", "dist"),
        rows=rows,
        results={
            "delta": ledger.delta,
            "beta": var.beta,
            "gamma": var.gamma,
            "Q_long": list(sel.Q_long),
            "chebyshev": {
                "excluded_c2": sel.excluded_c2,
                "bound": sel.chebyshev_bound,
                "long_c2": sel.long_c2,
            },
            "bad_set": {"value": bad.value, "bound": bad.bound},
            "per_ray_max_dist": prc.max_dist,
            "variance": var.variance,
            "variance_envelope": var.envelope,
            "cbar": var.cbar,
            "one_minus_mass": mass.one_minus_mass,
            "mass_lhs": mass.lhs,
            "mass_envelope": mass.envelope,
            "unspanned_mass": mass.unspanned_mass,
            "pole_max_start": pole.max_start,
            "pole_max_end": pole.max_end,
            "pole_threshold": pole.threshold,
            "volume_checked": volume_checked,
            "final_dist": asm.final_dist,
            "final_ratio": asm.ratio,
            "eta": asm.eta,
            "sign": asm.sign,
            "flags": flags,
        },
        tolerances={
            "identity_slack": 1e-10,
            "energy_identity_slack": 1e-6,
            "flag_factor": 10.0,
            "volume_slack": 1e-9,
        },
        exit_code=2 if flagged else 0,
    )


def _run_check_density(config: RunConfig) -> _Artifact:
    p = config.params
    N = p["dim"]
    kappa = p.get("kappa")
    if kappa is None:
        kappa = N - 1.0
    w = load_density_csv(p["file"], K=kappa, N=N)
    verdict = cd_check(w, sample_pairs=int(p.get("pairs") or 0), tol=CD_TOL)
    if verdict.passed:
        print(f"PASS: CD({w.K:g},{w.N:g}) holds on {verdict.checked} triples")
        x0, x1, tt = math.nan, math.nan, math.nan
    else:
        x0, x1, tt = verdict.witness
        print(
            f"FAIL: CD({w.K:g},{w.N:g}) violated by {verdict.violation:.6g} "
            f"at x0={x0:.6g}, x1={x1:.6g}, t={tt:.6g}"
        )
    return _Artifact(
        header=("passed", "x0", "x1", "t", "violation", "checked"),
        rows=[(verdict.passed, x0, x1, tt, verdict.violation, verdict.checked)],
        results={
            "passed": verdict.passed,
            "witness": None if verdict.passed else [x0, x1, tt],
            "violation": verdict.violation,
            "checked": verdict.checked,
        },
        tolerances={"cd_tol": CD_TOL},
        exit_code=0 if verdict.passed else 2,
    )


_HANDLERS = {
    "profile": _run_profile,
    "spectrum": _run_spectrum,
    "obata": _run_obata,
    "sweep": _run_sweep,
    "localize": _run_localize,
    "check-density": _run_check_density,
}


def run(config: RunConfig) -> int:
    """Execute one configured command and write its artifacts."""
    handler = _HANDLERS.get(config.command)
    if handler is None:
        raise ConfigError(f"unknown command {config.command!r}")
    if config.grid < 15:
        raise ConfigError("grid must have at least 15 cells")
    t0 = time.perf_counter()
    art = handler(config)
    _write_artifacts(config, art, time.perf_counter() - t0)
    return art.exit_code


class _Parser(argparse.ArgumentParser):
    # usage problems must map to exit 1 (invalid input), not argparse's 2
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    parser = _Parser(prog="obatalab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", default="out", help="artifact directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--grid", type=int, default=4096,
                        help="grid cells per interval")

    sp = sub.add_parser("profile", help="isoperimetric profile value")
    sp.add_argument("--dim", type=float, required=True)
    sp.add_argument("--diam", type=float, required=True)
    sp.add_argument("--v", type=float, required=True, help="volume fraction")
    common(sp)

    sp = sub.add_parser("spectrum", help="Neumann eigenpairs of a density")
    group = sp.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", action="store_true",
                       help="model density sin^(N-1)")
    group.add_argument("--density", metavar="FILE", help="t,h CSV density")
    sp.add_argument("--dim", type=float, required=True)
    sp.add_argument("--diam", type=float, default=None)
    sp.add_argument("--kappa", type=float, default=None,
                    help="curvature parameter of the density (default N-1)")
    sp.add_argument("--k", type=int, default=1, help="number of eigenpairs")
    common(sp)

    sp = sub.add_parser("obata", help="diameter-deficit sweep and upper gap")
    sp.add_argument("--dim", type=float, required=True)
    sp.add_argument("--points", default="",
                    help="comma-separated eps = pi - D values")
    common(sp)

    sp = sub.add_parser("sweep", help="deficit-versus-distance sweep")
    sp.add_argument("--dim", type=float, required=True)
    sp.add_argument("--family", choices=list(FAMILIES), required=True)
    sp.add_argument("--points", default="",
                    help="comma-separated sweep parameters")
    common(sp)

    sp = sub.add_parser("localize", help="run the ray-family pipeline")
    sp.add_argument("--config", required=True, metavar="FAMILY_JSON")
    sp.add_argument("--beta", type=float, default=None)
    sp.add_argument("--gamma", type=float, default=None)
    common(sp)

    sp = sub.add_parser("check-density", help="CD(K,N) verdict for a density file")
    sp.add_argument("file", metavar="DENSITY_CSV")
    sp.add_argument("--dim", type=float, required=True)
    sp.add_argument("--kappa", type=float, default=None)
    sp.add_argument("--pairs", type=int, default=0,
                    help="extra quasi-random sample pairs")
    common(sp)

    return parser


def config_from_args(args) -> RunConfig:
    skip = {"command", "out", "seed", "grid"}
    params = {k: v for k, v in vars(args).items() if k not in skip}
    return RunConfig(
        command=args.command,
        params=params,
        out=args.out,
        seed=args.seed,
        grid=args.grid,
    )


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return run(config_from_args(args))
    except NonCDInputError as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ObataLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
