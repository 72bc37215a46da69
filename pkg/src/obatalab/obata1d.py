"""Experiment drivers for deficit-versus-distance and diameter-deficit sweeps.

Each sweep point is an independent job; jobs run on a worker pool bounded by
OBATALAB_THREADS (default 1). Results are collected in submission order, and
submissions are sorted by the sweep parameter, so output tables are
deterministic regardless of completion order.
"""
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ParameterDomainError
from .measures import Grid, WeightedInterval, generate_cd_density, model_density
from .spectral import (
    _recenter_normalize,
    asymptotic_rate_constant,
    cosine_distance,
    neumann_eigs,
    rayleigh,
)

FAMILIES = ("truncated-model", "perturbed-cosine", "seeded-generated")


@dataclass(frozen=True)
class FitResult:
    """Least-squares power law y ~ e^intercept x^slope in log-log coordinates."""

    slope: float
    intercept: float
    r_squared: float
    points: int
    flagged: bool  # r_squared < 0.98


def loglog_fit(x, y) -> FitResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    lx, ly = np.log(x[keep]), np.log(y[keep])
    if lx.size < 2:
        raise ParameterDomainError("need at least two positive points to fit")
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return FitResult(slope=float(coef[0]), intercept=float(coef[1]),
                     r_squared=float(r2), points=int(lx.size),
                     flagged=bool(r2 < 0.98))


def _n_workers():
    raw = os.environ.get("OBATALAB_THREADS", "")
    try:
        k = int(raw)
    except ValueError:
        k = 1
    return max(k, 1)


def _run_jobs(fn, params):
    k = _n_workers()
    if k == 1:
        return [fn(p) for p in params]
    with ThreadPoolExecutor(max_workers=k) as pool:
        futures = [pool.submit(fn, p) for p in params]
        return [f.result() for f in futures]


def truncated_model(N, D, n) -> WeightedInterval:
    """Model density restricted to [0, D] and renormalized to unit mass."""
    w = model_density(N, Grid.uniform(D, n))
    return WeightedInterval(grid=w.grid, h=w.h / w.total_mass, K=w.K, N=w.N)


def dilated_model(N, D, n) -> WeightedInterval:
    """sin^{N-1}(pi t / D) on [0, D], unit mass; CD(N-1, N) with room to spare."""
    g = Grid.uniform(D, n)
    h = np.sin(math.pi * g.nodes / D) ** (N - 1.0)
    h[-1] = 0.0
    w = WeightedInterval(grid=g, h=h, K=N - 1.0, N=N)
    return WeightedInterval(grid=g, h=w.h / w.total_mass, K=N - 1.0, N=N)


def _lam1(w):
    return float(neumann_eigs(w, k=1).eigenvalues[0])


def _lam1_richardson(build, n):
    # the scheme is O(dt^2); one halving step removes the leading term
    lam_n = _lam1(build(n))
    lam_h = _lam1(build(n // 2))
    return lam_n + (lam_n - lam_h) / 3.0


@dataclass(frozen=True)
class ExperimentSpec:
    """One deficit-distance sweep: family name, dimension, grid, parameters.

    sweep semantics by family:
      truncated-model   -> diameters D < pi
      perturbed-cosine  -> perturbation scales s in u = cos + s sin(2t)
      seeded-generated  -> diameter gaps eps = pi - D (seed offsets the rng)
    """

    N: float
    family: str
    grid_n: int = 4096
    sweep: tuple = ()
    seed: int = 0
    target: float = None  # exponent target; min(1/2, 1/N) when omitted

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterDomainError(f"unknown family {self.family!r}")
        if not self.N > 1:
            raise ParameterDomainError("need N > 1")
        sweep = tuple(float(s) for s in self.sweep) or _default_sweep(self.family)
        if len(sweep) < 5:
            raise ParameterDomainError("sweeps need at least 5 points")
        if any(s <= 0 for s in sweep):
            raise ParameterDomainError("sweep parameters must be positive")
        object.__setattr__(self, "sweep", sweep)
        if self.target is None:
            object.__setattr__(self, "target", min(0.5, 1.0 / self.N))


def _default_sweep(family):
    if family == "truncated-model":
        return tuple(math.pi - 2.0 ** (-k) for k in range(3, 8))
    if family == "perturbed-cosine":
        return (0.2, 0.1, 0.05, 0.025, 0.0125)
    return (0.3, 0.24, 0.192, 0.1536, 0.12288)  # geometric eps, ratio 0.8


@dataclass(frozen=True)
class SweepResult:
    family: str
    N: float
    target: float
    param: np.ndarray
    delta: np.ndarray
    dist_l2: np.ndarray
    dist_w12: np.ndarray
    lambda1: np.ndarray
    fit: FitResult        # dist_w12 against delta
    fit_l2: FitResult
    constant_range: tuple  # min/max of dist_w12 / delta^target
    excluded: int          # rows dropped by the small-deficit guard

    @property
    def constant_spread(self):
        lo, hi = self.constant_range
        return hi / lo if lo > 0 else math.inf


def _eigen_row(w, build, n):
    res = neumann_eigs(w, k=1)
    lam_n = float(res.eigenvalues[0])
    lam_h = _lam1(build(n // 2))
    lam = lam_n + (lam_n - lam_h) / 3.0
    u = _recenter_normalize(w, res.eigenfunctions[:, 0])
    _, d2, dw = cosine_distance(w, u)
    return lam, d2, dw


def deficit_distance_sweep(spec: ExperimentSpec) -> SweepResult:
    """Table of (param, delta, dist_L2, dist_W12, lambda1) plus power-law fits.

    Instances with delta > 0.5 are excluded: the stability statement is a
    small-deficit theorem and carries an unspecified delta_0(N) guard.
    """
    N, n = spec.N, spec.grid_n
    params = sorted(spec.sweep)

    if spec.family == "truncated-model":
        def job(D):
            if not 0 < D <= math.pi:
                raise ParameterDomainError("truncated-model wants 0 < D <= pi")
            w = truncated_model(N, D, n)
            lam, d2, dw = _eigen_row(w, lambda nn: truncated_model(N, D, nn), n)
            return lam - N, d2, dw, lam
    elif spec.family == "perturbed-cosine":
        w_model = model_density(N, Grid.uniform(math.pi, n))
        lam_model = _lam1_richardson(
            lambda nn: model_density(N, Grid.uniform(math.pi, nn)), n)

        def job(s):
            t = w_model.grid.nodes
            u = _recenter_normalize(w_model, np.cos(t) + s * np.sin(2 * t))
            delta = rayleigh(w_model, u) - N
            _, d2, dw = cosine_distance(w_model, u)
            return delta, d2, dw, lam_model
    else:
        seed_of = {eps: spec.seed + k for k, eps in enumerate(params)}

        def job(eps):
            D = math.pi - eps

            def build(nn):
                return generate_cd_density(N, seed_of[eps], Grid.uniform(D, nn))

            w = build(n)
            lam, d2, dw = _eigen_row(w, build, n)
            return lam - N, d2, dw, lam

    rows = _run_jobs(job, params)
    table = [(p,) + r for p, r in zip(params, rows)]
    kept = [row for row in table if row[1] <= 0.5]
    excluded = len(table) - len(kept)
    if len(kept) < 2:
        raise ParameterDomainError("small-deficit guard left fewer than 2 points")
    param, delta, d2, dw, lam = (np.array(col) for col in zip(*kept))
    consts = dw / delta ** spec.target
    return SweepResult(
        family=spec.family,
        N=N,
        target=spec.target,
        param=param,
        delta=delta,
        dist_l2=d2,
        dist_w12=dw,
        lambda1=lam,
        fit=loglog_fit(delta, dw),
        fit_l2=loglog_fit(delta, d2),
        constant_range=(float(np.min(consts)), float(np.max(consts))),
        excluded=excluded,
    )


@dataclass(frozen=True)
class DiameterSweepResult:
    N: float
    eps: np.ndarray        # pi - D
    gap: np.ndarray        # lambda_1 - N
    lower: np.ndarray      # C_N eps^N
    holds: np.ndarray      # lower <= gap, pointwise, no tolerance
    all_hold: bool
    ratio_range: tuple     # min/max of gap / lower
    fit: FitResult         # gap against eps; slope should approach N


def diameter_deficit_sweep(N, D_sweep=None, grid_n=4096) -> DiameterSweepResult:
    """lambda_1 - N against pi - D on truncated models, with the exact-direction
    check C_N (pi - D)^N <= lambda_1 - N at every point."""
    if D_sweep is None:
        D_sweep = [math.pi - 2.0 ** (-k) for k in range(3, 8)]
    Ds = sorted(float(D) for D in D_sweep)
    if any(not 0 < D < math.pi for D in Ds):
        raise ParameterDomainError("diameter sweep wants 0 < D < pi")

    def job(D):
        return _lam1_richardson(lambda nn: truncated_model(N, D, nn), grid_n)

    lams = np.array(_run_jobs(job, Ds))
    eps = math.pi - np.array(Ds)
    gap = lams - N
    lower = asymptotic_rate_constant(N) * eps ** N
    holds = lower <= gap
    ratios = gap / lower
    return DiameterSweepResult(
        N=N,
        eps=eps,
        gap=gap,
        lower=lower,
        holds=holds,
        all_hold=bool(np.all(holds)),
        ratio_range=(float(np.min(ratios)), float(np.max(ratios))),
        fit=loglog_fit(eps, gap),
    )


@dataclass(frozen=True)
class UpperGapReport:
    N: float
    eps: np.ndarray
    gap: np.ndarray              # lambda_1 - N on the dilated model
    ratios: np.ndarray           # gap / eps
    max_ratio: float
    spread: float                # max/min of ratios; stability under halving
    candidate_deficit: np.ndarray  # Rayleigh deficit of recentred sqrt(N+1) cos
    candidate_max_ratio: float


def upper_gap_check(N, D_sweep=None, grid_n=4096) -> UpperGapReport:
    """Linear upper bound lambda_1 - N <= C (pi - D) on the dilated model.

    The dilated density sin^{N-1}(pi t / D) satisfies CD(N-1, N) (its curvature
    is (N-1)(pi/D)^2 > N-1), so it witnesses that no power better than linear
    can hold in the upper direction. Also evaluates the explicit candidate
    sqrt(N+1) cos(t), recentred, whose quotient must be N + O(eps).
    """
    if D_sweep is None:
        D_sweep = [math.pi - e for e in (0.2, 0.1, 0.05)]
    Ds = sorted(float(D) for D in D_sweep)
    if any(D < math.pi - 0.3 - 1e-12 for D in Ds):
        raise ParameterDomainError("upper-gap sweep wants D >= pi - 0.3")
    Ds = [D for D in Ds if D < math.pi]  # exact pi is 0/0, excluded
    if not Ds:
        raise ParameterDomainError("no diameters strictly below pi")

    def job(D):
        w = dilated_model(N, D, grid_n)
        lam = _lam1_richardson(lambda nn: dilated_model(N, D, nn), grid_n)
        t = w.grid.nodes
        cand = rayleigh(w, math.sqrt(N + 1.0) * np.cos(t)) - N
        return lam - N, cand

    rows = _run_jobs(job, Ds)
    eps = math.pi - np.array(Ds)
    gap = np.array([r[0] for r in rows])
    cand = np.array([r[1] for r in rows])
    ratios = gap / eps
    return UpperGapReport(
        N=N,
        eps=eps,
        gap=gap,
        ratios=ratios,
        max_ratio=float(np.max(ratios)),
        spread=float(np.max(ratios) / np.min(ratios)),
        candidate_deficit=cand,
        candidate_max_ratio=float(np.max(cand / eps)),
    )


@dataclass(frozen=True)
class EigenComparisonReport:
    lhs: float        # min-over-sign ||v -+ u1||^2 in W^{1,2}(m)
    rhs: float        # Rayleigh(v) - lambda_1
    ratio: float
    overlap: float    # <v, u1> in L^2(m)
    lambda1: float
    lambda2: float
    in_regime: bool   # rhs within the small-deficit guard
    dichotomy_margin: float  # rhs - (1 - overlap^2)(lambda_2 - lambda_1)


def eigen_comparison_check(w: WeightedInterval, v, guard=0.1) -> EigenComparisonReport:
    """Both sides of the comparison ||v -+ u1||^2_{W12} <= C (Rayleigh(v) - lambda_1).

    Also reports the overlap dichotomy: writing v = c u1 + v_perp, the spectral
    decomposition forces Rayleigh(v) - lambda_1 >= (1 - c^2)(lambda_2 - lambda_1),
    so small overlap implies a definite Rayleigh excess.
    """
    res = neumann_eigs(w, k=2)
    lam1 = float(res.eigenvalues[0])
    lam2 = float(res.eigenvalues[1])
    u1 = _recenter_normalize(w, res.eigenfunctions[:, 0])
    vn = _recenter_normalize(w, v)

    t = w.grid.nodes
    mass = w.total_mass
    rv = rayleigh(w, vn)
    rhs = rv - lam1
    overlap = float(np.trapezoid(w.h * vn * u1, t) / mass)

    du1 = np.gradient(u1, t, edge_order=2)
    dv = np.gradient(vn, t, edge_order=2)
    lhs = math.inf
    for s in (1.0, -1.0):
        d = float(np.trapezoid(w.h * ((vn - s * u1) ** 2 + (dv - s * du1) ** 2), t) / mass)
        lhs = min(lhs, d)

    if lhs <= 1e-20:
        ratio = 0.0
    elif rhs <= 0.0:
        ratio = math.inf
    else:
        ratio = lhs / rhs
    c2 = min(overlap * overlap, 1.0)
    return EigenComparisonReport(
        lhs=float(lhs),
        rhs=float(rhs),
        ratio=float(ratio),
        overlap=overlap,
        lambda1=lam1,
        lambda2=lam2,
        in_regime=bool(rhs <= guard),
        dichotomy_margin=float(rhs - (1.0 - c2) * (lam2 - lam1)),
    )
