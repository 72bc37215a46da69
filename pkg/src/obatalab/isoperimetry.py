"""Model isoperimetric profiles and the diameter-improved comparison constant.

I_{N,D}(v) = inf over windows [b, b+D] of sin^{N-1}(R(b,v)) / int_b^{b+D} sin^{N-1},
where R(b,v) splits the window mass in ratio v. The D = pi case reduces to the
closed one-window profile I_N. C_{N,D} is the explicit comparison constant
(int_0^{pi/2} cos^{N-1} / int_0^{D/2} cos^{N-1})^{1/N} and its D -> pi
asymptotics (pi-D)^N/(C^2-1) -> 2^{N-2} N^2 omega_N are reproduced numerically.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterDomainError
from .measures import omega, sinpow_cum

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ProfileQuery:
    N: float
    D: float
    v: float

    def __post_init__(self):
        if not self.N > 1:
            raise ParameterDomainError("N must exceed 1")
        if not 0.0 < self.D <= math.pi:
            raise ParameterDomainError("need 0 < D <= pi")
        if not 0.0 < self.v < 1.0:
            raise ParameterDomainError("need 0 < v < 1")


@dataclass(frozen=True)
class ProfileResult:
    value: float
    argmin_b: float
    R_at_argmin: float
    iterations: int  # total g evaluations spent


def _sinpow_int(N, a, b):
    return sinpow_cum(N, b) - sinpow_cum(N, a)


def solve_R(N, b, v, D):
    """The unique R in [b, b+D] with int_b^R sin^{N-1} = v * int_b^{b+D} sin^{N-1}.

    Monotone bisection bracketing followed by a Newton polish; residual is
    driven below 1e-12 of the right-hand side.
    """
    if not 0.0 <= v <= 1.0:
        raise ParameterDomainError("volume fraction v must lie in [0, 1]")
    if b < -1e-12 or b + D > math.pi + 1e-9:
        raise ParameterDomainError("window [b, b+D] must sit inside [0, pi]")
    if v == 0.0:
        return float(b)
    if v == 1.0:
        return float(b + D)
    rhs = v * float(_sinpow_int(N, b, b + D))
    lo, hi = b, b + D
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if float(_sinpow_int(N, b, mid)) < rhs:
            lo = mid
        else:
            hi = mid
    R = 0.5 * (lo + hi)
    for _ in range(8):
        f = float(_sinpow_int(N, b, R)) - rhs
        df = math.sin(R) ** (N - 1)
        if df <= 0:
            break
        R = min(max(R - f / df, b), b + D)
        if abs(f) <= 1e-12 * max(rhs, 1e-300):
            break
    return float(R)


def g_eval(N, b, v, D):
    """g(b, v) = sin^{N-1}(R(b,v)) / int_b^{b+D} sin^{N-1}."""
    R = solve_R(N, b, v, D)
    return math.sin(R) ** (N - 1) / float(_sinpow_int(N, b, b + D))


def profile(q: ProfileQuery, n_scan=129, tol=1e-9) -> ProfileResult:
    """Minimize g(., v) over b in [0, pi - D]: coarse scan then golden section.

    g is smooth in b but not proven unimodal, so the scan guards the
    golden-section stage against secondary minima. D = pi has the single
    candidate b = 0.
    """
    N, D, v = q.N, q.D, q.v
    if D >= math.pi:
        val = g_eval(N, 0.0, v, math.pi)
        return ProfileResult(val, 0.0, solve_R(N, 0.0, v, math.pi), 1)
    evals = 0
    bs = np.linspace(0.0, math.pi - D, n_scan)
    gs = np.array([g_eval(N, b, v, D) for b in bs])
    evals += n_scan
    i = int(np.argmin(gs))
    a_ = bs[max(i - 1, 0)]
    b_ = bs[min(i + 1, n_scan - 1)]
    c_ = b_ - INV_PHI * (b_ - a_)
    d_ = a_ + INV_PHI * (b_ - a_)
    fc, fd = g_eval(N, c_, v, D), g_eval(N, d_, v, D)
    evals += 2
    while abs(b_ - a_) > tol:
        if fc < fd:
            b_, d_, fd = d_, c_, fc
            c_ = b_ - INV_PHI * (b_ - a_)
            fc = g_eval(N, c_, v, D)
        else:
            a_, c_, fc = c_, d_, fd
            d_ = a_ + INV_PHI * (b_ - a_)
            fd = g_eval(N, d_, v, D)
        evals += 1
    bstar = 0.5 * (a_ + b_)
    return ProfileResult(g_eval(N, bstar, v, D), float(bstar),
                         solve_R(N, bstar, v, D), evals + 1)


@dataclass(frozen=True)
class OdeResidualReport:
    max_residual: float  # max over v_grid of |residual + N| / N
    excluded: tuple      # v values skipped because v +- step left (0,1)


def profile_ode_residual(N, v_grid, step=1e-3) -> OdeResidualReport:
    """Finite-difference check of (I_N^{N/(N-1)})'' I_N^{(N-2)/(N-1)} = -N."""
    p = N / (N - 1.0)
    worst = 0.0
    excluded = []
    for v in np.asarray(v_grid, dtype=float):
        if v - step <= 0.0 or v + step >= 1.0:
            excluded.append(float(v))
            continue
        Im = g_eval(N, 0.0, v - step, math.pi)
        I0 = g_eval(N, 0.0, v, math.pi)
        Ip = g_eval(N, 0.0, v + step, math.pi)
        phi2 = (Im ** p - 2.0 * I0 ** p + Ip ** p) / step ** 2
        res = phi2 * I0 ** ((N - 2.0) / (N - 1.0))
        worst = max(worst, abs(res + N) / N)
    return OdeResidualReport(worst, tuple(excluded))


def bbg_constant(N, D):
    """C_{N,D} = (int_0^{pi/2} cos^{N-1} / int_0^{D/2} cos^{N-1})^{1/N} >= 1."""
    if not 0.0 < D <= math.pi:
        raise ParameterDomainError("need 0 < D <= pi")
    half = float(sinpow_cum(N, math.pi / 2))
    tail = float(sinpow_cum(N, (math.pi - D) / 2))  # int_{D/2}^{pi/2} cos^{N-1}
    return ((half) / (half - tail)) ** (1.0 / N)


def c_squared_minus_one(N, D):
    """C_{N,D}^2 - 1 without cancellation (log1p/expm1 route)."""
    half = float(sinpow_cum(N, math.pi / 2))
    tail = float(sinpow_cum(N, (math.pi - D) / 2))
    x = tail / (half - tail)
    return float(np.expm1((2.0 / N) * np.log1p(x)))


def bbg_ratio_check(N, D, v_grid):
    """min over v of I_{N,D}(v)/I_N(v) - C_{N,D}; >= -1e-7 certifies the bound."""
    C = bbg_constant(N, D)
    worst = math.inf
    for v in np.asarray(v_grid, dtype=float):
        num = profile(ProfileQuery(N, D, float(v))).value
        den = g_eval(N, 0.0, float(v), math.pi)
        worst = min(worst, num / den - C)
    return float(worst)


@dataclass(frozen=True)
class AsymptoticResult:
    ratios: tuple    # (pi - D)^N / (C^2 - 1) along the sweep
    limit: float     # Richardson-extrapolated (correction is O(eps^2))
    target: float    # closed form 2^{N-2} N^2 omega_N


def asymptotic_constant(N, D_sweep) -> AsymptoticResult:
    """Ratios (pi-D)^N/(C^2_{N,D}-1) along a sweep D -> pi, with extrapolation."""
    Ds = np.asarray(D_sweep, dtype=float)
    if np.any(Ds >= math.pi) or np.any(np.diff(Ds) <= 0):
        raise ParameterDomainError("D_sweep must increase strictly toward pi")
    eps = math.pi - Ds
    ratios = tuple(float(e ** N / c_squared_minus_one(N, math.pi - e)) for e in eps)
    if len(ratios) >= 2:
        e1, e2 = eps[-2], eps[-1]
        r1, r2 = ratios[-2], ratios[-1]
        limit = r2 + (r2 - r1) * e2 ** 2 / (e1 ** 2 - e2 ** 2)
    else:
        limit = ratios[-1]
    target = 2.0 ** (N - 2.0) * N * N * omega(N)
    return AsymptoticResult(ratios, float(limit), float(target))
