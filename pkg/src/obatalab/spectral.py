"""Neumann spectral problems on weighted intervals.

The eigenproblem -(h u')' = lambda h u is discretized by conservative
midpoint fluxes with a mass-lumped right side. Fluxes and masses are both
assembled from cell-midpoint densities, so nothing ever divides by a nodal
h value and densities vanishing at the endpoints (the model) need no special
casing. A diagonal similarity turns the pencil into a symmetric tridiagonal
standard problem solved by bisection + inverse iteration.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal

from .errors import (
    ConditioningError,
    DegenerateDensityError,
    DisconnectedSupportError,
    ObataLabError,
    ParameterDomainError,
    UndefinedQuotientError,
)
from .isoperimetry import bbg_constant, c_squared_minus_one
from .measures import Grid, WeightedInterval, omega


@dataclass(frozen=True)
class SpectralResult:
    """Lowest Neumann eigenpairs of a weighted interval.

    eigenvalues: lambda_1 <= ... <= lambda_k (lambda_0 ~ 0 dropped, kept in lam0)
    eigenfunctions: column j is the j-th eigenfunction, L2(m)-normalized in the
        discrete mass inner product, zero m-mean, sign fixed positive at the
        first significant node
    rayleigh: discrete flux/mass Rayleigh quotients (equal eigenvalues to
        rounding; the free-standing rayleigh() op uses the central-difference
        definition instead and agrees only to O(grid^2))
    residuals: per pair, max over interior nodes of |h u'' + h' u' + lam h u|
    err_bar: |lambda(n) - lambda(n/2)| per pair when the half grid exists
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    rayleigh: np.ndarray
    residuals: np.ndarray
    lam0: float
    err_bar: np.ndarray

    @property
    def residual(self):
        return float(np.max(self.residuals))


def _assemble(t, h):
    dt = np.diff(t)
    hmid = 0.5 * (h[:-1] + h[1:])
    f = hmid / dt
    M = np.zeros(len(t))
    M[:-1] += 0.5 * dt * hmid
    M[1:] += 0.5 * dt * hmid
    diag = np.zeros(len(t))
    diag[:-1] += f
    diag[1:] += f
    return f, M, diag


def _support_checks(h):
    pos = np.nonzero(h > 0)[0]
    if pos.size == 0:
        raise DegenerateDensityError("density is identically zero")
    span = slice(pos[0], pos[-1])
    hmid = 0.5 * (h[:-1] + h[1:])
    if np.any(hmid[span] == 0.0):
        raise DisconnectedSupportError("density vanishes on an interior subinterval")


def _solve_tridiagonal(t, h, k):
    f, M, diag = _assemble(t, h)
    s = 1.0 / np.sqrt(M)
    vals, vecs = eigh_tridiagonal(diag * s * s, -f * s[:-1] * s[1:],
                                  select="i", select_range=(0, k))
    u = vecs * s[:, None]
    for j in range(u.shape[1]):
        u[:, j] /= math.sqrt(float(np.sum(M * u[:, j] ** 2)))
        i0 = int(np.argmax(np.abs(u[:, j]) > 1e-12 * np.max(np.abs(u[:, j]))))
        if u[i0, j] < 0:
            u[:, j] *= -1.0
    # discrete Rayleigh quotients in the same flux/mass forms as the solve
    ray = np.empty(u.shape[1])
    for j in range(u.shape[1]):
        du = np.diff(u[:, j])
        ray[j] = float(np.sum(f * du * du) / np.sum(M * u[:, j] ** 2))
    return vals, u, ray


def _second_diff(t, u):
    # 3-point second difference, interior only; reduces to (u+ - 2u + u-)/dt^2
    dl = np.diff(t)[:-1]
    dr = np.diff(t)[1:]
    out = np.zeros_like(u)
    out[1:-1] = 2.0 * ((u[2:] - u[1:-1]) / dr - (u[1:-1] - u[:-2]) / dl) / (dl + dr)
    return out


def neumann_eigs(w: WeightedInterval, k=1) -> SpectralResult:
    """First k nonzero Neumann eigenpairs of -(h u')' = lambda h u on w."""
    if k < 1:
        raise ParameterDomainError("need k >= 1")
    t = w.grid.nodes
    h = w.h
    _support_checks(h)
    vals, u, ray = _solve_tridiagonal(t, h, k)
    lam0 = float(vals[0])
    lams = vals[1:]
    funcs = u[:, 1:]
    rayq = ray[1:]

    # residual of the strong form at interior nodes, independent stencils
    dh = np.gradient(h, t, edge_order=2)
    residuals = np.empty(len(lams))
    for j in range(len(lams)):
        uu = funcs[:, j]
        du = np.gradient(uu, t, edge_order=2)
        d2 = _second_diff(t, uu)
        r = h * d2 + dh * du + lams[j] * h * uu
        residuals[j] = float(np.max(np.abs(r[1:-1])))

    err_bar = np.full(len(lams), np.nan)
    if (len(t) - 1) % 2 == 0 and (len(t) - 1) // 2 >= 15:
        vals2, _, _ = _solve_tridiagonal(t[::2], h[::2], k)
        err_bar = np.abs(lams - vals2[1:])

    return SpectralResult(
        eigenvalues=np.asarray(lams),
        eigenfunctions=funcs,
        rayleigh=rayq,
        residuals=residuals,
        lam0=lam0,
        err_bar=err_bar,
    )


def _recenter_normalize(w, u):
    t = w.grid.nodes
    mass = w.total_mass
    u = np.asarray(u, dtype=float)
    u = u - np.trapezoid(w.h * u, t) / mass
    nrm2 = float(np.trapezoid(w.h * u * u, t) / mass)
    if nrm2 <= 0.0 or not math.isfinite(nrm2):
        raise UndefinedQuotientError("function has zero variance against m")
    return u / math.sqrt(nrm2)


def rayleigh(w: WeightedInterval, u):
    """Dirichlet energy of u recentred to zero m-mean and unit L2(m) norm.

    Central differences for u' (one-sided second order at the ends),
    trapezoid quadrature against h.
    """
    t = w.grid.nodes
    u = _recenter_normalize(w, u)
    du = np.gradient(u, t, edge_order=2)
    return float(np.trapezoid(w.h * du * du, t) / w.total_mass)


def deficit(w: WeightedInterval, u, N=None):
    """delta(u) = rayleigh(u) - N."""
    if N is None:
        N = w.N
    return rayleigh(w, u) - N


@dataclass(frozen=True)
class LichnerowiczReport:
    margin: float        # lambda_1 - N C^2_{N,D}
    c_squared: float     # C^2_{N,D}
    deficit: float       # lambda_1 - N
    diam_lower: float    # C_N (pi - D)^N
    diam_ok: bool        # diam_lower <= deficit + 1e-6


def asymptotic_rate_constant(N):
    """C_N = N/(2 limit) = 1/(2^{N-1} N omega_N), the concrete banked constant
    in the diameter lower bound C_N (pi - D)^N <= lambda_1 - N."""
    return 1.0 / (2.0 ** (N - 1.0) * N * omega(N))


def lichnerowicz_check(w: WeightedInterval, lam1) -> LichnerowiczReport:
    """Margins of the improved spectral gap lambda_1 >= N C^2_{N,D}."""
    N, D = w.N, w.grid.D
    c2 = 1.0 + c_squared_minus_one(N, D)
    dfc = lam1 - N
    lower = asymptotic_rate_constant(N) * (math.pi - D) ** N
    return LichnerowiczReport(
        margin=float(lam1 - N * c2),
        c_squared=float(c2),
        deficit=float(dfc),
        diam_lower=float(lower),
        diam_ok=bool(lower <= dfc + 1e-6),
    )


@dataclass(frozen=True)
class BochnerReport:
    norm: float      # ||u'' + u||_{L2(m)} on the window h >= 1e-6 max h
    gap: float       # lambda - N
    ratio: float     # norm / sqrt(gap), inf when gap <= 0
    in_range: bool   # N <= lambda <= 2N


def bochner_check(w: WeightedInterval, eigenpair) -> BochnerReport:
    """||u'' + u|| against sqrt(lambda - N), windowed away from degenerate ends."""
    lam, u = eigenpair
    t = w.grid.nodes
    h = w.h
    mask = h >= 1e-6 * np.max(h)
    mask[0] = mask[-1] = False
    d2 = _second_diff(t, u)
    z = d2 + u
    nrm2 = float(np.trapezoid(np.where(mask, h * z * z, 0.0), t) / w.total_mass)
    norm = math.sqrt(max(nrm2, 0.0))
    gap = float(lam - w.N)
    ratio = norm / math.sqrt(gap) if gap > 0 else math.inf
    return BochnerReport(norm=norm, gap=gap, ratio=ratio,
                         in_range=bool(w.N <= lam <= 2 * w.N))


@dataclass(frozen=True)
class GreenResult:
    v0: np.ndarray
    residual: float      # max interior |v0'' + v0 - z| by central differences
    norm_v0: float
    norm_z: float
    boundary_max: bool   # argmax of h fell on an endpoint (op proceeds)


def green_apply(w: WeightedInterval, z, x0=None) -> GreenResult:
    """v0(t) = int_{x0}^t sin(t - s) z(s) ds through spline antiderivatives.

    sin(t-s) is split as sin t cos s - cos t sin s so both factors integrate
    once; the antiderivatives are cubic-spline exact to O(grid^4). Enforces
    the norm bound ||v0|| <= pi ||z|| + 1e-8.
    """
    t = w.grid.nodes
    z = np.asarray(z, dtype=float)
    if len(z) != len(t):
        raise ParameterDomainError("z must be sampled on the grid")
    imax = int(np.argmax(w.h))  # ties resolve to the smaller t
    boundary = imax in (0, len(t) - 1)
    if x0 is None:
        x0 = float(t[imax])
    Ic = CubicSpline(t, np.cos(t) * z).antiderivative()
    Is = CubicSpline(t, np.sin(t) * z).antiderivative()
    cz = Ic(t) - Ic(x0)
    sz = Is(t) - Is(x0)
    v0 = np.sin(t) * cz - np.cos(t) * sz

    mass = w.total_mass
    norm_v = math.sqrt(max(float(np.trapezoid(w.h * v0 * v0, t) / mass), 0.0))
    norm_z = math.sqrt(max(float(np.trapezoid(w.h * z * z, t) / mass), 0.0))
    if norm_v > math.pi * norm_z + 1e-8:
        raise ObataLabError(
            f"Green operator norm bound violated: {norm_v} > pi*{norm_z}"
        )
    resid = float(np.max(np.abs((_second_diff(t, v0) + v0 - z)[1:-1])))
    return GreenResult(v0=v0, residual=resid, norm_v0=norm_v, norm_z=norm_z,
                       boundary_max=boundary)


@dataclass(frozen=True)
class CosineReport:
    sign: float
    dist_L2: float
    dist_W12: float
    alpha: float
    beta: float
    u0_norm: float
    recon_error: float   # max node error of u0 + alpha sin + beta cos vs u
    window_0r: float     # L2(m) distance restricted to [0, r], if r given
    window_band: float   # same on [r - eta, r + eta]


def _deriv2_4th(t, u):
    # 4th-order stencils on uniform grids; falls back to gradient pairs otherwise
    dt0 = t[1] - t[0]
    if not np.allclose(np.diff(t), dt0, rtol=1e-9, atol=0.0):
        return np.gradient(np.gradient(u, t, edge_order=2), t, edge_order=2)
    n = len(t)
    d2 = np.zeros(n)
    d2[2:-2] = (-u[:-4] + 16 * u[1:-3] - 30 * u[2:-2] + 16 * u[3:-1] - u[4:]) / (12 * dt0 ** 2)
    cl = np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]) / (12 * dt0 ** 2)
    cr = cl[::-1].copy()
    d2[0] = cl @ u[0:6]
    d2[1] = cl @ u[1:7]
    d2[-1] = cr @ u[-6:]
    d2[-2] = cr @ u[-7:-1]
    return d2


def cosine_distance(w: WeightedInterval, u, shift=0.0):
    """min over sign of (L2, W12) distances of u to +-sqrt(N+1) cos(. + shift).

    Returns (sign, dist_L2, dist_W12). u is used as given (no renormalization).
    """
    t = w.grid.nodes
    mass = w.total_mass
    c = math.sqrt(w.N + 1.0) * np.cos(t + shift)
    dc = -math.sqrt(w.N + 1.0) * np.sin(t + shift)
    du = np.gradient(u, t, edge_order=2)
    best = (1.0, math.inf, math.inf)
    for s in (1.0, -1.0):
        d2 = float(np.trapezoid(w.h * (u - s * c) ** 2, t) / mass)
        dd2 = float(np.trapezoid(w.h * (du - s * dc) ** 2, t) / mass)
        if d2 + dd2 < best[1] ** 2 + best[2] ** 2:
            best = (s, math.sqrt(d2), math.sqrt(d2 + dd2))
    return best


def cosine_decompose(w: WeightedInterval, u_star, lam, r=None, eta=None) -> CosineReport:
    """Split an eigenfunction as u = u0 + alpha sin + beta cos.

    z = u'' + u by 4th-order differences, u0 = green_apply(z), then (alpha,
    beta) solve the 2x2 least-squares system of u - u0 against (sin, cos) in
    L2(m). Reports distances to +-sqrt(N+1) cos and, when r is supplied, the
    windowed distances on [0, r] and [r - eta, r + eta].
    """
    t = w.grid.nodes
    h = w.h
    mass = w.total_mass
    u = np.asarray(u_star, dtype=float)
    z = _deriv2_4th(t, u) + u
    g = green_apply(w, z)
    u0 = g.v0
    rdiff = u - u0
    st, ct = np.sin(t), np.cos(t)
    a11 = float(np.trapezoid(h * st * st, t))
    a12 = float(np.trapezoid(h * st * ct, t))
    a22 = float(np.trapezoid(h * ct * ct, t))
    gram = np.array([[a11, a12], [a12, a22]])
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e12:
        raise ConditioningError(f"sin/cos normal system condition {cond:.3e}")
    rhs = np.array([float(np.trapezoid(h * st * rdiff, t)),
                    float(np.trapezoid(h * ct * rdiff, t))])
    alpha, beta = np.linalg.solve(gram, rhs)
    recon = u0 + alpha * st + beta * ct
    recon_err = float(np.max(np.abs(recon - u)))
    sign, dist_l2, dist_w12 = cosine_distance(w, u)
    u0_norm = math.sqrt(max(float(np.trapezoid(h * u0 * u0, t) / mass), 0.0))

    window_0r = math.nan
    window_band = math.nan
    if r is not None:
        if eta is None:
            eta = 0.5 * r
        target = sign * math.sqrt(w.N + 1.0) * ct
        dev2 = h * (u - target) ** 2
        m0 = t <= r
        mb = (t >= r - eta) & (t <= r + eta)
        if np.any(m0):
            window_0r = math.sqrt(float(np.trapezoid(np.where(m0, dev2, 0.0), t) / mass))
        if np.any(mb):
            window_band = math.sqrt(float(np.trapezoid(np.where(mb, dev2, 0.0), t) / mass))

    return CosineReport(
        sign=float(sign),
        dist_L2=float(dist_l2),
        dist_W12=float(dist_w12),
        alpha=float(alpha),
        beta=float(beta),
        u0_norm=u0_norm,
        recon_error=recon_err,
        window_0r=window_0r,
        window_band=window_band,
    )


@dataclass(frozen=True)
class PoincareReport:
    lhs: float
    rhs: float
    ratio: float
    ball: tuple
    big_ball: tuple


def _segmented_simpson(F, pts):
    pts = np.asarray(pts, dtype=float)
    lo, hi = pts[:-1], pts[1:]
    mid = 0.5 * (lo + hi)
    return float(np.sum((hi - lo) / 6.0 * (F(lo) + 4.0 * F(mid) + F(hi))))


def _breakpoints(t, a, b, extra=()):
    inside = t[(t > a) & (t < b)]
    pts = np.unique(np.concatenate([[a, b], inside, np.asarray(extra, dtype=float)]))
    return pts[(pts >= a) & (pts <= b)]


def _crossings(t, y, c, a, b):
    # kinks of |PL(y) - c| inside (a, b), for exact p = 1 integrals
    out = []
    d = y - c
    for i in range(len(t) - 1):
        if t[i + 1] <= a or t[i] >= b:
            continue
        if d[i] == 0.0 or d[i] * d[i + 1] < 0:
            if d[i + 1] == d[i]:
                continue
            x = t[i] + (0.0 - d[i]) / (d[i + 1] - d[i]) * (t[i + 1] - t[i])
            if a < x < b:
                out.append(x)
    return out


def poincare_check(w: WeightedInterval, u, x, r, p=2) -> PoincareReport:
    """Weak local Poincare ratio at center x and radius r, exponent p in {1,2}.

    fint_{B_r} |u - fint u|^p dm <= C r fint_{B_10r} |u'|^p dm is tested with
    the p-th powers as stated (no roots). Integrals treat h and u as
    piecewise linear and are exact on partial end cells (the products are
    piecewise cubic at worst, so per-segment Simpson is exact).
    """
    if p not in (1, 2):
        raise ParameterDomainError("p must be 1 or 2")
    t = w.grid.nodes
    h = w.h
    D = w.grid.D
    a, b = max(0.0, x - r), min(D, x + r)
    A, B = max(0.0, x - 10 * r), min(D, x + 10 * r)
    if b <= a:
        raise DegenerateDensityError("empty ball")
    u = np.asarray(u, dtype=float)

    def hf(q):
        return np.interp(q, t, h)

    def uf(q):
        return np.interp(q, t, u)

    pts = _breakpoints(t, a, b)
    den = _segmented_simpson(hf, pts)
    if den <= 0.0:
        raise DegenerateDensityError("zero-mass ball")
    ubar = _segmented_simpson(lambda q: hf(q) * uf(q), pts) / den
    extra = _crossings(t, u, ubar, a, b) if p == 1 else ()
    pts = _breakpoints(t, a, b, extra)
    lhs = _segmented_simpson(lambda q: hf(q) * np.abs(uf(q) - ubar) ** p, pts) / den

    du = np.gradient(u, t, edge_order=2)

    def df(q):
        return np.interp(q, t, du)

    extra = _crossings(t, du, 0.0, A, B) if p == 1 else ()
    PTS = _breakpoints(t, A, B, extra)
    DEN = _segmented_simpson(hf, PTS)
    if DEN <= 0.0:
        raise DegenerateDensityError("zero-mass comparison ball")
    rhs = r * _segmented_simpson(lambda q: hf(q) * np.abs(df(q)) ** p, PTS) / DEN

    if lhs <= 0.0:
        ratio = 0.0
    elif rhs <= 0.0:
        ratio = math.inf
    else:
        ratio = lhs / rhs
    return PoincareReport(lhs=float(lhs), rhs=float(rhs), ratio=float(ratio),
                          ball=(a, b), big_ball=(A, B))
