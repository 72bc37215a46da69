"""Weighted intervals and curvature-dimension densities.

A weighted interval is ([0, D], |.|, h dt) with a node-sampled density h,
interpolated piecewise-linearly between nodes. This module owns the
distortion coefficients sigma/tau, the model density sin^{N-1}/omega_N,
verification of the CD(K,N) concavity inequality (integral and differential
forms), a seeded generator of CD densities, and the envelope estimates that
compare a density of diameter D to the model as D -> pi.
"""
import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, simpson
from scipy.special import betainc, beta as beta_fn

from .errors import (
    ConfigError,
    DegenerateDensityError,
    NormalizationError,
    ParameterDomainError,
)

# evaluation lattice size for cd_check: 33 evenly spaced node indices
CD_LATTICE = 33


# ---------------------------------------------------------------------------
# grids and weighted intervals


@dataclass(frozen=True)
class Grid:
    """Node set 0 = t_0 < ... < t_n = D. Field n counts cells, nodes has n+1."""

    D: float
    n: int
    nodes: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", t)
        if t.ndim != 1 or len(t) < 16:
            raise ParameterDomainError("grid needs at least 16 nodes")
        if abs(t[0]) > 1e-12:
            raise ParameterDomainError("grid must start at t = 0")
        if np.any(np.diff(t) <= 0):
            raise ParameterDomainError("grid nodes must be strictly increasing")
        if abs(t[-1] - self.D) > 1e-12:
            raise ParameterDomainError("last node must equal D")
        if not 0.0 < self.D <= math.pi + 1e-12:
            raise ParameterDomainError("need 0 < D <= pi")
        if self.n != len(t) - 1:
            raise ParameterDomainError("n must equal len(nodes) - 1")

    @staticmethod
    def uniform(D, n):
        return Grid(D=float(D), n=int(n), nodes=np.linspace(0.0, float(D), int(n) + 1))

    @property
    def max_step(self):
        return float(np.max(np.diff(self.nodes)))


@dataclass(frozen=True)
class WeightedInterval:
    """([0, D], |.|, h dt) with density samples h at grid nodes."""

    grid: Grid
    h: np.ndarray
    K: float
    N: float
    total_mass: float = field(default=None)

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        object.__setattr__(self, "h", h)
        if len(h) != len(self.grid.nodes):
            raise ParameterDomainError("density sample count must match grid nodes")
        if np.any(h < 0):
            raise ParameterDomainError("density must be non-negative")
        if not self.N > 1:
            raise ParameterDomainError("dimension parameter N must exceed 1")
        if self.total_mass is None:
            object.__setattr__(
                self, "total_mass", float(np.trapezoid(h, self.grid.nodes))
            )


def load_density_csv(path, K, N):
    """Parse a `t,h` CSV into a WeightedInterval. Rejects malformed input."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [c.strip() for c in header[:2]] != ["t", "h"]:
                raise ConfigError(f"{path}: expected header 't,h'")
            rows = [(float(r[0]), float(r[1])) for r in reader if r]
    except (OSError, ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: unreadable density file ({exc})") from exc
    if len(rows) < 16:
        raise ConfigError(f"{path}: need at least 16 rows, got {len(rows)}")
    t = np.array([r[0] for r in rows])
    h = np.array([r[1] for r in rows])
    if np.any(np.diff(t) <= 0):
        raise ConfigError(f"{path}: t column must be strictly increasing")
    if np.any(h < 0):
        raise ConfigError(f"{path}: negative density value")
    grid = Grid(D=float(t[-1]), n=len(t) - 1, nodes=t)
    return WeightedInterval(grid=grid, h=h, K=float(K), N=float(N))


# ---------------------------------------------------------------------------
# sine-power integrals

# Coefficients of the small-x series of int_0^x sin^{N-1}: x^N/N - (N-1)x^{N+2}/(6(N+2)) + c4 x^{N+4}/(N+4)
def _sinpow_series(N, x):
    c4 = (N - 1) * (N - 2) / 72.0 + (N - 1) / 120.0
    return x ** N / N - (N - 1) * x ** (N + 2) / (6 * (N + 2)) + c4 * x ** (N + 4) / (N + 4)


def omega(N):
    """omega_N = int_0^pi sin^{N-1} = B(N/2, 1/2), closed form."""
    return float(beta_fn(N / 2.0, 0.5))


def omega_quad(N):
    """omega_N by adaptive quadrature (relative tolerance 1e-12)."""
    val, _ = quad(lambda t: math.sin(t) ** (N - 1), 0.0, math.pi,
                  epsabs=0.0, epsrel=1e-12, limit=200)
    return val


def sinpow_cum(N, x):
    """S_N(x) = int_0^x sin^{N-1} t dt on [0, pi], via the incomplete beta.

    Vectorized; switches to the series below x = 1e-5 where the beta ratio
    loses relative accuracy.
    """
    x = np.asarray(x, dtype=float)
    w = omega(N)
    lo = np.minimum(x, np.pi / 2)
    hi = np.maximum(x, np.pi / 2)
    s_lo = 0.5 * w * betainc(N / 2.0, 0.5, np.sin(lo) ** 2)
    s_hi = w - 0.5 * w * betainc(N / 2.0, 0.5, np.sin(hi) ** 2)
    out = np.where(x <= np.pi / 2, s_lo, s_hi)
    small = x < 1e-5
    if np.any(small):
        out = np.where(small, _sinpow_series(N, np.maximum(x, 0.0)), out)
    tail = x > np.pi - 1e-5
    if np.any(tail):
        out = np.where(tail, w - _sinpow_series(N, np.maximum(np.pi - x, 0.0)), out)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# distortion coefficients


@dataclass(frozen=True)
class CoefficientQuery:
    K: float
    N: float
    t: float
    theta: float


def _validate_query(q):
    if not q.N > 1:
        raise ParameterDomainError(f"coefficient dimension N must exceed 1, got {q.N}")
    if not 0.0 <= q.t <= 1.0:
        raise ParameterDomainError(f"interpolation parameter t must lie in [0,1], got {q.t}")
    if q.theta < 0:
        raise ParameterDomainError(f"distance argument theta must be >= 0, got {q.theta}")


def _sigma_raw(K, dim, t, theta):
    # sigma^{(t)}_{K,dim}(theta) for any dim > 0; K <= 0 by sinh/linear extension
    if theta == 0.0:
        return t
    if K > 0.0:
        s = math.sqrt(K / dim)
        if theta * s >= math.pi:
            return math.inf
        return math.sin(t * theta * s) / math.sin(theta * s)
    if K == 0.0:
        return t
    s = math.sqrt(-K / dim)
    return math.sinh(t * theta * s) / math.sinh(theta * s)


def sigma_coeff(q: CoefficientQuery):
    """sigma^{(t)}_{K,N}(theta); +inf on the K > 0, theta >= pi sqrt(N/K) branch."""
    _validate_query(q)
    return _sigma_raw(q.K, q.N, q.t, q.theta)


def tau_coeff(q: CoefficientQuery):
    """tau^{(t)}_{K,N}(theta) = t^{1/N} sigma^{(t)}_{K,N-1}(theta)^{1-1/N}."""
    _validate_query(q)
    sig = _sigma_raw(q.K, q.N - 1.0, q.t, q.theta)
    if math.isinf(sig):
        return math.inf
    if sig == 0.0 or q.t == 0.0:
        return 0.0
    return q.t ** (1.0 / q.N) * sig ** (1.0 - 1.0 / q.N)


# ---------------------------------------------------------------------------
# model density and verification


def model_density(N, grid: Grid) -> WeightedInterval:
    """h_N(t) = sin^{N-1}(t)/omega_N sampled on grid (grid.D <= pi)."""
    wN = omega_quad(N)
    s = np.sin(grid.nodes)
    # sin(pi) evaluates to ~1.2e-16; the density really vanishes at the pole,
    # and a spurious positive value there trips the theta = pi coefficient.
    s[np.abs(grid.nodes - math.pi) < 1e-12] = 0.0
    h = np.clip(s, 0.0, None) ** (N - 1) / wN
    return WeightedInterval(grid=grid, h=h, K=N - 1.0, N=float(N))


@dataclass(frozen=True)
class CdVerdict:
    passed: bool
    witness: tuple  # (x0, x1, t) of the worst violation, or None
    violation: float
    checked: int

    def __bool__(self):
        return self.passed


def _cd_term(sig, hp):
    # h = 0 kills the term even when sigma blows up
    if hp == 0.0:
        return 0.0
    return sig * hp


def cd_check(w: WeightedInterval, sample_pairs=0, tol=1e-8) -> CdVerdict:
    """Verify the CD(K,N) concavity inequality for the density of w.

    Checks h(x_t)^{1/(N-1)} >= sigma^{(t)}(|x1-x0|) h(x1)^{1/(N-1)}
                             + sigma^{(1-t)}(|x1-x0|) h(x0)^{1/(N-1)}
    on a deterministic lattice of node triples plus `sample_pairs`
    quasi-random node triples. All evaluation points are grid nodes: the
    interpolation parameter t is rationalized so that x_t lands on a node,
    because the piecewise-linear interpolant overshoots the concave
    h^{1/(N-1)} inside degenerate end cells and would produce spurious
    failures on the exact model otherwise.
    """
    t_nodes = w.grid.nodes
    N, K = w.N, w.K
    if K > 0:
        dmax = math.pi * math.sqrt((N - 1) / K)
        if w.grid.D - dmax > 1e-9:
            return CdVerdict(False, (0.0, w.grid.D, 1.0), math.inf, 0)
    p = 1.0 / (N - 1.0)
    hp = np.asarray(w.h, dtype=float) ** p
    ncell = len(t_nodes) - 1
    lattice = np.unique(np.round(np.linspace(0, ncell, CD_LATTICE)).astype(int))

    worst = (-math.inf, None)
    checked = 0

    def probe(i0, i1, j):
        nonlocal worst, checked
        x0, x1, xt = t_nodes[i0], t_nodes[i1], t_nodes[j]
        theta = x1 - x0
        lam = (xt - x0) / theta
        s1 = _sigma_raw(K, N - 1.0, lam, theta)
        s0 = _sigma_raw(K, N - 1.0, 1.0 - lam, theta)
        rhs = _cd_term(s1, hp[i1]) + _cd_term(s0, hp[i0])
        violation = rhs - hp[j]
        checked += 1
        if violation > worst[0]:
            worst = (violation, (x0, x1, lam))

    for a in range(len(lattice)):
        for b in range(a + 1, len(lattice)):
            i0, i1 = int(lattice[a]), int(lattice[b])
            if i1 - i0 < 2:
                continue
            inner = [int(j) for j in lattice if i0 < j < i1]
            mid = (i0 + i1) // 2
            if mid not in inner and i0 < mid < i1:
                inner.append(mid)
            for j in inner:
                probe(i0, i1, j)

    # quasi-random extras: Kronecker sequence on (i0, i1, j) index triples
    for k in range(int(sample_pairs)):
        f0 = (0.5 + (k + 1) * math.sqrt(2.0)) % 1.0
        f1 = (0.5 + (k + 1) * math.sqrt(3.0)) % 1.0
        f2 = (0.5 + (k + 1) * math.sqrt(5.0)) % 1.0
        i0 = int(f0 * (ncell - 1))
        i1 = min(i0 + 2 + int(f1 * (ncell - i0 - 1)), ncell)
        if i1 - i0 < 2:
            continue
        j = i0 + 1 + int(f2 * (i1 - i0 - 1))
        probe(i0, i1, j)

    violation, witness = worst
    if violation > tol:
        return CdVerdict(False, witness, float(violation), checked)
    return CdVerdict(True, None, float(max(violation, 0.0)), checked)


def cd_check_differential(w: WeightedInterval, tol=None) -> CdVerdict:
    """Differential form: (N-1)(h^{1/(N-1)})''/h^{1/(N-1)} <= -K + tol.

    Second-order central differences at interior nodes. A density that
    satisfies the inequality with equality (the model) leaves a scheme
    residual of (N-1)*step^2/12 on the violating side, so the default
    tolerance scales with the grid instead of being a fixed constant.
    """
    if tol is None:
        tol = max(1e-6, 0.25 * (w.N - 1.0) * w.grid.max_step**2)
    t = w.grid.nodes
    h = w.h
    if np.any(h[1:-1] <= 0):
        raise DegenerateDensityError("density vanishes at an interior node")
    phi = h ** (1.0 / (w.N - 1.0))
    dl = np.diff(t)[:-1]
    dr = np.diff(t)[1:]
    phi2 = 2.0 * ((phi[2:] - phi[1:-1]) / dr - (phi[1:-1] - phi[:-2]) / dl) / (dl + dr)
    lhs = (w.N - 1.0) * phi2 / phi[1:-1]
    resid = lhs + w.K  # must be <= tol
    i = int(np.argmax(resid))
    worst = float(resid[i])
    if worst > tol:
        return CdVerdict(False, (float(t[i + 1]), float(t[i + 1]), 0.0), worst, len(resid))
    return CdVerdict(True, None, worst, len(resid))


# ---------------------------------------------------------------------------
# generation


def _rk4_cosine_flow(t, aa, w0, wp0, substeps=4):
    # integrates w'' = -(1 + a) w with a frozen per cell (aa holds left values)
    n = len(t) - 1
    w = np.empty(n + 1)
    wp = np.empty(n + 1)
    w[0], wp[0] = w0, wp0
    for i in range(n):
        dt = (t[i + 1] - t[i]) / substeps
        y, yp = w[i], wp[i]
        c = -(1.0 + aa[i])
        for _ in range(substeps):
            k1y, k1p = yp, c * y
            k2y, k2p = yp + 0.5 * dt * k1p, c * (y + 0.5 * dt * k1y)
            k3y, k3p = yp + 0.5 * dt * k2p, c * (y + 0.5 * dt * k2y)
            k4y, k4p = yp + dt * k3p, c * (y + dt * k3y)
            y = y + dt / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
            yp = yp + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        w[i + 1] = y
        wp[i + 1] = yp
    return w


def generate_cd_density(N, seed, grid: Grid, excess=None) -> WeightedInterval:
    """Seeded CD(N-1, N) density on grid via w'' = -(1 + a(t)) w, h = w^{N-1}.

    With excess=None, a(t) is a seeded piecewise-constant excess whose levels
    are capped so the solution stays positive; if it still hits zero the
    levels shrink by 0.7 per retry. An explicit node-sampled `excess` array
    integrates from the sine-matching start (w, w') = (0, 1) with no retry.
    Deterministic per seed.
    """
    if grid.D >= math.pi:
        raise ParameterDomainError("generator needs D < pi")
    t = grid.nodes
    D = grid.D

    if excess is not None:
        aa = np.asarray(excess, dtype=float)
        if len(aa) != len(t):
            raise ParameterDomainError("excess must be sampled on grid nodes")
        if np.any(aa < 0):
            raise ParameterDomainError("excess must be non-negative")
        w = _rk4_cosine_flow(t, aa, 0.0, 1.0)
        if np.any(w[1:] <= 0):
            raise DegenerateDensityError(
                "solution hit zero before D; try a smaller interval",
                suggested_D=0.9 * D,
            )
        h = w ** (N - 1.0)
        h /= np.trapezoid(h, t)
        return WeightedInterval(grid=grid, h=h, K=N - 1.0, N=float(N))

    rng = np.random.default_rng(seed)
    margin = 0.02 * (math.pi - D) + 1e-3
    avail = math.pi - margin - D
    phase = rng.uniform(0.1, 0.6) * avail
    budget = math.pi - margin - phase  # total allowed advance of the phase
    rho = budget / D
    amax = max(rho * rho - 1.0, 0.0)
    pieces = 6
    edges = np.concatenate([[0.0], np.sort(rng.uniform(0.0, D, pieces - 1)), [D]])
    levels0 = rng.uniform(0.0, amax, pieces)

    scale = 1.0
    for _ in range(40):
        levels = levels0 * scale
        aa = np.zeros(len(t))
        for j in range(pieces):
            aa[(t >= edges[j]) & (t < edges[j + 1])] = levels[j]
        aa[-1] = levels[-1]
        w = _rk4_cosine_flow(t, aa, math.sin(phase), math.cos(phase))
        if np.all(w > 0):
            h = w ** (N - 1.0)
            h /= np.trapezoid(h, t)
            return WeightedInterval(grid=grid, h=h, K=N - 1.0, N=float(N))
        scale *= 0.7
    raise DegenerateDensityError(
        "no positive solution after 40 retries; try a smaller interval",
        suggested_D=0.9 * D,
    )


# ---------------------------------------------------------------------------
# envelope and quadrature


@dataclass(frozen=True)
class EnvelopeReport:
    lower_ok: bool
    upper_ok: bool
    n_lower_violations: int
    n_upper_violations: int
    sup_deviation: float
    windowed_deviation: float  # sup over [0,r] u [pi-r, D] of |h-h_N|/(r^{N-2} eps)
    eps: float


def envelope_check(w: WeightedInterval, r=None) -> EnvelopeReport:
    """Two-sided envelope of h against the model h_N for diameter D = pi - eps.

    Lower: omega_N/(omega_N lam_D + eps) * min(h_N(t), h_N(t+eps)) <= h(t);
    upper: h(t) <= omega_N/(omega_N - eps) * max(h_N(t), h_N(t+eps)), checked
    at interior nodes. Requires mass 1.
    """
    if abs(w.total_mass - 1.0) > 1e-6:
        raise NormalizationError(f"envelope bounds need mass 1, got {w.total_mass}")
    t = w.grid.nodes
    N = w.N
    eps = max(math.pi - w.grid.D, 0.0)
    wN = omega(N)
    hN = np.sin(t) ** (N - 1) / wN
    hNe = np.sin(np.minimum(t + eps, math.pi)) ** (N - 1) / wN
    lamD = float(sinpow_cum(N, w.grid.D)) / wN
    lo = (wN / (wN * lamD + eps)) * np.minimum(hN, hNe)
    hi = (wN / (wN - eps)) * np.maximum(hN, hNe)
    inner = slice(1, -1)
    n_lo = int(np.sum(w.h[inner] < lo[inner] - 1e-12))
    n_hi = int(np.sum(w.h[inner] > hi[inner] + 1e-12))
    sup_dev = float(np.max(np.abs(w.h - hN)))
    windowed = 0.0
    if r is not None and eps > 0.0:
        mask = (t <= r) | (t >= math.pi - r)
        if np.any(mask):
            windowed = float(np.max(np.abs(w.h - hN)[mask]) / (r ** (N - 2.0) * eps))
    return EnvelopeReport(
        lower_ok=n_lo == 0,
        upper_ok=n_hi == 0,
        n_lower_violations=n_lo,
        n_upper_violations=n_hi,
        sup_deviation=sup_dev,
        windowed_deviation=windowed,
        eps=eps,
    )


def integrate(w: WeightedInterval, f, rule="trapezoid"):
    """int f h dt over the grid; rule is 'trapezoid' (default) or 'simpson'."""
    f = np.asarray(f, dtype=float)
    if len(f) != len(w.grid.nodes):
        raise ValueError("sample count mismatch between f and grid")
    if rule == "trapezoid":
        return float(np.trapezoid(f * w.h, w.grid.nodes))
    if rule == "simpson":
        return float(simpson(f * w.h, x=w.grid.nodes))
    raise ValueError(f"unknown quadrature rule {rule!r}")
