"""Discrete ray-family simulator for the localization pipeline.

A RayFamily is an explicit disintegration: weighted 1-D CD densities with
per-ray functions u_i, orthogonal-energy densities e_i, and pole offsets.
Every inequality of the globalization chain is computed on it, from the
global deficit ledger through Chebyshev selection of long rays to the final
assembly against sqrt(N+1) cos of the suspension distance.

All reductions over rays are plain ordered folds, so results are bit-stable
regardless of how per-ray work is scheduled.
"""
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    NonCDInputError,
    NormalizationError,
    ParameterDomainError,
    UndefinedQuotientError,
)
from .measures import Grid, WeightedInterval, load_density_csv, model_density
from .spectral import asymptotic_rate_constant

SCHEMA = "rayfam-v1"


def default_beta(N):
    return 3.0 * N / (4.0 * N + 2.0)


def default_gamma(N):
    return N / (4.0 * N + 2.0)


def final_exponent(N):
    return 1.0 / (8.0 * N + 4.0)


@dataclass(frozen=True, eq=False)
class Ray:
    """One needle: weight, unit-mass CD density, function and energy samples.

    a and b are the start/end offsets of the needle from the two poles in
    suspension coordinates; the needle occupies [a, a + D].
    """

    weight: float
    w: WeightedInterval
    u: np.ndarray
    e: np.ndarray
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "e", np.asarray(self.e, dtype=float))
        n = len(self.w.grid.nodes)
        if len(self.u) != n or len(self.e) != n:
            raise ParameterDomainError("u and e must be sampled on the ray grid")
        if np.any(self.e < 0):
            raise ParameterDomainError("orthogonal energy density must be >= 0")
        if self.weight <= 0:
            raise ParameterDomainError("ray weights must be positive")
        if self.a < 0 or self.b < 0:
            raise ParameterDomainError("pole offsets must be >= 0")
        if self.w.grid.D > math.pi + 1e-12:
            raise ParameterDomainError("ray length cannot exceed pi")
        if abs(self.w.total_mass - 1.0) > 1e-6:
            raise NormalizationError("ray densities must have unit mass")


@dataclass(frozen=True, eq=False)
class RayFamily:
    N: float
    rays: tuple
    unspanned_mass: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "rays", tuple(self.rays))
        if not self.N > 1:
            raise ParameterDomainError("dimension parameter N must exceed 1")
        if not self.rays:
            raise ParameterDomainError("family needs at least one ray")
        if self.unspanned_mass < 0:
            raise ParameterDomainError("unspanned mass must be >= 0")
        total = math.fsum(r.weight for r in self.rays) + self.unspanned_mass
        if abs(total - 1.0) > 1e-9:
            raise NormalizationError(
                f"ray weights + unspanned mass must sum to 1, got {total!r}"
            )

    @property
    def weights(self):
        return np.array([r.weight for r in self.rays])

    def max_step(self):
        return max(r.w.grid.max_step for r in self.rays)


def _ray_mean(ray):
    t = ray.w.grid.nodes
    return float(np.trapezoid(ray.w.h * ray.u, t) / ray.w.total_mass)


def _ray_moment(ray, f):
    t = ray.w.grid.nodes
    return float(np.trapezoid(ray.w.h * f, t) / ray.w.total_mass)


def normalize(f: RayFamily) -> RayFamily:
    """Recentre each u_i to zero m_i-mean and rescale u to unit global L2(m).

    Idempotent by a deadband: when every per-ray mean is below
    10 max_step^2 (relative to max |u_i|) and the global norm is within 1e-7
    of 1, the family is returned unchanged (the same object), so rigid
    fixtures are exact fixed points and normalize(normalize(f)) is
    normalize(f) bitwise.
    """
    band = 10.0 * f.max_step() ** 2
    umax = max((float(np.max(np.abs(r.u))) for r in f.rays), default=0.0)
    if umax == 0.0:
        raise NormalizationError("all ray functions are identically zero")
    means = [_ray_mean(r) for r in f.rays]
    norm2 = math.fsum(
        r.weight * _ray_moment(r, r.u * r.u) for r in f.rays
    )
    if all(abs(mu) <= band * umax for mu in means) and abs(norm2 - 1.0) <= 1e-7:
        return f

    centred = [r.u - mu for r, mu in zip(f.rays, means)]
    norm2 = math.fsum(
        r.weight * _ray_moment(r, u * u) for r, u in zip(f.rays, centred)
    )
    if norm2 <= 0.0:
        raise NormalizationError("family has no u mass after recentring")
    scale = 1.0 / math.sqrt(norm2)
    rays = tuple(
        Ray(weight=r.weight, w=r.w, u=u * scale, e=r.e, a=r.a, b=r.b)
        for r, u in zip(f.rays, centred)
    )
    return RayFamily(N=f.N, rays=rays, unspanned_mass=f.unspanned_mass)


@dataclass
class DeficitLedger:
    """Accumulator threaded through the pipeline; ops fill fields as they go."""

    delta: float
    c: np.ndarray           # per-ray c_q; signs fixed later by per_ray_cosine
    delta_q: np.ndarray     # per-ray deficits, nan where c_q = 0
    Q_long: tuple = None
    cbar: float = None
    variance: float = None
    one_minus_mass: float = None
    beta: float = None
    gamma: float = None
    r: float = None
    final_dist: float = None


def global_deficit(f: RayFamily) -> DeficitLedger:
    """delta = sum_i q_i int(|u_i'|^2 + e_i) dm_i - N, with the per-ray ledger.

    Certifies the localization identity delta >= sum q_i delta_q c_q^2 and the
    orthogonal-energy identity sum q_i int e_i dm_i <= delta; a breach of
    either beyond rounding means the input was not a CD disintegration.
    """
    N = f.N
    c2 = np.array([_ray_moment(r, r.u * r.u) for r in f.rays])
    total = math.fsum(r.weight * v for r, v in zip(f.rays, c2))
    if abs(total - 1.0) > 1e-6:
        raise NormalizationError("family is not normalized; run normalize first")

    grad2 = []
    emass = []
    for r in f.rays:
        t = r.w.grid.nodes
        du = np.gradient(r.u, t, edge_order=2)
        grad2.append(_ray_moment(r, du * du))
        emass.append(_ray_moment(r, r.e))
    grad2 = np.array(grad2)
    emass = np.array(emass)
    weights = f.weights

    delta = math.fsum(q * (g + e) for q, g, e in zip(weights, grad2, emass)) - N
    c = np.sqrt(c2)
    delta_q = np.full(len(f.rays), np.nan)
    pos = c > 0
    delta_q[pos] = grad2[pos] / c2[pos] - N

    localized = math.fsum(
        q * d * cc for q, d, cc in zip(weights[pos], delta_q[pos], c2[pos])
    )
    # delta - localized = sum q int e + N (sum q c^2 - 1) identically, so the
    # normalization drift allowed by the deadband must be credited here.
    if delta - N * (total - 1.0) < localized - 1e-10:
        raise NonCDInputError(
            f"deficit {delta} below localized sum {localized}: not a CD family"
        )
    etotal = math.fsum(q * e for q, e in zip(weights, emass))
    if etotal > delta + 1e-6:
        raise NonCDInputError(
            f"orthogonal energy {etotal} exceeds deficit {delta}"
        )
    return DeficitLedger(delta=float(delta), c=c, delta_q=delta_q)


@dataclass(frozen=True)
class LongRayReport:
    Q_long: tuple
    beta: float
    threshold: float       # delta^beta cut on per-ray deficits
    excluded_c2: float     # sum of q c^2 over excluded rays
    chebyshev_bound: float
    chebyshev_ok: bool
    long_c2: float
    max_length_gap: float  # max over Q_long of pi - D_i
    length_bound: float    # (delta^beta / C_N)^{1/N}


def select_long_rays(f: RayFamily, ledger: DeficitLedger, beta=None) -> LongRayReport:
    """Q_long = {c_q > 0, delta_q <= delta^beta}, with Chebyshev certificates.

    The mass certificate is arithmetic given the ledger. The length
    certificate (pi - D_i)^N <= delta^beta / C_N comes from the improved
    spectral gap applied on each long ray; a long ray breaking it cannot
    carry a CD density and raises NonCDInputError.
    """
    N = f.N
    if beta is None:
        beta = default_beta(N)
    if not 0 < beta < 1:
        raise ParameterDomainError("need 0 < beta < 1")
    delta = ledger.delta
    weights = f.weights
    c = ledger.c
    c2 = c * c

    if delta <= 0:
        # rigid path: every ray must genuinely reach both poles
        gaps = [math.pi - r.w.grid.D for r in f.rays]
        if max(gaps) > 1e-6:
            raise NonCDInputError(
                "nonpositive deficit with a short ray: not a CD family"
            )
        Q_long = tuple(i for i in range(len(f.rays)) if c[i] > 0)
        long_c2 = math.fsum(weights[i] * c2[i] for i in Q_long)
        ledger.Q_long = Q_long
        ledger.beta = float(beta)
        return LongRayReport(
            Q_long=Q_long, beta=float(beta), threshold=0.0, excluded_c2=0.0,
            chebyshev_bound=0.0, chebyshev_ok=True, long_c2=float(long_c2),
            max_length_gap=float(max(gaps)), length_bound=0.0,
        )

    threshold = delta ** beta
    Q_long = tuple(
        i for i in range(len(f.rays))
        if c[i] > 0 and ledger.delta_q[i] <= threshold
    )
    excluded = [i for i in range(len(f.rays)) if i not in set(Q_long)]
    excluded_c2 = math.fsum(weights[i] * c2[i] for i in excluded)
    long_c2 = math.fsum(weights[i] * c2[i] for i in Q_long)

    # Markov: the long rays may carry slightly negative delta_q from rounding,
    # which loosens the budget; the certificate keeps that slack explicit.
    long_contrib = math.fsum(
        weights[i] * ledger.delta_q[i] * c2[i] for i in Q_long
    )
    slack = (1e-10 + max(0.0, -long_contrib)) / threshold
    bound = delta ** (1.0 - beta) + slack
    ok = excluded_c2 <= bound
    if not ok:
        raise NonCDInputError(
            f"Chebyshev certificate failed: {excluded_c2} > {bound}"
        )

    length_bound = (threshold / asymptotic_rate_constant(N)) ** (1.0 / N)
    gaps = [math.pi - f.rays[i].w.grid.D for i in Q_long]
    max_gap = max(gaps) if gaps else 0.0
    if max_gap > length_bound * (1.0 + 1e-9) + 1e-12:
        raise NonCDInputError(
            f"long ray with diameter gap {max_gap} exceeds CD length bound "
            f"{length_bound}"
        )
    ledger.Q_long = Q_long
    ledger.beta = float(beta)
    return LongRayReport(
        Q_long=Q_long, beta=float(beta), threshold=float(threshold),
        excluded_c2=float(excluded_c2), chebyshev_bound=float(bound),
        chebyshev_ok=bool(ok), long_c2=float(long_c2),
        max_length_gap=float(max_gap), length_bound=float(length_bound),
    )


@dataclass(frozen=True)
class BadSetReport:
    value: float        # energy of u outside the long-ray span
    bound: float        # (N+1) delta^{1-beta} + 1e-10, when delta <= 1
    ok: bool


def bad_set_energy(f: RayFamily, ledger: DeficitLedger, Q_long=None) -> BadSetReport:
    """Energy carried by excluded rays; bounded by (N+1) delta^{1-beta}."""
    if Q_long is None:
        Q_long = ledger.Q_long
    if Q_long is None:
        raise ParameterDomainError("run select_long_rays first")
    beta = ledger.beta if ledger.beta is not None else default_beta(f.N)
    sel = set(Q_long)
    value = 0.0
    for i, r in enumerate(f.rays):
        if i in sel:
            continue
        t = r.w.grid.nodes
        du = np.gradient(r.u, t, edge_order=2)
        value += r.weight * _ray_moment(r, du * du + r.e)
    delta_eff = max(ledger.delta, 0.0)
    if delta_eff > 1.0:
        # the (N+1) delta^{1-beta} bound is only claimed in the delta <= 1 regime
        return BadSetReport(value=float(value), bound=None, ok=True)
    bound = (f.N + 1.0) * delta_eff ** (1.0 - beta) + 1e-10
    ok = value <= bound
    if not ok:
        raise NonCDInputError(
            f"bad-set energy {value} exceeds (N+1) delta^(1-beta) = {bound}"
        )
    return BadSetReport(value=float(value), bound=float(bound), ok=bool(ok))


@dataclass(frozen=True)
class PerRayCosineReport:
    Q_long: tuple
    c: np.ndarray       # sign-fixed c_q (non-long rays keep nonnegative c)
    dist: np.ndarray    # per-ray L2(m_q) distance of u_q/|c_q| to the cosine
    max_dist: float


def per_ray_cosine(f: RayFamily, Q_long) -> PerRayCosineReport:
    """Distance of each long-ray profile to +-sqrt(N+1) cos, fixing sign(c_q).

    The comparison is in the ray's own coordinate: the 1-D stability theorem
    is applied needle by needle, so the target is always cos(t) on [0, D_i].
    """
    Q_long = tuple(Q_long)
    if not Q_long:
        raise ParameterDomainError("Q_long is empty")
    amp = math.sqrt(f.N + 1.0)
    c = np.array([math.sqrt(_ray_moment(r, r.u * r.u)) for r in f.rays])
    dist = np.full(len(f.rays), np.nan)
    for i in Q_long:
        r = f.rays[i]
        if c[i] == 0.0:
            raise UndefinedQuotientError(f"long ray {i} carries no u mass")
        t = r.w.grid.nodes
        v = r.u / c[i]
        best = math.inf
        best_sign = 1.0
        for s in (1.0, -1.0):
            d2 = _ray_moment(r, (v - s * amp * np.cos(t)) ** 2)
            if d2 < best:
                best = d2
                best_sign = s
        c[i] *= best_sign
        dist[i] = math.sqrt(max(best, 0.0))
    longs = [dist[i] for i in Q_long]
    return PerRayCosineReport(
        Q_long=Q_long, c=c, dist=dist, max_dist=float(max(longs)),
    )


def _check_var_params(N, beta, gamma):
    if not 0 < gamma < beta < 1:
        raise ParameterDomainError("need 0 < gamma < beta < 1")
    if not gamma < N * (1.0 - beta) / (N - 1.0):
        raise ParameterDomainError("need gamma < N(1-beta)/(N-1)")


@dataclass(frozen=True)
class VarianceReport:
    variance: float
    cbar: float
    envelope: float
    ratio: float
    flagged: bool
    beta: float
    gamma: float


def variance_bound(f: RayFamily, ledger: DeficitLedger, beta=None, gamma=None) -> VarianceReport:
    """Var of sign-fixed c_q over long rays against the three-term envelope
    delta^{3 gamma/N} + delta^{1-beta-gamma+gamma/N} + delta^{(beta-gamma) min(2/N, 1)}."""
    N = f.N
    if beta is None:
        beta = ledger.beta if ledger.beta is not None else default_beta(N)
    if gamma is None:
        gamma = default_gamma(N)
    _check_var_params(N, beta, gamma)
    if ledger.Q_long is None:
        raise ParameterDomainError("run select_long_rays first")
    weights = f.weights
    qmass = math.fsum(weights[i] for i in ledger.Q_long)
    if qmass <= 0:
        raise ParameterDomainError("long rays carry no measure")
    cbar = math.fsum(weights[i] * ledger.c[i] for i in ledger.Q_long) / qmass
    var = math.fsum(
        weights[i] * (ledger.c[i] - cbar) ** 2 for i in ledger.Q_long
    ) / qmass

    d = max(ledger.delta, 0.0)
    envelope = (
        d ** (3.0 * gamma / N)
        + d ** (1.0 - beta - gamma + gamma / N)
        + d ** ((beta - gamma) * min(2.0 / N, 1.0))
    )
    if var <= 1e-25:
        ratio = 0.0
    elif envelope == 0.0:
        ratio = math.inf
    else:
        ratio = var / envelope
    flagged = var > 10.0 * envelope + 1e-10
    ledger.cbar = float(cbar)
    ledger.variance = float(var)
    ledger.beta = float(beta)
    ledger.gamma = float(gamma)
    ledger.r = float(d ** (gamma / N))
    return VarianceReport(
        variance=float(var), cbar=float(cbar), envelope=float(envelope),
        ratio=float(ratio), flagged=bool(flagged), beta=float(beta),
        gamma=float(gamma),
    )


@dataclass(frozen=True)
class MassReport:
    lhs: float                # (1 - q(Q_long))^2
    one_minus_mass: float
    envelope: float
    ratio: float
    flagged: bool
    unspanned_mass: float
    unspanned_envelope: float
    unspanned_flagged: bool
    beta: float
    gamma: float


def long_mass_bound(f: RayFamily, ledger: DeficitLedger, beta=None, gamma=None) -> MassReport:
    """(1 - q(Q_long))^2 against delta^{2 gamma/N} + delta^{(beta-gamma)/N}
    + delta^{1-beta-gamma}; also the unspanned-mass envelope."""
    N = f.N
    if beta is None:
        beta = ledger.beta if ledger.beta is not None else default_beta(N)
    if gamma is None:
        gamma = ledger.gamma if ledger.gamma is not None else default_gamma(N)
    if not 0 < gamma < min(beta, 1.0 - beta):
        raise ParameterDomainError("need 0 < gamma < min(beta, 1 - beta)")
    if ledger.Q_long is None:
        raise ParameterDomainError("run select_long_rays first")
    weights = f.weights
    qmass = math.fsum(weights[i] for i in ledger.Q_long)
    one_minus = 1.0 - qmass
    lhs = one_minus * one_minus

    d = max(ledger.delta, 0.0)
    envelope = (
        d ** (2.0 * gamma / N)
        + d ** ((beta - gamma) / N)
        + d ** (1.0 - beta - gamma)
    )
    if lhs <= 1e-25:
        ratio = 0.0
    elif envelope == 0.0:
        ratio = math.inf
    else:
        ratio = lhs / envelope
    flagged = lhs > 10.0 * envelope + 1e-10

    unsp_env = (
        d ** (gamma / N)
        + d ** ((beta - gamma) / (2.0 * N))
        + d ** ((1.0 - beta - gamma) / 2.0)
    )
    unsp_flag = f.unspanned_mass > 10.0 * unsp_env + 1e-10
    ledger.one_minus_mass = float(one_minus)
    return MassReport(
        lhs=float(lhs), one_minus_mass=float(one_minus),
        envelope=float(envelope), ratio=float(ratio), flagged=bool(flagged),
        unspanned_mass=float(f.unspanned_mass),
        unspanned_envelope=float(unsp_env), unspanned_flagged=bool(unsp_flag),
        beta=float(beta), gamma=float(gamma),
    )


# ---------------------------------------------------------------------------
# suspension geometry and the final assembly


def _pl_cum(nodes, h, s):
    """Integral of the piecewise-linear interpolant of h over [0, s], exact."""
    s = float(min(max(s, nodes[0]), nodes[-1]))
    steps = 0.5 * np.diff(nodes) * (h[:-1] + h[1:])
    i = int(np.searchsorted(nodes, s, side="right") - 1)
    i = min(i, len(nodes) - 2)
    ds = s - nodes[i]
    hs = h[i] + (h[i + 1] - h[i]) * (ds / (nodes[i + 1] - nodes[i]))
    return float(math.fsum(steps[:i]) + 0.5 * ds * (h[i] + hs))


@dataclass(frozen=True, eq=False)
class SuspensionGeometry:
    """Pole placement of a ray family plus the ball-measure rule.

    The reference model measure is sampled on a uniform [0, pi] grid with the
    same resolution as the finest ray and integrated by the same
    piecewise-linear rule, so rigid families compare bitwise against it.
    """

    N: float
    weights: np.ndarray
    a: np.ndarray
    b: np.ndarray
    D: np.ndarray
    unspanned_mass: float
    rays: tuple
    model: WeightedInterval

    @classmethod
    def from_family(cls, f: RayFamily) -> "SuspensionGeometry":
        a = np.array([r.a for r in f.rays])
        b = np.array([r.b for r in f.rays])
        D = np.array([r.w.grid.D for r in f.rays])
        if np.any(a + D + b > math.pi + 1e-9):
            raise ParameterDomainError("ray extent a + D + b exceeds pi")
        n_ref = max(r.w.grid.n for r in f.rays)
        m = model_density(f.N, Grid.uniform(math.pi, n_ref))
        model = WeightedInterval(
            grid=m.grid, h=m.h / m.total_mass, K=m.K, N=m.N
        )
        return cls(
            N=f.N, weights=f.weights, a=a, b=b, D=D,
            unspanned_mass=f.unspanned_mass, rays=f.rays, model=model,
        )

    @property
    def pole_distance(self):
        return float(min(np.min(self.a + self.D + self.b), math.pi))

    @property
    def delta_pole(self):
        # per-ray length deficit: each renormalized truncated ray satisfies
        # m_i([0,x])/m_i-mass <= m_N([0, x + (pi - D_i)])
        return float(np.max(math.pi - self.D))

    def ball(self, r):
        """m(B_r(P_N)) under the suspension rule."""
        total = self.unspanned_mass if r >= self.pole_distance else 0.0
        for q, ray, a, D in zip(self.weights, self.rays, self.a, self.D):
            reach = min(max(r - a, 0.0), D)
            if reach > 0:
                nodes = ray.w.grid.nodes
                total += q * _pl_cum(nodes, ray.w.h, reach) / ray.w.total_mass
        return float(total)

    def model_ball(self, r):
        """m_N([0, r]) by the same piecewise-linear rule as ball()."""
        r = min(max(r, 0.0), math.pi)
        if r <= 0:
            return 0.0
        nodes = self.model.grid.nodes
        return float(_pl_cum(nodes, self.model.h, r) / self.model.total_mass)


@dataclass(frozen=True)
class VolumeReport:
    r: float
    ball: float
    lower: float
    upper: float
    ok_lower: bool
    ok_upper: bool


def volume_control(geometry: SuspensionGeometry, r) -> VolumeReport:
    """m_N([0,r]) <= m(B_r(P_N)) <= m_N([0, r + delta_pole]), slack 1e-9."""
    if not 0 < r < geometry.pole_distance:
        raise ParameterDomainError(
            f"radius must lie in (0, {geometry.pole_distance})"
        )
    ball = geometry.ball(r)
    lower = geometry.model_ball(r)
    upper = geometry.model_ball(min(r + geometry.delta_pole, math.pi))
    ok_lower = ball >= lower - 1e-9
    ok_upper = ball <= upper + 1e-9
    if not (ok_lower and ok_upper):
        raise NonCDInputError(
            f"ball measure {ball} at r={r} outside [{lower}, {upper}]"
        )
    return VolumeReport(r=float(r), ball=ball, lower=lower, upper=upper,
                        ok_lower=ok_lower, ok_upper=ok_upper)


@dataclass(frozen=True)
class PoleReport:
    max_start: float   # max over Q_long of a_i
    max_end: float     # max over Q_long of pi - (a_i + D_i)
    threshold: float   # 10 delta^{beta/N} + 1e-10 when delta is supplied
    flagged: bool


def pole_concentration(geometry: SuspensionGeometry, Q_long, delta=None, beta=None) -> PoleReport:
    """Offsets of long-ray endpoints from the poles; scaling diagnostic."""
    Q_long = tuple(Q_long)
    if not Q_long:
        raise ParameterDomainError("Q_long is empty")
    max_start = max(float(geometry.a[i]) for i in Q_long)
    max_end = max(float(math.pi - geometry.a[i] - geometry.D[i]) for i in Q_long)
    threshold = math.nan
    flagged = False
    if delta is not None:
        if beta is None:
            beta = default_beta(geometry.N)
        d = max(delta, 0.0)
        threshold = 10.0 * d ** (beta / geometry.N) + 1e-10
        flagged = max(max_start, max_end) > threshold
    return PoleReport(max_start=max_start, max_end=max_end,
                      threshold=threshold, flagged=bool(flagged))


@dataclass(frozen=True)
class AssembleReport:
    final_dist: float
    final_dist_sq: float
    delta: float
    eta: float         # target exponent 1/(8N+4)
    ratio: float       # final_dist / delta^eta
    sign: float        # global sign applied to u


def assemble_main(f: RayFamily, geometry: SuspensionGeometry, ledger: DeficitLedger = None) -> AssembleReport:
    """||u - sqrt(N+1) cos(d(P_N, .))||_{L2(m)} with the theorem's sign choice.

    In suspension coordinates ray i occupies [a_i, a_i + D_i], so its
    contribution compares u_i(t) with sqrt(N+1) cos(t + a_i); the unspanned
    set carries u = 0 and contributes its mass times the model average of
    (N+1) cos^2.
    """
    if geometry is None:
        raise ParameterDomainError("geometry with start offsets is required")
    amp = math.sqrt(f.N + 1.0)
    tm = geometry.model.grid.nodes
    cos2_mass = float(
        np.trapezoid(geometry.model.h * np.cos(tm) ** 2, tm)
        / geometry.model.total_mass
    )
    off_ray = f.unspanned_mass * (f.N + 1.0) * cos2_mass

    best = math.inf
    best_sign = 1.0
    for s in (1.0, -1.0):
        acc = off_ray
        for r, a in zip(f.rays, geometry.a):
            t = r.w.grid.nodes
            dev = s * r.u - amp * np.cos(t + a)
            acc += r.weight * _ray_moment(r, dev * dev)
        if acc < best:
            best = acc
            best_sign = s
    final_sq = max(best, 0.0)
    final = math.sqrt(final_sq)

    delta = ledger.delta if ledger is not None else global_deficit(f).delta
    eta = final_exponent(f.N)
    d = max(delta, 0.0)
    if final <= 1e-12:
        ratio = 0.0
    elif d == 0.0:
        ratio = math.inf
    else:
        ratio = final / d ** eta
    if ledger is not None:
        ledger.final_dist = float(final)
    return AssembleReport(
        final_dist=float(final), final_dist_sq=float(final_sq),
        delta=float(delta), eta=float(eta), ratio=float(ratio),
        sign=float(best_sign),
    )


# ---------------------------------------------------------------------------
# rayfam-v1 files


def _build_density(kind, params, N, D, base):
    n = int(params.get("n", 4096))
    if kind == "model":
        if abs(D - math.pi) > 1e-9:
            raise ConfigError("model density requires D = pi")
        w = model_density(N, Grid.uniform(math.pi, n))
    elif kind == "truncated":
        w = model_density(N, Grid.uniform(D, n))
    elif kind == "csv":
        path = params.get("path")
        if not path:
            raise ConfigError("csv density needs a path")
        w = load_density_csv(os.path.join(base, path), K=N - 1.0, N=N)
        if abs(w.grid.D - D) > 1e-9:
            raise ConfigError(
                f"density file spans {w.grid.D}, ray declares D={D}"
            )
    else:
        raise ConfigError(f"unknown density kind {kind!r}")
    return WeightedInterval(grid=w.grid, h=w.h / w.total_mass, K=w.K, N=w.N)


def _build_u(kind, params, N, grid, base):
    t = grid.nodes
    amp = math.sqrt(N + 1.0)
    if kind == "cosine":
        scale = float(params.get("scale", 1.0))
        return scale * amp * np.cos(t)
    if kind == "perturbed":
        scale = float(params.get("scale", 1.0))
        s = float(params.get("s", 0.0))
        return scale * amp * (np.cos(t) + s * np.sin(2.0 * t))
    if kind == "csv":
        path = params.get("path")
        if not path:
            raise ConfigError("csv u needs a path")
        tt, uu = _load_samples_csv(os.path.join(base, path))
        if len(tt) != len(t) or np.max(np.abs(tt - t)) > 1e-9:
            raise ConfigError(f"{path}: samples do not match the ray grid")
        return uu
    raise ConfigError(f"unknown u kind {kind!r}")


def _build_e(kind, params, grid, base):
    if kind == "zero":
        return np.zeros(len(grid.nodes))
    if kind == "const":
        value = float(params.get("value", 0.0))
        if value < 0:
            raise ConfigError("constant orthogonal energy must be >= 0")
        return np.full(len(grid.nodes), value)
    if kind == "csv":
        path = params.get("path")
        if not path:
            raise ConfigError("csv e needs a path")
        tt, ee = _load_samples_csv(os.path.join(base, path))
        if len(tt) != len(grid.nodes) or np.max(np.abs(tt - grid.nodes)) > 1e-9:
            raise ConfigError(f"{path}: samples do not match the ray grid")
        return ee
    raise ConfigError(f"unknown e kind {kind!r}")


def _load_samples_csv(path):
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=float)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"{path}: unreadable samples file ({exc})") from exc
    if data.ndim != 2 or data.shape[1] < 2:
        raise ConfigError(f"{path}: expected two columns")
    return data[:, 0], data[:, 1]


def load_family(path) -> RayFamily:
    """Read a rayfam-v1 JSON family; densities are renormalized to unit mass."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: unreadable family file ({exc})") from exc
    if doc.get("schema") != SCHEMA:
        raise ConfigError(f"{path}: expected schema {SCHEMA!r}")
    base = os.path.dirname(os.path.abspath(path))
    try:
        N = float(doc["N"])
        unspanned = float(doc.get("unspanned_mass", 0.0))
        items = doc["rays"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed family ({exc})") from exc
    if not isinstance(items, list) or not items:
        raise ConfigError(f"{path}: rays must be a non-empty list")
    rays = []
    for k, item in enumerate(items):
        try:
            weight = float(item["weight"])
            D = float(item["D"])
            a = float(item.get("a", 0.0))
            b = float(item.get("b", 0.0))
            dspec = dict(item["density"])
            uspec = dict(item["u"])
            espec = dict(item.get("e", {"kind": "zero"}))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: ray {k} malformed ({exc})") from exc
        w = _build_density(dspec.pop("kind", None), dspec, N, D, base)
        u = _build_u(uspec.pop("kind", None), uspec, N, w.grid, base)
        e = _build_e(espec.pop("kind", None), espec, w.grid, base)
        try:
            rays.append(Ray(weight=weight, w=w, u=u, e=e, a=a, b=b))
        except (ParameterDomainError, NormalizationError) as exc:
            raise ConfigError(f"{path}: ray {k}: {exc}") from exc
    try:
        return RayFamily(N=N, rays=tuple(rays), unspanned_mass=unspanned)
    except (ParameterDomainError, NormalizationError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
