import math

import numpy as np
import pytest

from obatalab.errors import (
    ConfigError,
    DegenerateDensityError,
    NormalizationError,
    ParameterDomainError,
)
from obatalab.measures import (
    CoefficientQuery,
    Grid,
    WeightedInterval,
    _sigma_raw,
    cd_check,
    cd_check_differential,
    envelope_check,
    generate_cd_density,
    integrate,
    load_density_csv,
    model_density,
    omega,
    omega_quad,
    sigma_coeff,
    sinpow_cum,
    tau_coeff,
)
from obatalab.obata1d import truncated_model

# Frozen oracle values (tests/oracles/frozen.txt). Recompute with
# tests/oracles/derived_values.py before touching these.
TAU_1_3_HALF_1 = 0.52174183692850843116
OMEGA_2_5 = 1.74803836952808
LINEAR_WORST = 7.121332  # h(t)=t on [0,1], K=10, N=2, witness (0.05, 1.0, 0.5)


# ---------------------------------------------------------------------------
# grids and densities


def test_grid_uniform_counts_cells():
    g = Grid.uniform(math.pi, 64)
    assert len(g.nodes) == 65
    assert g.nodes[0] == 0.0
    assert g.nodes[-1] == pytest.approx(math.pi, abs=0)


def test_grid_rejects_tiny_and_too_long():
    with pytest.raises(ParameterDomainError):
        Grid.uniform(1.0, 4)
    with pytest.raises(ParameterDomainError):
        Grid.uniform(math.pi + 0.1, 64)


def test_weighted_interval_rejects_negative_density():
    g = Grid.uniform(1.0, 32)
    h = np.ones(33)
    h[5] = -0.01
    with pytest.raises(ParameterDomainError):
        WeightedInterval(grid=g, h=h, K=0.0, N=2.0)


def test_weighted_interval_rejects_small_N():
    g = Grid.uniform(1.0, 32)
    with pytest.raises(ParameterDomainError):
        WeightedInterval(grid=g, h=np.ones(33), K=0.0, N=1.0)


def test_load_density_csv_roundtrip(tmp_path):
    g = Grid.uniform(2.0, 64)
    h = 1.0 + 0.1 * np.cos(g.nodes)
    p = tmp_path / "d.csv"
    p.write_text("t,h\n" + "\n".join(f"{float(t)!r},{float(v)!r}" for t, v in zip(g.nodes, h)))
    w = load_density_csv(p, K=0.0, N=2.0)
    assert np.array_equal(w.grid.nodes, g.nodes)
    assert np.array_equal(w.h, h)


def test_load_density_csv_rejects_garbage(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,h\n0.0,1.0\n0.5,nope\n")
    with pytest.raises(ConfigError):
        load_density_csv(p, K=0.0, N=2.0)
    p.write_text("t,h\n0.0,1.0\n1.0,1.0\n")  # too few rows
    with pytest.raises(ConfigError):
        load_density_csv(p, K=0.0, N=2.0)


# ---------------------------------------------------------------------------
# distortion coefficients


def test_sigma_theta_zero_returns_t():
    q = CoefficientQuery(K=2.0, N=2.0, t=0.5, theta=0.0)
    assert sigma_coeff(q) == 0.5
    # and across a small parameter lattice
    for K in (-1.0, 0.0, 3.0):
        for N in (2.0, 3.5):
            for t in (0.0, 0.25, 1.0):
                assert sigma_coeff(CoefficientQuery(K=K, N=N, t=t, theta=0.0)) == t


def test_sigma_sine_branch_closed_form():
    q = CoefficientQuery(K=2.0, N=2.0, t=0.5, theta=math.pi / 2)
    assert sigma_coeff(q) == pytest.approx(math.sin(math.pi / 4), abs=1e-10)


def test_sigma_infinite_branch():
    q = CoefficientQuery(K=2.0, N=2.0, t=0.5, theta=math.pi)
    assert sigma_coeff(q) == math.inf
    # boundary of the finite branch: theta = pi sqrt(N/K)
    qb = CoefficientQuery(K=10.0, N=2.0, t=0.5, theta=math.pi * math.sqrt(0.2))
    assert sigma_coeff(qb) == math.inf


def test_sigma_nonpositive_K_extension():
    # K = 0 degenerates to the linear interpolant
    assert sigma_coeff(CoefficientQuery(K=0.0, N=2.0, t=0.3, theta=2.0)) == pytest.approx(0.3)
    # K < 0 is the sinh ratio with rate sqrt(-K/N)
    s = math.sqrt(4.0 / 2.0)
    got = sigma_coeff(CoefficientQuery(K=-4.0, N=2.0, t=0.3, theta=1.0))
    assert got == pytest.approx(math.sinh(0.3 * s) / math.sinh(s), rel=1e-12)


def test_sigma_continuous_near_zero_theta():
    q0 = sigma_coeff(CoefficientQuery(K=3.0, N=2.5, t=0.4, theta=1e-9))
    assert q0 == pytest.approx(0.4, abs=1e-9)


def test_coefficient_query_validation():
    with pytest.raises(ParameterDomainError, match="must exceed 1"):
        sigma_coeff(CoefficientQuery(K=1.0, N=0.5, t=0.5, theta=1.0))
    with pytest.raises(ParameterDomainError, match="lie in"):
        sigma_coeff(CoefficientQuery(K=1.0, N=2.0, t=1.5, theta=1.0))
    with pytest.raises(ParameterDomainError, match="theta"):
        tau_coeff(CoefficientQuery(K=1.0, N=2.0, t=0.5, theta=-0.1))


def test_tau_at_t_one_is_one():
    for K, N, theta in ((1.0, 3.0, 1.0), (-2.0, 2.2, 0.7), (0.0, 4.0, 2.0)):
        assert tau_coeff(CoefficientQuery(K=K, N=N, t=1.0, theta=theta)) == pytest.approx(1.0)


def test_tau_at_origin_is_zero():
    assert tau_coeff(CoefficientQuery(K=1.0, N=3.0, t=0.0, theta=0.0)) == 0.0


def test_tau_frozen_value():
    got = tau_coeff(CoefficientQuery(K=1.0, N=3.0, t=0.5, theta=1.0))
    assert got == pytest.approx(TAU_1_3_HALF_1, abs=1e-12)


def test_tau_propagates_infinity():
    assert tau_coeff(CoefficientQuery(K=2.0, N=2.0, t=0.5, theta=math.pi)) == math.inf


# ---------------------------------------------------------------------------
# model density and omega


def test_omega_closed_forms():
    assert omega(2.0) == pytest.approx(2.0, abs=1e-12)
    assert omega(3.0) == pytest.approx(math.pi / 2, abs=1e-12)


def test_omega_fractional_matches_dense_riemann():
    assert omega(2.5) == pytest.approx(OMEGA_2_5, abs=1e-9)
    assert omega_quad(2.5) == pytest.approx(OMEGA_2_5, abs=1e-9)
    assert omega(2.5) == pytest.approx(omega_quad(2.5), abs=1e-12)


def test_sinpow_cum_endpoints():
    assert sinpow_cum(2.0, math.pi) == pytest.approx(omega(2.0), abs=1e-12)
    assert sinpow_cum(3.0, math.pi / 2) == pytest.approx(omega(3.0) / 2, abs=1e-12)
    assert sinpow_cum(2.5, 0.0) == 0.0


def test_model_density_midpoint_value():
    g = Grid.uniform(math.pi, 4096)
    w = model_density(2.0, g)
    assert w.h[2048] == pytest.approx(0.5, abs=1e-12)  # h_2(pi/2) = sin/2
    assert w.h[0] == 0.0 and w.h[-1] == 0.0
    assert w.total_mass == pytest.approx(1.0, abs=1e-6)


def test_model_density_passes_both_checks():
    for N in (2.0, 2.5, 3.0):
        w = model_density(N, Grid.uniform(math.pi, 1024))
        assert cd_check(w).passed
        v = cd_check_differential(w)
        assert v.passed
        # equality case: residual is pure discretization, O(grid^2)
        assert v.violation <= 5e-6


# ---------------------------------------------------------------------------
# cd_check


def test_cd_check_constant_density():
    g = Grid.uniform(1.0, 128)
    w = WeightedInterval(grid=g, h=np.ones(129), K=0.0, N=2.5)
    assert cd_check(w).passed
    assert cd_check_differential(w).passed


def test_cd_check_linear_density_fails():
    g = Grid.uniform(1.0, 256)
    w = WeightedInterval(grid=g, h=g.nodes.copy(), K=10.0, N=2.0)
    v = cd_check(w)
    assert not v.passed
    assert not bool(v)
    assert v.violation >= 1.0
    assert v.witness is not None


def test_cd_check_linear_density_frozen_witness():
    # worst violation from the brute-scan oracle: 7.121332 at (0.05, 1.0, 0.5)
    lam, x0, x1 = 0.5, 0.05, 1.0
    th = x1 - x0
    lhs = x0 + lam * (x1 - x0)
    rhs = _sigma_raw(10.0, 1.0, lam, th) * x1 + _sigma_raw(10.0, 1.0, 1.0 - lam, th) * x0
    assert rhs - lhs == pytest.approx(LINEAR_WORST, abs=1e-5)


def test_cd_check_diameter_guard():
    # K = 10, N = 2 caps the diameter at pi/sqrt(10) ~ 0.99; a 3-long interval
    # fails immediately with the (0, D, 1) witness and no lattice work
    g = Grid.uniform(3.0, 64)
    w = WeightedInterval(grid=g, h=np.ones(65), K=10.0, N=2.0)
    v = cd_check(w)
    assert not v.passed
    assert v.witness == (0.0, 3.0, 1.0)
    assert v.violation == math.inf
    assert v.checked == 0


def test_cd_check_sample_pairs_deterministic():
    w = model_density(2.0, Grid.uniform(math.pi, 512))
    v1 = cd_check(w, sample_pairs=200)
    v2 = cd_check(w, sample_pairs=200)
    assert v1.passed and v2.passed
    assert v1.checked == v2.checked > cd_check(w).checked


# ---------------------------------------------------------------------------
# cd_check_differential


def test_differential_constant_zero_lhs():
    g = Grid.uniform(1.0, 64)
    w = WeightedInterval(grid=g, h=2.0 * np.ones(65), K=0.0, N=3.0)
    v = cd_check_differential(w)
    assert v.passed
    assert v.violation <= 1e-12


def test_differential_convex_exponential_fails():
    # h = exp(t^2): (h^{1/(N-1)})'' > 0 everywhere, so CD(0, 2) fails
    g = Grid.uniform(1.0, 256)
    w = WeightedInterval(grid=g, h=np.exp(g.nodes**2), K=0.0, N=2.0)
    v = cd_check_differential(w)
    assert not v.passed
    assert v.violation > 1.0


def test_differential_rejects_interior_zero():
    g = Grid.uniform(1.0, 256)
    w = WeightedInterval(grid=g, h=np.abs(g.nodes - 0.5), K=0.0, N=2.0)
    with pytest.raises(DegenerateDensityError):
        cd_check_differential(w)


# ---------------------------------------------------------------------------
# generator


def test_generator_deterministic_per_seed():
    g = Grid.uniform(2.9, 512)
    w1 = generate_cd_density(2.0, 5, g)
    w2 = generate_cd_density(2.0, 5, g)
    assert np.array_equal(w1.h, w2.h)
    w3 = generate_cd_density(2.0, 6, g)
    assert not np.array_equal(w1.h, w3.h)


def test_generator_self_certifies():
    for N, seed, D in ((2.0, 1, 2.9), (3.0, 2, 2.5), (2.5, 3, 3.0)):
        w = generate_cd_density(N, seed, Grid.uniform(D, 512))
        assert w.total_mass == pytest.approx(1.0, abs=1e-12)
        assert cd_check(w, tol=1e-8).passed
        assert cd_check_differential(w).passed


def test_generator_zero_excess_recovers_model():
    D = math.pi - 1e-3
    g = Grid.uniform(D, 2048)
    w = generate_cd_density(2.0, 0, g, excess=np.zeros(len(g.nodes)))
    ref = truncated_model(2.0, D, 2048)
    assert np.max(np.abs(w.h - ref.h)) <= 1e-12


def test_generator_piecewise_excess_route():
    # a = 3 on the first half keeps the flow positive on [0, 1.5]
    g = Grid.uniform(1.5, 1024)
    aa = np.where(g.nodes < 0.75, 3.0, 0.0)
    w = generate_cd_density(2.0, 0, g, excess=aa)
    assert np.all(w.h[1:-1] > 0)
    assert cd_check(w).passed


def test_generator_rejects_full_circle():
    with pytest.raises(ParameterDomainError, match="needs D < pi"):
        generate_cd_density(2.0, 0, Grid.uniform(math.pi, 256))


def test_generator_excess_conjugate_point():
    # constant excess 0.3 pushes the conjugate point below D = 2.9
    g = Grid.uniform(2.9, 512)
    with pytest.raises(DegenerateDensityError) as ei:
        generate_cd_density(2.0, 0, g, excess=0.3 * np.ones(len(g.nodes)))
    assert ei.value.suggested_D == pytest.approx(0.9 * 2.9)


def test_generator_excess_validation():
    g = Grid.uniform(2.0, 256)
    with pytest.raises(ParameterDomainError):
        generate_cd_density(2.0, 0, g, excess=np.zeros(10))
    with pytest.raises(ParameterDomainError):
        generate_cd_density(2.0, 0, g, excess=-np.ones(len(g.nodes)))


# ---------------------------------------------------------------------------
# envelope


def test_envelope_exact_model_zero_deviation():
    # raw model output: mass is 1 up to quadrature, deviation from h_N is fp noise
    for n in (1024, 2048, 4096):
        w = model_density(2.0, Grid.uniform(math.pi, n))
        rep = envelope_check(w)
        assert rep.lower_ok and rep.upper_ok
        assert rep.n_lower_violations == 0 and rep.n_upper_violations == 0
        assert rep.sup_deviation <= 1e-12
        assert rep.eps == 0.0


def test_envelope_truncated_sweep_linear_constant():
    # sup|h - h_N| <= C eps with one C across the sweep; the per-eps constant
    # sup/eps only shrinks as eps does
    for N in (2.0, 3.0):
        consts = []
        for eps in (0.04, 0.02, 0.01):
            w = truncated_model(N, math.pi - eps, 2048)
            rep = envelope_check(w)
            assert rep.lower_ok and rep.upper_ok
            consts.append(rep.sup_deviation / eps)
        assert consts[0] <= 0.2
        assert consts[2] <= consts[1] <= consts[0]


def test_envelope_generated_density_bounds_hold():
    w = generate_cd_density(3.0, 4, Grid.uniform(math.pi - 0.02, 2048))
    rep = envelope_check(w, r=0.3)
    assert rep.lower_ok and rep.upper_ok
    assert rep.eps == pytest.approx(0.02)
    assert rep.windowed_deviation > 0.0


def test_envelope_rejects_unnormalized():
    g = Grid.uniform(math.pi, 256)
    w = WeightedInterval(grid=g, h=2.0 * model_density(2.0, g).h, K=1.0, N=2.0)
    with pytest.raises(NormalizationError):
        envelope_check(w)


# ---------------------------------------------------------------------------
# integrate


def test_integrate_probability_mass():
    w = truncated_model(2.0, 3.0, 1024)
    assert integrate(w, np.ones(1025)) == pytest.approx(1.0, abs=1e-10)


def test_integrate_cos_vanishes_on_model():
    w = model_density(3.0, Grid.uniform(math.pi, 4096))
    assert abs(integrate(w, np.cos(w.grid.nodes))) <= 1e-10


def test_integrate_cos_squared_model():
    w = model_density(3.0, Grid.uniform(math.pi, 4096))
    f = np.cos(w.grid.nodes) ** 2
    assert integrate(w, f) == pytest.approx(0.25, abs=1e-10)
    assert integrate(w, f, rule="simpson") == pytest.approx(0.25, abs=1e-10)


def test_integrate_validation():
    w = model_density(2.0, Grid.uniform(math.pi, 64))
    with pytest.raises(ValueError):
        integrate(w, np.ones(10))
    with pytest.raises(ValueError):
        integrate(w, np.ones(65), rule="midpoint")


def test_integral_comparison_stable_constant():
    # |int f dm - int f dm_N| <= C eps on the truncated sweep with C stable
    # under eps-halving (spec window [0.3, 3]); measured ratio sits at 0.5
    N = 2.0
    wN = model_density(N, Grid.uniform(math.pi, 4096))
    ref = integrate(wN, np.cos(wN.grid.nodes))
    consts = []
    for eps in (0.04, 0.02, 0.01):
        w = truncated_model(N, math.pi - eps, 4096)
        val = integrate(w, np.cos(w.grid.nodes))
        consts.append(abs(val - ref) / eps)
    for a, b in zip(consts, consts[1:]):
        assert 0.3 <= b / a <= 3.0


# ---------------------------------------------------------------------------
# misc verdict plumbing


def test_verdict_truthiness():
    w = model_density(2.0, Grid.uniform(math.pi, 256))
    assert bool(cd_check(w)) is True
