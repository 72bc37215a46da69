import math

import numpy as np
import pytest

from obatalab.errors import ParameterDomainError
from obatalab.isoperimetry import (
    AsymptoticResult,
    ProfileQuery,
    asymptotic_constant,
    bbg_constant,
    bbg_ratio_check,
    c_squared_minus_one,
    g_eval,
    profile,
    profile_ode_residual,
    solve_R,
)

# Frozen oracle values (tests/oracles/frozen.txt)
PROFILE_3_30_037 = 0.609784899428624
BBG_3_29 = 1.000248758148393


# ---------------------------------------------------------------------------
# solve_R


def test_solve_R_endpoints():
    assert solve_R(2.0, 0.0, 0.0, math.pi / 2) == pytest.approx(0.0, abs=1e-12)
    assert solve_R(2.0, 0.0, 1.0, math.pi / 2) == pytest.approx(math.pi / 2, abs=1e-12)


def test_solve_R_half_mass_closed_form():
    # 1 - cos R = 1/2 * (1 - cos(pi/2)) => R = pi/3
    assert solve_R(2.0, 0.0, 0.5, math.pi / 2) == pytest.approx(math.pi / 3, abs=1e-10)


def test_solve_R_monotone_in_v():
    vs = np.linspace(0.05, 0.95, 19)
    Rs = [solve_R(3.0, 0.2, v, 2.5) for v in vs]
    assert all(a < b for a, b in zip(Rs, Rs[1:]))
    assert all(0.2 <= R <= 0.2 + 2.5 for R in Rs)


# ---------------------------------------------------------------------------
# g_eval


def test_g_closed_forms():
    assert g_eval(2.0, 0.0, 0.5, math.pi / 2) == pytest.approx(math.sin(math.pi / 3), abs=1e-10)
    assert g_eval(2.0, 0.0, 0.5, math.pi) == pytest.approx(0.5, abs=1e-10)


def test_g_symmetry_pair():
    D = 2.8
    a = g_eval(3.0, 0.1, 0.3, D)
    b = g_eval(3.0, math.pi - 0.1 - D, 0.7, D)
    assert a == pytest.approx(b, abs=1e-10)


def test_g_symmetry_random_pairs():
    rng = np.random.default_rng(3)
    for _ in range(20):
        N = 2.0 + 2.0 * rng.random()
        D = 1.0 + (math.pi - 1.0) * rng.random()
        b = (math.pi - D) * rng.random()
        v = 0.05 + 0.9 * rng.random()
        lhs = g_eval(N, b, v, D)
        rhs = g_eval(N, math.pi - b - D, 1.0 - v, D)
        assert lhs == pytest.approx(rhs, abs=1e-10)


# ---------------------------------------------------------------------------
# profile


def test_profile_model_half_volume():
    r2 = profile(ProfileQuery(N=2.0, D=math.pi, v=0.5))
    assert r2.value == pytest.approx(0.5, abs=1e-10)
    r3 = profile(ProfileQuery(N=3.0, D=math.pi, v=0.5))
    assert r3.value == pytest.approx(2.0 / math.pi, abs=1e-10)
    # D = pi leaves the single candidate b = 0
    assert r2.argmin_b == 0.0 and r3.argmin_b == 0.0


def test_profile_frozen_value():
    r = profile(ProfileQuery(N=3.0, D=3.0, v=0.37))
    assert r.value == pytest.approx(PROFILE_3_30_037, abs=1e-7)
    assert r.argmin_b == pytest.approx(0.059284844, abs=1e-6)
    assert 0.0 <= r.argmin_b <= math.pi - 3.0
    assert r.argmin_b <= r.R_at_argmin <= r.argmin_b + 3.0
    assert r.value > 0


def test_profile_model_symmetry():
    for v in (0.2, 0.35, 0.41):
        a = profile(ProfileQuery(N=2.5, D=math.pi, v=v)).value
        b = profile(ProfileQuery(N=2.5, D=math.pi, v=1.0 - v)).value
        assert a == pytest.approx(b, abs=1e-10)


def test_profile_query_validation():
    with pytest.raises(ParameterDomainError):
        ProfileQuery(N=2.0, D=math.pi, v=0.0)
    with pytest.raises(ParameterDomainError):
        ProfileQuery(N=2.0, D=3.5, v=0.5)
    with pytest.raises(ParameterDomainError):
        ProfileQuery(N=1.0, D=3.0, v=0.5)


# ---------------------------------------------------------------------------
# profile ODE


def test_profile_ode_residual_model():
    rep = profile_ode_residual(2.0, np.linspace(0.1, 0.9, 81))
    assert rep.max_residual <= 1e-4
    assert rep.excluded == ()


def test_profile_ode_residual_midpoint():
    rep = profile_ode_residual(3.0, [0.5])
    assert rep.max_residual <= 1e-5


def test_profile_ode_excluded_band():
    rep = profile_ode_residual(2.0, [0.0005, 0.5, 0.9995])
    assert rep.excluded == (0.0005, 0.9995)


def test_profile_power_midpoint_concave():
    # I_N^{N/(N-1)} is concave on (0,1); test midpoint concavity on triples
    for N in (2.0, 3.0):
        p = N / (N - 1.0)
        for v1, v2 in ((0.1, 0.5), (0.2, 0.9), (0.4, 0.6)):
            f1 = g_eval(N, 0.0, v1, math.pi) ** p
            f2 = g_eval(N, 0.0, v2, math.pi) ** p
            fm = g_eval(N, 0.0, 0.5 * (v1 + v2), math.pi) ** p
            assert fm >= 0.5 * (f1 + f2) - 1e-12


# ---------------------------------------------------------------------------
# BBG constant


def test_bbg_equals_one_at_pi():
    for N in (2.0, 2.5, 3.0, 4.0):
        assert bbg_constant(N, math.pi) == pytest.approx(1.0, abs=1e-12)


def test_bbg_half_circle_closed_form():
    assert bbg_constant(2.0, math.pi / 2) == pytest.approx(2.0 ** 0.25, abs=1e-10)


def test_bbg_frozen_value():
    assert bbg_constant(3.0, 2.9) == pytest.approx(BBG_3_29, abs=1e-10)


def test_bbg_monotone_in_D():
    Ds = np.linspace(1.0, math.pi, 12)
    cs = [bbg_constant(2.5, D) for D in Ds]
    assert all(a >= b - 1e-14 for a, b in zip(cs, cs[1:]))
    assert all(c >= 1.0 - 1e-14 for c in cs)


def test_c_squared_minus_one_consistency():
    assert c_squared_minus_one(2.0, 2.5) == pytest.approx(
        bbg_constant(2.0, 2.5) ** 2 - 1.0, abs=1e-14
    )


def test_c_squared_minus_one_no_cancellation():
    # computed through the tail integral, so it stays positive arbitrarily
    # close to pi instead of rounding to zero
    val = c_squared_minus_one(2.0, math.pi - 1e-8)
    assert 0.0 < val < 1e-15


# ---------------------------------------------------------------------------
# ratio check and asymptotics


def test_bbg_ratio_identity_at_pi():
    assert bbg_ratio_check(2.0, math.pi, np.linspace(0.1, 0.9, 9)) == pytest.approx(0.0, abs=1e-12)


def test_bbg_ratio_positive_margin():
    assert bbg_ratio_check(3.0, 2.5, np.linspace(0.01, 0.99, 99)) >= -1e-7
    assert bbg_ratio_check(2.0, 1.5, [0.5]) >= -1e-7


def test_profile_dominates_bbg_times_model():
    for N in (2.0, 3.0):
        for D in (1.5, 2.5, 3.0):
            C = bbg_constant(N, D)
            for v in (0.2, 0.5, 0.7):
                lhs = profile(ProfileQuery(N=N, D=D, v=v)).value
                rhs = C * profile(ProfileQuery(N=N, D=math.pi, v=v)).value
                assert lhs >= rhs - 1e-7


def test_asymptotic_constant_targets():
    for N, target in ((2.0, 8.0), (3.0, 9.0 * math.pi)):
        Ds = [math.pi - 1e-2, math.pi - 5e-3, math.pi - 2e-3, math.pi - 1e-3]
        res = asymptotic_constant(N, Ds)
        assert isinstance(res, AsymptoticResult)
        assert res.target == pytest.approx(target, rel=1e-12)
        # monotone convergence: 5% at pi - 1e-2, 0.5% at pi - 1e-3
        assert abs(res.ratios[0] / target - 1.0) <= 0.05
        assert abs(res.ratios[-1] / target - 1.0) <= 0.005
        assert res.limit == pytest.approx(target, rel=1e-6)


def test_asymptotic_sweep_validation():
    with pytest.raises(ParameterDomainError):
        asymptotic_constant(2.0, [3.0, 2.9, 3.1])
    with pytest.raises(ParameterDomainError):
        asymptotic_constant(2.0, [3.0, 3.1, math.pi])
