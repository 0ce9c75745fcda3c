import math

import numpy as np
import pytest
import scipy.constants as spc
from hypothesis import given, settings
from hypothesis import strategies as st

from semicap import (
    REDUCED_LENGTH_M,
    DepletionAssumptionError,
    EquilibriumState,
    FlatBandError,
    InvalidParameterError,
    MaterialParams,
    PlateConfig,
    SIMaterial,
    capacitance_breakdown,
    capacitance_from_bending,
    depletion_depth,
    finite_difference_capacitance,
    reduce_units,
    series_capacitance,
    si_units,
    solve_equilibrium,
    surface_charge,
)

# Reduced demo parameter point used throughout: n_d=1, n_s=1, E_F=0.5,
# kappa=12 (alpha defaults to 1/12), d0=1, V0=1.
DEMO = MaterialParams(n_d=1.0, n_s=1.0, E_F=0.5, kappa=12.0)
DEMO_PLATE = PlateConfig(d0=1.0)

# Root of the demo charge balance, from the bisection oracle below; agrees
# with the by-hand closed form (-10 + sqrt(288)) / 8.
DEMO_SIGMA0 = 0.8713203435596424


def bisect_oracle(f, lo, hi, resolution=1e-12):
    """Plain interval bisection, independent of the package's root finder."""
    f_lo, f_hi = f(lo), f(hi)
    assert f_lo * f_hi <= 0, "oracle bracket must straddle the root"
    if f_lo > 0:
        lo, hi = hi, lo
    while abs(hi - lo) > resolution:
        mid = 0.5 * (lo + hi)
        if f(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def charge_balance(sigma0, V0, p, d0):
    V1 = max(V0 - sigma0 * d0, 0.0)
    return sigma0 + (p.E_F - V1) * p.n_s - p.n_d * math.sqrt(V1 / p.alpha)


class TestMaterialParams:
    def test_reduced_values_pass_through(self):
        p = MaterialParams(n_d=2.0, n_s=3.0, E_F=0.4, kappa=10.0, alpha=0.5)
        assert (p.n_d, p.n_s, p.E_F, p.kappa, p.alpha) == (2.0, 3.0, 0.4, 10.0, 0.5)

    def test_alpha_defaults_to_nd_over_kappa(self):
        p = MaterialParams(n_d=7.0, n_s=0.0, E_F=0.1, kappa=11.7)
        assert p.alpha == 7.0 / 11.7

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_d=0.0, n_s=1.0, E_F=0.5, kappa=12.0),
            dict(n_d=-1.0, n_s=1.0, E_F=0.5, kappa=12.0),
            dict(n_d=1.0, n_s=-0.1, E_F=0.5, kappa=12.0),
            dict(n_d=1.0, n_s=1.0, E_F=0.5, kappa=0.5),
            dict(n_d=1.0, n_s=1.0, E_F=0.5, kappa=12.0, alpha=0.0),
            dict(n_d=float("nan"), n_s=1.0, E_F=0.5, kappa=12.0),
        ],
    )
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(InvalidParameterError):
            MaterialParams(**kwargs)

    def test_plate_validation(self):
        with pytest.raises(InvalidParameterError):
            PlateConfig(d0=0.0)
        with pytest.raises(InvalidParameterError):
            PlateConfig(d0=1.0, n_semiconducting_plates=3)


class TestUnitConversion:
    def test_si_roundtrip_against_independent_inverse(self):
        si = SIMaterial(
            n_d_per_cm3=2.3e14, n_s_per_cm2_per_V=4.7e11, E_F_V=0.31, kappa=11.7
        )
        p = reduce_units(si)

        # Independent inverse map, written from the unit definitions: a
        # reduced areal charge is sigma_SI * L0 / eps0, so densities carry
        # one factor of L0 per length dimension and 1/eps0 overall.
        L0 = REDUCED_LENGTH_M
        n_d_back = p.n_d * spc.epsilon_0 / (spc.e * L0**2) / 1e6
        n_s_back = p.n_s * spc.epsilon_0 / (spc.e * L0) / 1e4
        assert n_d_back == pytest.approx(si.n_d_per_cm3, rel=1e-12)
        assert n_s_back == pytest.approx(si.n_s_per_cm2_per_V, rel=1e-12)
        assert p.E_F == si.E_F_V
        assert p.kappa == si.kappa
        assert p.alpha == pytest.approx(p.n_d / p.kappa, rel=1e-15)

        back = si_units(p)
        assert back.n_d_per_cm3 == pytest.approx(si.n_d_per_cm3, rel=1e-12)
        assert back.n_s_per_cm2_per_V == pytest.approx(si.n_s_per_cm2_per_V, rel=1e-12)

    def test_magnitudes_are_sane(self):
        # 1e14 cm^-3 is a light doping level; its reduced value should be
        # far below 1, while 1e13 cm^-2 V^-1 of surface states is order 1.
        p = reduce_units(
            SIMaterial(n_d_per_cm3=1e14, n_s_per_cm2_per_V=1e13, E_F_V=0.3, kappa=11.7)
        )
        assert 1e-7 < p.n_d < 1e-5
        assert 1.0 < p.n_s < 3.0

    def test_invalid_si_rejected(self):
        with pytest.raises(InvalidParameterError):
            SIMaterial(n_d_per_cm3=-1.0, n_s_per_cm2_per_V=0.0, E_F_V=0.3, kappa=11.7)


class TestSolveEquilibrium:
    def test_matches_bisection_oracle_on_demo_point(self):
        s0_oracle = bisect_oracle(
            lambda s: charge_balance(s, 1.0, DEMO, 1.0), -10.0, 10.0
        )
        assert s0_oracle == pytest.approx(DEMO_SIGMA0, abs=5e-12)
        state = solve_equilibrium(1.0, DEMO, DEMO_PLATE)
        assert state.sigma0 == pytest.approx(s0_oracle, abs=2e-12)

    def test_state_satisfies_all_balance_relations(self):
        state = solve_equilibrium(1.0, DEMO, DEMO_PLATE)
        assert state.V1 >= 0
        # energy conservation across the gap
        assert state.sigma0 * DEMO_PLATE.d0 + state.V1 == pytest.approx(1.0, rel=1e-12)
        # depletion relation and surface charge
        assert state.V1 == pytest.approx(DEMO.alpha * state.d1**2, rel=1e-12)
        assert state.sigma1 == pytest.approx((DEMO.E_F - state.V1) * DEMO.n_s, rel=1e-12)
        assert state.residual_neutrality <= 1e-9

    def test_ns_zero_matches_closed_form_quadratic(self):
        # With no surface states the balance is sigma0 = n_d sqrt(V1/alpha),
        # a quadratic in sigma0 solved here by hand.
        p = MaterialParams(n_d=2.0, n_s=0.0, E_F=0.4, kappa=8.0)
        d0, V0 = 0.7, 1.3
        a = p.alpha
        s0_closed = (-p.n_d**2 * d0 + math.sqrt(p.n_d**4 * d0**2 + 4 * a * p.n_d**2 * V0)) / (
            2 * a
        )
        state = solve_equilibrium(V0, p, PlateConfig(d0=d0))
        assert state.sigma0 == pytest.approx(s0_closed, rel=1e-10)

    def test_d0_to_zero_limit(self):
        # As d0 -> 0 the full bias drops across the semiconductor: V1 -> V0.
        p = MaterialParams(n_d=1.5, n_s=2.0, E_F=0.8, kappa=10.0)
        V0 = 1.2
        state = solve_equilibrium(V0, p, PlateConfig(d0=1e-12))
        expected = -(p.E_F - V0) * p.n_s + p.n_d * math.sqrt(V0 / p.alpha)
        assert state.V1 == pytest.approx(V0, rel=1e-9)
        assert state.sigma0 == pytest.approx(expected, rel=1e-9)

    def test_negative_sigma0_branch(self):
        # Strong surface pinning with E_F above V0 can charge the conductor
        # negatively, which pushes V1 above V0; still a valid solution.
        p = MaterialParams(n_d=0.1, n_s=2.0, E_F=3.0, kappa=12.0)
        state = solve_equilibrium(1.0, p, PlateConfig(d0=1.0))
        assert state.sigma0 < 0
        assert state.V1 > 1.0
        assert state.residual_neutrality <= 1e-9

    def test_root_outside_bracket_is_rejected(self):
        # The bracket spans sigma0 in [-10 V0/d0, V0/d0]; a root beyond its
        # negative end (surface charge scale far above V0/d0) is reported as
        # a depletion-assumption violation rather than silently extended.
        p = MaterialParams(n_d=0.5, n_s=10.0, E_F=2.0, kappa=12.0)
        with pytest.raises(DepletionAssumptionError):
            solve_equilibrium(0.1, p, PlateConfig(d0=1.0))

    def test_depletion_assumption_violated(self):
        # E_F far below the uncharged-surface zero makes the surface charge
        # overwhelm any depletion charge: no root with V1 >= 0.
        p = MaterialParams(n_d=1.0, n_s=10.0, E_F=-5.0, kappa=12.0)
        with pytest.raises(DepletionAssumptionError):
            solve_equilibrium(1.0, p, PlateConfig(d0=1.0))

    def test_v0_validation(self):
        with pytest.raises(InvalidParameterError):
            solve_equilibrium(0.0, DEMO, DEMO_PLATE)
        with pytest.raises(InvalidParameterError):
            solve_equilibrium(-1.0, DEMO, DEMO_PLATE)


class TestSmallOps:
    def test_depletion_depth(self):
        assert depletion_depth(0.0, DEMO) == 0.0
        assert depletion_depth(DEMO.alpha, DEMO) == pytest.approx(1.0, rel=1e-15)
        assert depletion_depth(0.25, DEMO) == pytest.approx(math.sqrt(3.0), rel=1e-12)
        # squaring back recovers V1
        assert DEMO.alpha * depletion_depth(0.25, DEMO) ** 2 == pytest.approx(0.25)
        with pytest.raises(InvalidParameterError):
            depletion_depth(-1e-9, DEMO)

    def test_surface_charge(self):
        p = MaterialParams(n_d=1.0, n_s=3.0, E_F=0.5, kappa=12.0)
        assert surface_charge(p.E_F, p) == 0.0
        assert surface_charge(0.2, p) == pytest.approx(0.9, rel=1e-15)
        p0 = MaterialParams(n_d=1.0, n_s=0.0, E_F=0.5, kappa=12.0)
        assert surface_charge(123.0, p0) == 0.0

    def test_series_capacitance(self):
        assert series_capacitance(3.0, 3.0) == pytest.approx(1.5, rel=1e-15)
        assert series_capacitance(2.0, 3.0) == pytest.approx(1.2, rel=1e-15)
        assert series_capacitance(2.5, 1e300) == pytest.approx(2.5, rel=1e-12)
        assert series_capacitance(2.0, 3.0) == series_capacitance(3.0, 2.0)
        with pytest.raises(InvalidParameterError):
            series_capacitance(0.0, 1.0)
        with pytest.raises(InvalidParameterError):
            series_capacitance(1.0, -2.0)


class TestCapacitanceBreakdown:
    def test_frozen_demo_values(self):
        # Direct transcription of the differential-capacitance expression,
        # independent of the implementation's series-combination route.
        n_s, n_d, alpha, V1, d0 = 1.0, 1.0, 1.0 / 12.0, 0.25, 1.0
        cb_direct = n_d / (2.0 * math.sqrt(alpha * V1))
        c_total_direct = (n_s + cb_direct) / (1.0 / d0 + n_s + cb_direct) * (1.0 / d0)

        bd = capacitance_from_bending(V1, DEMO, DEMO_PLATE)
        assert bd.c_bulk == pytest.approx(math.sqrt(12.0), rel=1e-14)
        assert bd.c_bulk == pytest.approx(3.4641016151377544, rel=1e-14)
        assert bd.c_total == pytest.approx(c_total_direct, rel=1e-14)
        assert bd.c_total == pytest.approx(0.8169872981077807, rel=1e-12)
        assert bd.d_offset == pytest.approx(0.22400923773979584, rel=1e-12)

    def test_breakdown_from_state(self):
        state = solve_equilibrium(1.0, DEMO, DEMO_PLATE)
        bd = capacitance_breakdown(state, DEMO, DEMO_PLATE)
        assert bd.c_total == capacitance_from_bending(state.V1, DEMO, DEMO_PLATE).c_total

    def test_perfect_screening_limit(self):
        p = MaterialParams(n_d=1.0, n_s=1e12, E_F=0.5, kappa=12.0)
        bd = capacitance_from_bending(0.25, p, DEMO_PLATE)
        assert bd.c_total == pytest.approx(1.0 / DEMO_PLATE.d0, rel=1e-10)
        assert bd.d_offset < 1e-11

    def test_two_plates_doubles_offset(self):
        one = capacitance_from_bending(0.25, DEMO, PlateConfig(d0=1.0))
        two = capacitance_from_bending(
            0.25, DEMO, PlateConfig(d0=1.0, n_semiconducting_plates=2)
        )
        assert two.d_offset == 2.0 * one.d_offset

    def test_flat_band_is_an_error(self):
        with pytest.raises(FlatBandError):
            capacitance_from_bending(0.0, DEMO, DEMO_PLATE)
        state = EquilibriumState(
            sigma0=1.0, sigma1=0.0, V1=0.0, d1=0.0, V0=1.0, residual_neutrality=0.0
        )
        with pytest.raises(FlatBandError):
            capacitance_breakdown(state, DEMO, DEMO_PLATE)


class TestFiniteDifferenceOracle:
    def test_matches_breakdown_on_demo_point(self):
        V0 = 1.0
        state = solve_equilibrium(V0, DEMO, DEMO_PLATE)
        bd = capacitance_breakdown(state, DEMO, DEMO_PLATE)
        fd = finite_difference_capacitance(V0, DEMO, DEMO_PLATE, h=1e-6 * V0)
        assert fd == pytest.approx(bd.c_total, rel=1e-6)

    def test_ns_zero_matches_hand_derivative(self):
        # d sigma0 / d V0 of the closed-form quadratic solution:
        # n_d / sqrt(n_d^2 d0^2 + 4 alpha V0).
        p = MaterialParams(n_d=2.0, n_s=0.0, E_F=0.4, kappa=8.0)
        d0, V0 = 0.7, 1.3
        analytic = p.n_d / math.sqrt(p.n_d**2 * d0**2 + 4 * p.alpha * V0)
        fd = finite_difference_capacitance(V0, p, PlateConfig(d0=d0))
        assert fd == pytest.approx(analytic, rel=1e-8)

    def test_perfect_screening_point(self):
        p = MaterialParams(n_d=1.0, n_s=1e12, E_F=0.5, kappa=12.0)
        fd = finite_difference_capacitance(1.0, p, DEMO_PLATE)
        assert fd == pytest.approx(1.0 / DEMO_PLATE.d0, rel=1e-6)

    def test_step_validation(self):
        with pytest.raises(InvalidParameterError):
            finite_difference_capacitance(1.0, DEMO, DEMO_PLATE, h=0.0)
        with pytest.raises(InvalidParameterError):
            finite_difference_capacitance(1.0, DEMO, DEMO_PLATE, h=2.0)


material_st = st.builds(
    MaterialParams,
    n_d=st.floats(0.1, 10.0),
    n_s=st.floats(0.0, 10.0),
    E_F=st.floats(0.0, 2.0),
    kappa=st.floats(1.0, 20.0),
)
v1_st = st.floats(1e-3, 5.0)
d0_st = st.floats(0.1, 10.0)


class TestProperties:
    @given(p=material_st, V1=v1_st, d0=d0_st)
    def test_series_and_measured_distance_identities(self, p, V1, d0):
        plate = PlateConfig(d0=d0)
        bd = capacitance_from_bending(V1, p, plate)
        # identical arithmetic route, must agree bit for bit
        assert bd.c_total == series_capacitance(bd.c_gap, bd.c_surface + bd.c_bulk)
        assert bd.c_total < min(bd.c_gap, bd.c_surface + bd.c_bulk)
        assert 1.0 / bd.c_total == pytest.approx(d0 + bd.d_offset, rel=1e-12)

    @given(p=material_st, V1=v1_st, d0_a=d0_st, d0_b=d0_st)
    def test_offset_locality_and_gap_monotonicity(self, p, V1, d0_a, d0_b):
        bd_a = capacitance_from_bending(V1, p, PlateConfig(d0=d0_a))
        bd_b = capacitance_from_bending(V1, p, PlateConfig(d0=d0_b))
        assert bd_a.d_offset == bd_b.d_offset
        if d0_a < d0_b:
            assert bd_a.c_total > bd_b.c_total
        elif d0_a > d0_b:
            assert bd_a.c_total < bd_b.c_total

    @given(p=material_st, V1=v1_st, bump=st.floats(0.1, 5.0))
    def test_offset_decreases_with_more_screening(self, p, V1, bump):
        plate = PlateConfig(d0=1.0)
        base = capacitance_from_bending(V1, p, plate).d_offset
        more_surface = MaterialParams(
            n_d=p.n_d, n_s=p.n_s + bump, E_F=p.E_F, kappa=p.kappa, alpha=p.alpha
        )
        more_bulk = MaterialParams(
            n_d=p.n_d + bump, n_s=p.n_s, E_F=p.E_F, kappa=p.kappa, alpha=p.alpha
        )
        assert capacitance_from_bending(V1, more_surface, plate).d_offset < base
        assert capacitance_from_bending(V1, more_bulk, plate).d_offset < base

    @given(
        p=material_st,
        d0=d0_st,
        V0=st.floats(0.5, 5.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_solver_self_consistency(self, p, d0, V0):
        plate = PlateConfig(d0=d0)
        state = solve_equilibrium(V0, p, plate)
        assert state.V1 >= 0
        assert state.sigma0 * d0 + state.V1 == pytest.approx(V0, rel=1e-10, abs=1e-10)
        assert state.V1 == pytest.approx(p.alpha * state.d1**2, rel=1e-12, abs=1e-15)
        assert state.sigma1 == (p.E_F - state.V1) * p.n_s
        assert state.residual_neutrality <= 1e-9

    @given(
        p=material_st,
        d0=d0_st,
        V0=st.floats(0.5, 5.0),
    )
    @settings(max_examples=25, deadline=None)
    def test_differential_capacitance_matches_finite_difference(self, p, d0, V0):
        plate = PlateConfig(d0=d0)
        state = solve_equilibrium(V0, p, plate)
        bd = capacitance_breakdown(state, p, plate)
        fd = finite_difference_capacitance(V0, p, plate, h=1e-6 * V0)
        assert abs(bd.c_total - fd) / bd.c_total < 1e-5
