import math

import pytest
import scipy.constants as spc
from hypothesis import given
from hypothesis import strategies as st

from semicap import (
    DEBYE_PRESETS,
    DebyeInputs,
    InvalidParameterError,
    debye_length,
    debye_offset,
    metal_offset,
)

UM = 1e3  # nm per micrometre


def debye_direct_nm(kappa, n_per_cm3, T=300.0):
    # Direct transcription of the screening-length formula, independent of
    # the module under test.
    n = n_per_cm3 * 1e6
    return math.sqrt(spc.epsilon_0 * kappa * spc.k * T / (spc.e**2 * n)) * 1e9


class TestDebyeLength:
    def test_si_intrinsic_near_quoted_depth(self):
        # Quoted bulk penetration depth for intrinsic Si at 300 K is 24 um;
        # a factor 1.5 band absorbs the carrier-density convention.
        lam = debye_length(DEBYE_PRESETS["Si-intrinsic"])
        assert 24.0 * UM / 1.5 <= lam <= 24.0 * UM * 1.5

    def test_ge_intrinsic_near_quoted_depth(self):
        lam = debye_length(DEBYE_PRESETS["Ge-intrinsic"])
        assert 0.7 * UM / 1.5 <= lam <= 0.7 * UM * 1.5

    def test_two_species_convention_lands_on_quoted_values(self):
        # Counting both carrier polarities with the classic intrinsic
        # densities reproduces the quoted depths almost exactly.
        lam_si = debye_length(DEBYE_PRESETS["Si-intrinsic"], two_species=True)
        lam_ge = debye_length(DEBYE_PRESETS["Ge-intrinsic"], two_species=True)
        assert lam_si == pytest.approx(24.0 * UM, rel=0.01)
        assert lam_ge == pytest.approx(0.7 * UM, rel=0.02)
        assert lam_si == pytest.approx(debye_direct_nm(11.7, 2 * 1.45e10), rel=1e-12)
        assert lam_ge == pytest.approx(debye_direct_nm(16.0, 2 * 2.4e13), rel=1e-12)

    def test_matches_direct_formula(self):
        inp = DebyeInputs(temperature=250.0, carrier_density=3.3e12, kappa=9.0)
        assert debye_length(inp) == pytest.approx(
            debye_direct_nm(9.0, 3.3e12, T=250.0), rel=1e-14
        )

    def test_quadrupling_density_halves_length(self):
        base = DebyeInputs(temperature=300.0, carrier_density=1e12, kappa=10.0)
        quad = DebyeInputs(temperature=300.0, carrier_density=4e12, kappa=10.0)
        assert debye_length(quad) == pytest.approx(debye_length(base) / 2.0, rel=1e-14)

    @given(scale=st.floats(0.01, 100.0))
    def test_temperature_homogeneity(self, scale):
        base = DebyeInputs(temperature=300.0, carrier_density=1e12, kappa=10.0)
        warm = DebyeInputs(
            temperature=300.0 * scale, carrier_density=1e12, kappa=10.0
        )
        assert debye_length(warm) == pytest.approx(
            debye_length(base) * math.sqrt(scale), rel=1e-12
        )

    def test_invalid_inputs(self):
        with pytest.raises(InvalidParameterError):
            DebyeInputs(temperature=-1.0, carrier_density=1e12, kappa=10.0)
        with pytest.raises(InvalidParameterError):
            DebyeInputs(temperature=300.0, carrier_density=0.0, kappa=10.0)


class TestDebyeOffset:
    def test_si_scale_arithmetic(self):
        # 2 * 24 um / 11.7 for a single plate
        assert debye_offset(24.0 * UM, 11.7, 1) == pytest.approx(
            2.0 * 24.0 * UM / 11.7, rel=1e-15
        )
        assert debye_offset(24.0 * UM, 11.7, 1) == pytest.approx(4.1026 * UM, rel=1e-4)

    def test_ge_scale_arithmetic(self):
        assert debye_offset(0.7 * UM, 16.0, 1) == pytest.approx(0.0875 * UM, rel=1e-12)

    def test_second_plate_doubles(self):
        one = debye_offset(1234.5, 11.7, 1)
        assert debye_offset(1234.5, 11.7, 2) == 2.0 * one

    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            debye_offset(-1.0, 11.7, 1)
        with pytest.raises(InvalidParameterError):
            debye_offset(1.0, 0.5, 1)
        with pytest.raises(InvalidParameterError):
            debye_offset(1.0, 11.7, 3)

    @given(
        lam=st.floats(1.0, 1e6),
        kappa=st.floats(1.0, 30.0),
        n_plates=st.sampled_from([1, 2]),
    )
    def test_strictly_positive(self, lam, kappa, n_plates):
        assert debye_offset(lam, kappa, n_plates) > 0


class TestMetalOffset:
    def test_per_plate_values(self):
        assert metal_offset(1) == pytest.approx(0.1, rel=1e-15)
        assert metal_offset(2) == pytest.approx(0.2, rel=1e-15)

    def test_configurable_constant(self):
        assert metal_offset(2, per_plate_nm=0.15) == pytest.approx(0.3, rel=1e-15)

    def test_zero_plates_rejected(self):
        with pytest.raises(InvalidParameterError):
            metal_offset(0)
        with pytest.raises(InvalidParameterError):
            metal_offset(3)
