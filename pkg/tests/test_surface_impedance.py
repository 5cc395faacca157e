import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rlx.geometry import ConductorMaterial
from rlx.surface_impedance import MU0, esi, esi_value, skin_depth

CU = ConductorMaterial("cu", 5.8e7, 35e-6)


@pytest.mark.parametrize("model", ["coth", "exp"])
def test_dc_limit(model):
    assert esi(CU, 0.0, model) == pytest.approx(2 / (CU.sigma * CU.thickness), rel=1e-14)


@pytest.mark.parametrize("model", ["coth", "exp"])
def test_high_frequency_limit(model):
    f = 1e12
    x = (1 + 1j) * np.sqrt(np.pi * MU0 / CU.sigma) * np.sqrt(f)
    assert abs(esi(CU, f, model) - x) / abs(x) < 1e-12


def test_coth_matches_mpmath_style_reference():
    # independent evaluation with numpy's complex tanh
    f = np.logspace(0, 11, 60)
    r_dc = 2 / (CU.sigma * CU.thickness)
    x = (1 + 1j) * np.sqrt(np.pi * MU0 / CU.sigma * f)
    ref = x / np.tanh(x / r_dc)
    np.testing.assert_allclose(esi(CU, f), ref, rtol=1e-12)


def test_exp_closure_literal():
    f = np.logspace(2, 10, 20)
    r_dc = 2 / (CU.sigma * CU.thickness)
    x = (1 + 1j) * np.sqrt(np.pi * MU0 / CU.sigma * f)
    np.testing.assert_allclose(esi(CU, f, "exp"), x / (1 - np.exp(-x / r_dc)), rtol=1e-12)


@pytest.mark.parametrize("model", ["coth", "exp"])
def test_series_branch_is_continuous(model):
    # the cutoff sits at |u| = 1e-4; compare both sides against a high-precision form
    r_dc = 2 / (CU.sigma * CU.thickness)
    r_rf = np.sqrt(np.pi * MU0 / CU.sigma)
    u_cut = 1e-4
    f_cut = (u_cut * r_dc / (np.sqrt(2) * r_rf)) ** 2
    f = f_cut * np.array([0.99, 0.999999, 1.000001, 1.01])
    z = esi(CU, f, model)
    u = (1 + 1j) * r_rf * np.sqrt(f) / r_dc
    if model == "coth":
        ref = r_dc * (1 + u**2 / 3 - u**4 / 45)
    else:
        ref = r_dc * (1 + u / 2 + u**2 / 12)
    np.testing.assert_allclose(z, ref, rtol=1e-12)


def test_coth_low_frequency_has_no_first_order_term():
    r_dc = 2 / (CU.sigma * CU.thickness)
    z = esi(CU, 1.0)
    assert abs(z.imag) / r_dc < 1e-6


@given(st.floats(1e-3, 1e12))
def test_passive_and_inductive(f):
    for model in ("coth", "exp"):
        z = esi(CU, f, model)
        assert z.real > 0 and z.imag >= 0


@given(st.floats(1.0, 1e11), st.floats(1.5, 10))
def test_resistance_monotone(f, k):
    assert esi(CU, k * f).real >= esi(CU, f).real * (1 - 1e-12)


def test_skin_depth_copper_1ghz():
    assert skin_depth(CU, 1e9) == pytest.approx(2.09e-6, rel=5e-3)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        esi_value(-1, 1e-6, 1.0)
    with pytest.raises(ValueError):
        esi(CU, -1.0)
    with pytest.raises(ValueError):
        esi(CU, 1.0, "foo")
    with pytest.raises(ValueError):
        skin_depth(CU, 0.0)


def test_worked_values():
    assert esi(CU, 0.0).real == pytest.approx(9.852e-4, rel=1e-3)
    z = esi(CU, 1e9)
    assert z.real == pytest.approx(8.25e-3, rel=2e-3)
    assert z.imag == pytest.approx(z.real, rel=1e-6)
    # cross-check against 1/(sigma delta)
    assert z.real == pytest.approx(1 / (CU.sigma * skin_depth(CU, 1e9)), rel=1e-6)


def test_low_frequency_agreement_bound():
    """|Z_s - R_DC| / R_DC <= 1e-6 while R_RF sqrt(f) / R_DC <= 1e-4."""
    r_dc = 2 / (CU.sigma * CU.thickness)
    r_rf = np.sqrt(np.pi * MU0 / CU.sigma)
    f = np.linspace(0, (1e-4 * r_dc / r_rf) ** 2, 50)
    assert np.max(np.abs(esi(CU, f) - r_dc)) / r_dc <= 1e-6
    # the single-exponential closure carries a first-order x/2 term and does not
    assert np.max(np.abs(esi(CU, f, "exp") - r_dc)) / r_dc > 1e-5
