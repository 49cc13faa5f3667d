import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twopeak.bubble import ConstantK, KProfile, TwoPeakK
from twopeak.constants import a_closed_form
from twopeak.expansion import (
    alpha_hat,
    b1_value,
    b3_value,
    coercivity_spectrum,
    energy_balance,
    linear_functionals,
    verify_energy_balance,
    verify_lemma_a4,
    verify_lemma_a5,
    verify_lemma_b1,
    verify_lemma_b2,
    verify_lemma_b3,
    verify_lemma_b4,
    verify_linear_bounds,
)
from twopeak.fitting import fit_power_law
from twopeak.galerkin import build_space
from twopeak.pipeline import pure_profile


def _profiles(k0=1.0, sep=1.0):
    z2 = np.zeros(6)
    z2[0] = sep
    return (KProfile(np.zeros(6), -np.ones(6), 1.5, k0=k0, r0=0.2),
            KProfile(z2, -np.ones(6), 1.5, k0=k0, r0=0.2))


PURE = KProfile(np.zeros(6), -np.ones(6), 1.5, r0=1e3)


# --- power-law fits ------------------------------------------------------------

def test_fit_exact_law():
    lams = [10.0, 20.0, 40.0, 80.0]
    fit = fit_power_law([(x, 3.7 * x ** -2.5) for x in lams])
    assert fit.constant == pytest.approx(3.7, rel=1e-12)
    assert fit.exponent == pytest.approx(-2.5, abs=1e-12)
    assert fit.max_rel_dev < 1e-12
    assert fit.window == (10.0, 80.0)


def test_fit_noisy_law():
    rng = np.random.default_rng(7)
    lams = [10.0, 20.0, 40.0, 80.0]
    fit = fit_power_law([(x, 3.7 * x ** -2.5 * (1 + 0.01 * rng.standard_normal())) for x in lams])
    assert abs(fit.exponent + 2.5) <= 0.05


def test_fit_flat_and_negative():
    assert fit_power_law([(x, 2.0) for x in (1, 2, 3, 4)]).exponent == pytest.approx(0.0, abs=1e-14)
    fit = fit_power_law([(x, -5.0 * x) for x in (1, 2, 3, 4)])
    assert fit.constant == pytest.approx(-5.0)


@pytest.mark.parametrize("samples", [
    [(1, 1.0), (2, -1.0), (3, 1.0), (4, 1.0)],
    [(1, 1.0), (2, 1.0), (3, 1.0)],
    [(1, 1.0), (3, 1.0), (2, 1.0), (4, 1.0)],
    [(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)],
])
def test_fit_rejects(samples):
    with pytest.raises(ValueError):
        fit_power_law(samples)


@settings(max_examples=40, deadline=None)
@given(c=st.floats(1e-3, 1e3), p=st.floats(-6, 6))
def test_fit_recovers_any_exact_law(c, p):
    xs = [1.0, 2.0, 4.0, 8.0, 16.0]
    fit = fit_power_law([(x, c * x ** p) for x in xs])
    assert fit.exponent == pytest.approx(p, abs=1e-9)
    assert fit.constant == pytest.approx(c, rel=1e-9)


# --- B family ------------------------------------------------------------------

def test_b1_scaling_and_constant(spec):
    v = verify_lemma_b1(6, PURE, spec=spec)
    assert v.checks["exponent"]
    assert v.fits["lam"].exponent == pytest.approx(-2.5, abs=0.05)
    assert v.checks["constant_matches_c_n_beta"]
    assert v.checks["mc_agreement"]


def test_b1_sign_is_opposite_to_sum_a(spec):
    # with sum a < 0 the weight is most negative where dU/dlam < 0, so the integral is positive
    for lam in (10.0, 80.0):
        assert b1_value(6, PURE, lam, spec) > 0
    flipped = KProfile(np.zeros(6), -np.ones(6) * 3, 1.5, r0=1e3)
    assert b1_value(6, flipped, 10.0, spec) == pytest.approx(3 * b1_value(6, PURE, 10.0, spec), rel=1e-12)
    v = verify_lemma_b1(6, PURE, spec=spec, mc_check=False)
    assert v.values["computed_sign"] == 1.0
    assert not v.checks["sign_matches_sum_a"]


def test_b2(spec):
    v = verify_lemma_b2(6, spec=spec)
    assert v.passed, v.failed_checks()
    assert v.fits["lam"].exponent == pytest.approx(-3.0, abs=0.1)
    assert v.fits["separation"].exponent == pytest.approx(-2.0, abs=0.1)


def test_b3(spec):
    v = verify_lemma_b3(6, PURE, spec=spec)
    assert v.passed, v.failed_checks()
    val, se = b3_value(6, PURE, 20.0, 0.0, 0, spec)
    assert abs(val) <= 3 * se + 1e-300


@pytest.mark.filterwarnings("ignore::twopeak.integrate.PrecisionWarning")
def test_b4(spec):
    v = verify_lemma_b4(6, spec=spec)
    assert v.checks["lam_exponent"]
    assert v.checks["transverse_vanishes"]
    assert v.fits["lam"].exponent == pytest.approx(-2.0, abs=0.1)
    # the axial component is negative when bubble 1 sits on the positive side
    assert v.values["computed_sign"] == -1.0
    assert not v.checks["sign_matches_offset"]


def test_verdict_csv_block(spec):
    v = verify_lemma_b2(6, spec=spec)
    lines = v.csv_block().strip().splitlines()
    assert lines[0] == "verdict,sweep,abscissa,value,stderr,fit,residual"
    assert len(lines) == 1 + 8
    d = v.to_dict()
    assert d["passed"] and len(d["table"]) == 8


# --- energy balance ---------------------------------------------------------------

def test_alpha_hat():
    assert alpha_hat(6, 1.0, 0.0) == 1.0
    assert alpha_hat(6, 1.0, 0.01) == pytest.approx(1.01 ** -0.25)


def test_alpha_hat_maximises_one_dimensional_energy():
    from scipy.optimize import minimize_scalar

    A = a_closed_form(6)
    for eps, kz in ((1e-2, 1.0), (5e-2, -0.5)):
        res = minimize_scalar(lambda a: -(0.5 * a * a * A - a ** 6 / 6 * (1 + eps * kz) * A),
                              bounds=(0.5, 1.5), method="bounded", options={"xatol": 1e-12})
        assert res.x == pytest.approx(alpha_hat(6, kz, eps) ** 4 / alpha_hat(6, kz, eps) ** 3, rel=1e-3)


def test_energy_balance(spec):
    v = verify_energy_balance(6, _profiles(), spec=spec)
    assert v.passed, v.failed_checks()
    assert v.fits["eps"].exponent == pytest.approx(1.0, abs=0.1)
    assert v.fits["lam"].exponent == pytest.approx(-2.0, abs=0.1)


def test_energy_balance_constant_k_single_bubble(spec):
    far = [np.zeros(6), np.full(6, 1e4)]
    A = a_closed_form(6)
    eps, c = 2e-2, 0.8
    val = energy_balance(6, ConstantK(c), far, (30.0, 30.0), eps, spec, k_at_z=(c, c), alphas=(1.0, 1.0))
    assert val == pytest.approx(-eps * c * A, rel=1e-6)
    # at alpha_hat the algebraic part vanishes; only the far-pair coupling is left
    val = energy_balance(6, ConstantK(c), far, (30.0, 30.0), eps, spec, k_at_z=(c, c))
    assert abs(val) <= 1e-9 * A


# --- coercivity -----------------------------------------------------------------------

def test_coercivity_well_separated(spec):
    v = verify_lemma_a4(6, _profiles(), spec=spec)
    assert v.passed, v.failed_checks()
    assert v.values["delta_min"] > 0


def test_alpha_block(spec):
    v = verify_lemma_a5(6, spec=spec)
    assert v.passed, v.failed_checks()
    assert v.values["target"] == pytest.approx(-4 * a_closed_form(6), rel=1e-14)
    assert v.values["cross_exponent_r"] > 0


def test_coercivity_far_pair(spec):
    z2 = np.zeros(6)
    z2[0] = 10.0
    sp = build_space(6, (np.zeros(6), z2), (20.0, 20.0), spec=spec)
    assert coercivity_spectrum(6, sp, 0.0, ConstantK(0.0)) > 0


# --- linear estimates ----------------------------------------------------------------

def test_linear_bounds(spec):
    res = verify_linear_bounds(6, _profiles(), spec=spec)
    for name in ("a1", "a2", "a6", "a7"):
        assert res[name].passed, (name, res[name].failed_checks())
        assert all(row["n_samples"] >= 20 for row in res[name].table)


def test_a1_vanishes_for_orthogonal_corrections(spec):
    # constant K = K(z): the weighted functional equals K(z) times the unweighted one,
    # which vanishes on the correction space for a single exact bubble
    z2 = np.zeros(6)
    z2[0] = 1e4
    sp = build_space(6, (np.zeros(6), z2), (20.0, 20.0), spec=spec)
    fn = linear_functionals(sp, ConstantK(0.0), 0.0)
    vals = fn["a1"] @ sp.basis
    assert np.max(np.abs(vals)) <= 1e-12 * a_closed_form(6)
