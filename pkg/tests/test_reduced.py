import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twopeak.config import default_config
from twopeak.reduced import (
    DegreeUndefined,
    ReducedError,
    ReducedSystem,
    brouwer_degree,
    closed_form_root,
    g_degree,
    g_map,
    jac_g,
    l_eps,
    l_eps_exponent,
    offset_block_degree,
    root_determinant,
    scale_block_degree,
    scales_from_t,
    solve_full_reduced,
    solve_reduced,
)

B15 = (1.5, 1.5)


def test_l_eps_examples():
    assert l_eps_exponent(1.5, 1.5, 6) == pytest.approx(-3.0, rel=1e-14)
    assert l_eps(1e-2, 1.5, 1.5, 6) == pytest.approx(1e6, rel=1e-12)
    assert l_eps_exponent(1.2, 1.8, 6) == pytest.approx(-2.5714285714, rel=1e-9)
    with pytest.raises(ReducedError, match="degenerate balance"):
        l_eps_exponent(2.0, 2.0, 6)
    with pytest.raises(ValueError):
        l_eps(0.0, 1.5, 1.5, 6)


def test_scale_law_balances_both_terms():
    # with lam = t L^(1/beta) both eps/lam^beta and eps12 scale like eps^4 for n=6, beta=1.5
    for eps in (1e-2, 1e-3):
        lam = scales_from_t((1.0, 1.0), eps, B15, 6)
        assert lam[0] == pytest.approx(eps ** -2, rel=1e-12)
        assert eps / lam[0] ** 1.5 == pytest.approx(eps ** 4, rel=1e-12)
        assert (lam[0] * lam[1]) ** -1 == pytest.approx(eps ** 4, rel=1e-12)


def test_g_map_examples():
    assert np.allclose(g_map((1.0, 1.0), (1.0, 1.0), (1.3, 1.7), 6), 0.0, atol=1e-15)
    assert g_map((4.0, 4.0), (1.0, 1.0), B15, 6) == pytest.approx([0.0625, 0.0625], rel=1e-14)
    t = (2 ** (4 / 3), 2 ** (2 / 3))
    assert np.max(np.abs(g_map(t, (1.0, 2.0), B15, 6))) <= 1e-12
    with pytest.raises(ValueError):
        g_map((0.0, 1.0), (1.0, 1.0), B15, 6)


def test_jac_examples():
    J, det = jac_g((1.0, 1.0), (1.0, 1.0), B15, 6)
    assert det == pytest.approx(-0.75, rel=1e-14)
    assert root_determinant((1.0, 1.0), (1.0, 1.0), B15, 6) == pytest.approx(-0.75, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(t1=st.floats(0.2, 5.0), t2=st.floats(0.2, 5.0), m1=st.floats(0.2, 5.0), m2=st.floats(0.2, 5.0),
       b1=st.floats(1.05, 1.95), b2=st.floats(1.05, 1.95))
def test_jacobian_matches_finite_differences(t1, t2, m1, m2, b1, b2):
    t = np.array([t1, t2])
    J, _ = jac_g(t, (m1, m2), (b1, b2), 6)
    for j in range(2):
        h = 1e-6 * t[j]
        e = np.zeros(2)
        e[j] = h
        fd = (g_map(t + e, (m1, m2), (b1, b2), 6) - g_map(t - e, (m1, m2), (b1, b2), 6)) / (2 * h)
        assert np.allclose(fd, J[:, j], rtol=1e-6, atol=1e-6 * np.abs(J).max())


@pytest.mark.parametrize("m,expect", [((1.0, 1.0), (1.0, 1.0)), ((2.0, 2.0), (4.0, 4.0)),
                                      ((1.0, 2.0), (2 ** (4 / 3), 2 ** (2 / 3)))])
def test_solve_reduced_examples(m, expect):
    root = solve_reduced(m, B15, 6)
    assert root.t == pytest.approx(expect, rel=1e-10)
    assert root.residual <= 1e-12
    assert root.det < 0
    assert root.det == pytest.approx(root.det_formula, rel=1e-10)
    assert len(root.uniqueness["roots"]) == 1
    assert json.loads(json.dumps(root.to_dict()))["t"] == root.t.tolist()


@settings(max_examples=25, deadline=None)
@given(m=st.floats(0.3, 3.0), b=st.floats(1.05, 1.8))
def test_symmetric_closed_form_root(m, b):
    root = solve_reduced((m, m), (b, b), 6)
    assert root.t == pytest.approx([m ** (1 / (2 - b))] * 2, rel=1e-12)
    # det sign follows b1 b2 - (b1 + b2)(n-4)/2
    assert np.sign(root.det) == np.sign(b * b - 2 * b)


@settings(max_examples=25, deadline=None)
@given(m1=st.floats(0.3, 3.0), m2=st.floats(0.3, 3.0), b=st.floats(1.05, 1.8))
def test_ratio_substitution_root(m1, m2, b):
    root = solve_reduced((m1, m2), (b, b), 6)
    assert root.t == pytest.approx(closed_form_root((m1, m2), (b, b), 6), rel=1e-10)


def test_near_degenerate_root_is_unique():
    # 1/(n-4-beta) = 16 amplifies residual errors; the scan must still report one root
    root = solve_reduced((1.0, 2.0), (1.9375, 1.9375), 6)
    assert root.t == pytest.approx(closed_form_root((1.0, 2.0), (1.9375, 1.9375), 6), rel=1e-10)


def test_no_root_in_box():
    with pytest.raises(ReducedError):
        solve_reduced((1.0, 1.0), B15, 6, box=(2.0, 10.0))


def test_degree_examples():
    sq = ((-1.0, 1.0), (-1.0, 1.0))
    assert brouwer_degree(lambda x: x, sq).degree == 1
    assert brouwer_degree(lambda x: np.array([x[0], -x[1]]), sq).degree == -1
    res = g_degree((1.0, 1.0), B15, 6)
    assert res.degree == -1
    assert abs(res.total_winding - 2 * math.pi * res.degree) <= 1e-6
    assert res.min_norm > 0
    assert brouwer_degree(lambda x: x - 5.0, sq).degree == 0
    z2 = lambda x: np.array([x[0] ** 2 - x[1] ** 2, 2 * x[0] * x[1]])
    assert brouwer_degree(z2, sq).degree == 2


def test_degree_undefined_on_boundary_zero():
    with pytest.raises(DegreeUndefined, match="degree undefined on this box"):
        brouwer_degree(lambda x: x - np.array([1.0, 0.0]), ((-1.0, 1.0), (-1.0, 1.0)))


def test_degree_nested_boxes_and_shear():
    f = lambda t: g_map(t, (1.0, 1.0), B15, 6)
    for box in (((0.5, 2.0), (0.5, 2.0)), ((0.25, 4.0), (0.25, 4.0)), ((0.1, 10.0), (0.1, 10.0))):
        assert brouwer_degree(f, box).degree == -1
    # orientation-preserving shear of the box coordinates
    shear = lambda s: np.array([s[0] + 0.3 * (s[1] - 1.0), s[1]])
    assert brouwer_degree(lambda s: f(shear(s)), ((0.6, 1.6), (0.5, 2.0))).degree == -1


def test_degree_certificate_increments_small():
    res = g_degree((1.0, 2.0), B15, 6, box=((1.0, 4.0), (0.5, 3.0)))
    assert all(abs(c["increment"]) <= math.pi / 2 for c in res.certificate)
    assert sum(c["increment"] for c in res.certificate) == pytest.approx(res.total_winding)


@pytest.fixture(scope="module")
def cfg():
    return default_config()


def test_model_source_reduces_to_balance_root(cfg):
    res = solve_full_reduced(6, cfg.profiles, 8e-3, "model")
    from twopeak.constants import cached_interaction_constants, expansion_model

    ic = cached_interaction_constants(6, cfg.quadrature)
    model = expansion_model(6, cfg.profiles, cfg.quadrature, ic.c0, ic.c1)
    root = solve_reduced(model.mk, B15, 6)
    assert res.t == pytest.approx(root.t, rel=1e-6)
    assert np.max(np.abs(res.x)) <= 1e-4
    assert res.residual <= 1e-10
    assert res.lams == pytest.approx(scales_from_t(res.t, 8e-3, B15, 6), rel=1e-14)


@pytest.mark.slow
def test_full_source_offsets_shrink(cfg):
    a = solve_full_reduced(6, cfg.profiles, 8e-3, "full")
    b = solve_full_reduced(6, cfg.profiles, 4e-3, "full")
    off = lambda r: max(np.linalg.norm(y - p.z) for y, p in zip(r.centers, cfg.profiles))
    assert off(b) < off(a)
    assert a.residual <= 1e-8 and b.residual <= 1e-8
    assert a.t == pytest.approx(b.t, rel=0.05)


def test_block_degrees_model_source(cfg):
    system = ReducedSystem(6, cfg.profiles, 8e-3, _model(cfg), "model")
    res = solve_full_reduced(6, cfg.profiles, 8e-3, "model")
    vec = np.concatenate([res.t, np.ravel(res.x)])
    s = scale_block_degree(system, vec, ((0.25, 4.0), (0.25, 4.0)), relative=True)
    o = offset_block_degree(system, vec)
    assert s.degree == -1
    assert o.degree == 1
    assert s.degree * o.degree == -1


def _model(cfg):
    from twopeak.constants import cached_interaction_constants, expansion_model

    ic = cached_interaction_constants(6, cfg.quadrature)
    return expansion_model(6, cfg.profiles, cfg.quadrature, ic.c0, ic.c1)
