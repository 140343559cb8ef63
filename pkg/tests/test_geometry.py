import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geomerr.basis import TensorGrid
from geomerr.geometry import (DomainSpec, InvalidDomainError, MappedDomain, arc_length_circle,
                              blend_domain, bottom_curve, circle_curve, circle_domain, delta_gamma,
                              face_geometry, family_domain, interval_domain, line, metric_terms,
                              mixed_domain, normalize_family, polynomial_curve, transfinite_map,
                              x_param_circle)

PERTURBED = ("omega1", "omega2", "omega3", "omega4")


def unit_square_sides():
    return (line((0, 0), (1, 0)), line((1, 0), (1, 1)), line((0, 1), (1, 1)), line((0, 0), (0, 1)))


def fd_check(curve, s, h=1e-5):
    d1 = (curve(s + h) - curve(s - h)) / (2 * h)
    d2 = (curve(s + h) - 2 * curve(s) + curve(s - h)) / (h * h)
    return np.abs(d1 - curve.deriv(s)).max(), np.abs(d2 - curve.deriv2(s)).max()


@settings(max_examples=30, deadline=None)
@given(s=st.floats(0.05, 0.9), fam=st.sampled_from(PERTURBED), delta=st.floats(-0.3, 0.3))
def test_curve_derivatives_match_finite_differences(s, fam, delta):
    for c in (bottom_curve(fam, delta), arc_length_circle(), x_param_circle(),
              circle_curve("x_param", "quadratic_interp")):
        e1, e2 = fd_check(c, np.array(s))
        assert e1 < 1e-6 and e2 < 1e-3


def test_identity_map():
    dom = transfinite_map(unit_square_sides())
    g = TensorGrid(6)
    m = metric_terms(dom, g)
    np.testing.assert_allclose(m.J, 1.0, atol=1e-15)
    np.testing.assert_allclose(m.Ja1[0], 1.0, atol=1e-15)
    np.testing.assert_allclose(m.Ja1[1], 0.0, atol=1e-15)
    np.testing.assert_allclose(m.Ja2[0], 0.0, atol=1e-15)
    np.testing.assert_allclose(m.Ja2[1], 1.0, atol=1e-15)
    np.testing.assert_allclose(m.X[0], g.XI, atol=1e-15)


def test_corner_mismatch_rejected():
    b, r, t, l = unit_square_sides()
    with pytest.raises(InvalidDomainError):
        MappedDomain((b, r, line((0, 1.01), (1, 1)), l))


def test_omega1_midpoint():
    dom = family_domain("omega1", 0.1)
    np.testing.assert_allclose(dom.position(0.5, 0.0), [0.5, -0.05], atol=1e-15)


def test_family_examples():
    np.testing.assert_allclose(bottom_curve("omega3", 0.05)(0.5), [0.5, -0.05], atol=1e-15)
    np.testing.assert_allclose(bottom_curve("omega2", 0.1)(0.0), [0.0, 0.05], atol=1e-15)
    g = TensorGrid(8)
    ref = family_domain("omega").position(g.XI, g.ETA)
    for fam in PERTURBED:
        np.testing.assert_array_equal(family_domain(fam, 0.0).position(g.XI, g.ETA), ref)
    with pytest.raises(InvalidDomainError):
        family_domain("omega1", 0.6)
    with pytest.raises(ValueError):
        normalize_family("omega9")
    assert normalize_family("Ω3") == "omega3"


@settings(max_examples=20, deadline=None)
@given(fam=st.sampled_from(PERTURBED), delta=st.floats(-0.2, 0.2), s=st.floats(0, 1))
def test_blend_boundary_reproduction(fam, delta, s):
    dom = family_domain(fam, delta)
    np.testing.assert_allclose(dom.position(s, 1.0), dom.curves[2](s), atol=1e-13)
    np.testing.assert_allclose(dom.position(s, 0.0), dom.curves[0](s), atol=1e-13)


@pytest.mark.parametrize("fam", PERTURBED)
def test_blend_reduction(fam):
    dom = family_domain(fam, 0.07)
    s = np.linspace(0, 1, 20)
    XI, ETA = np.meshgrid(s, s, indexing="ij")
    blend = dom.curves[0](XI) * (1 - ETA) + ETA * dom.curves[2](XI)
    assert np.abs(dom.position(XI, ETA) - blend).max() < 1e-13


@pytest.mark.parametrize("fam", PERTURBED)
def test_delta_x_linearity(fam):
    correct, err = family_domain("omega"), family_domain(fam, 0.08)
    s = np.linspace(0, 1, 20)
    XI, ETA = np.meshgrid(s, s, indexing="ij")
    dG = err.curves[0](XI) - correct.curves[0](XI)
    dX = err.position(XI, ETA) - correct.position(XI, ETA)
    assert np.abs(dX - (1 - ETA) * dG).max() < 1e-13


@pytest.mark.parametrize("fam", PERTURBED)
def test_metric_error_closed_forms(fam):
    g = TensorGrid(10)
    correct, err = family_domain("omega"), family_domain(fam, 0.06)
    mc, me = metric_terms(correct, g), metric_terms(err, g)
    dG = err.curves[0](g.XI) - correct.curves[0](g.XI)
    dG1 = err.curves[0].deriv(g.XI) - correct.curves[0].deriv(g.XI)
    # dJa1 = dX_eta x z with dX_eta = -dGamma; dJa2 = z x dX_xi with dX_xi = (1-eta) dGamma'
    dJa1 = np.stack([-dG[1], dG[0]])
    dJa2 = (1 - g.ETA) * np.stack([-dG1[1], dG1[0]])
    assert np.abs(me.Ja1 - mc.Ja1 - dJa1).max() < 1e-12
    assert np.abs(me.Ja2 - mc.Ja2 - dJa2).max() < 1e-12


def test_jacobian_is_cross_product():
    g = TensorGrid(9)
    dom = family_domain("omega4", 0.1)
    m = metric_terms(dom, g)
    np.testing.assert_allclose(m.J, m.X_xi[0] * m.X_eta[1] - m.X_xi[1] * m.X_eta[0], atol=1e-15)
    # cross-check J at a corner against finite differences of the map
    h = 1e-6
    xx = (dom.position(h, 0.0) - dom.position(-h, 0.0)) / (2 * h)
    xe = (dom.position(0.0, h) - dom.position(0.0, -h)) / (2 * h)
    assert abs(dom.jacobian(0.0, 0.0) - (xx[0] * xe[1] - xx[1] * xe[0])) < 1e-8


@st.composite
def polynomial_domains(draw):
    deg = draw(st.integers(1, 4))
    cy = [0.0] + [draw(st.floats(-0.08, 0.08)) for _ in range(deg)]
    cy[-1] -= sum(cy)  # bottom curve ends at y = 0
    ty = [1.0] + [draw(st.floats(-0.08, 0.08)) for _ in range(deg)]
    ty[-1] -= sum(ty) - 1.0
    return blend_domain(polynomial_curve([0.0, 1.0], cy), polynomial_curve([0.0, 1.0], ty))


@settings(max_examples=40, deadline=None)
@given(dom=polynomial_domains(), N=st.integers(6, 18))
def test_discrete_metric_identity(dom, N):
    g = TensorGrid(N)
    m = metric_terms(dom, g)
    for n in (0, 1):
        div = g.gradient(m.Ja1[n])[0] + g.gradient(m.Ja2[n])[1]
        assert np.abs(div).max() < 1e-11


def test_interval_jacobian():
    g = TensorGrid(8, 0)
    m = metric_terms(interval_domain(0.1), g)
    np.testing.assert_allclose(m.J, 0.9, atol=1e-15)


def test_circle_examples():
    np.testing.assert_allclose(circle_curve("arc_length")(0.0), [0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(circle_curve("x_param")(1.0), [1.0, 0.0], atol=1e-15)
    for p in ("x_param", "arc_length"):
        exact, quad = circle_curve(p), circle_curve(p, "quadratic_interp")
        for s in (0.0, 0.5, 1.0):
            np.testing.assert_array_equal(quad(s), exact(s))
    dom = circle_domain("x_param", "quadratic_interp")
    np.testing.assert_allclose(dom.position(0.5, 1.0), [0.75, 3.0], atol=1e-14)
    with pytest.raises(ValueError):
        circle_curve("polar")


def test_delta_gamma_examples():
    c = bottom_curve("omega", 0)
    assert delta_gamma(c, c).as_tuple() == (0.0, 0.0, 0.0)
    ce = delta_gamma(c, bottom_curve("omega2", 0.1))
    assert ce.max_location == pytest.approx(0.05, abs=1e-12)
    ce = delta_gamma(arc_length_circle(), circle_curve("x_param", "quadratic_interp"))
    assert ce.max_location == pytest.approx(0.27, rel=0.05)
    assert ce.max_derivative == pytest.approx(1.34, rel=0.05)
    with pytest.raises(ValueError):
        delta_gamma(c, c, n_samples=10)


def test_delta_gamma_derivatives_of_families():
    c = bottom_curve("omega", 0)
    d = 0.1
    assert delta_gamma(c, bottom_curve("omega1", d)).as_tuple() == pytest.approx((d, d, 0.0), abs=1e-12)
    # 4096 uniform samples miss the vertex at s = 1/2 by half a spacing
    assert delta_gamma(c, bottom_curve("omega3", d)).as_tuple() == pytest.approx((d, 4 * d, 8 * d), abs=1e-7)


def test_mixed_domain():
    correct, err = family_domain("omega"), family_domain("omega1", 0.1)
    assert mixed_domain(correct, err, "correct", "correct") is correct
    assert mixed_domain(correct, err, "erroneous", "erroneous") is err
    m = mixed_domain(correct, err, "correct", "erroneous")
    assert m.synthetic
    g = TensorGrid(5)
    np.testing.assert_array_equal(m.position(g.XI, g.ETA), correct.position(g.XI, g.ETA))
    np.testing.assert_array_equal(m.jacobian(g.XI, g.ETA), err.jacobian(g.XI, g.ETA))
    with pytest.raises(ValueError):
        mixed_domain(correct, err, "neither", "correct")


def test_face_geometry_signs_and_normals():
    g = TensorGrid(4)
    f = face_geometry(family_domain("omega"), g)
    assert f["bottom"].sign == -1 and f["right"].sign == 1
    np.testing.assert_allclose(f["bottom"].Ja_normal, np.stack([np.zeros(5), np.ones(5)]), atol=1e-15)
    np.testing.assert_allclose(f["top"].position[1], 1.0, atol=1e-15)


def test_domain_spec_round_trip(tmp_path):
    for spec in (DomainSpec("omega3", 0.05), DomainSpec("circle", 0.0, "x_param", "quadratic_interp"),
                 DomainSpec("interval", 0.1)):
        again = DomainSpec.from_json(spec.to_json())
        assert again == spec
        p = tmp_path / "d.json"
        p.write_text(spec.to_json())
        assert DomainSpec.load(p) == spec
        g = TensorGrid(4)
        np.testing.assert_array_equal(again.build().position(g.XI, g.ETA), spec.build().position(g.XI, g.ETA))
    assert json.loads(DomainSpec().to_json())["family"] == "omega"
