import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import interior_points, ref_phi
from finslerlab.catalog import (
    FAMILIES,
    MetricSpec,
    PointSample,
    eval_F_jet,
    eval_phi,
    feasible_radius,
    list_catalog,
)
from finslerlab.curvature import q_numerator
from finslerlab.errors import DegenerateMetricError, DomainError, UsageError
from finslerlab.jets import sqrt
from finslerlab.verifier import Grid


def phi_at(family, r, s, **params):
    return eval_phi(MetricSpec(family, params), PointSample(r, s), 2).value


def test_funk_at_origin():
    assert phi_at("funk", 1e-3, 0.0) == pytest.approx(1.0, abs=1e-6)


def test_funk_value():
    assert phi_at("funk", 0.5, 0.2) == pytest.approx((np.sqrt(0.79) + 0.2) / 0.75, rel=1e-15)
    assert phi_at("funk", 0.5, 0.2) == pytest.approx(1.4517593, abs=5e-8)


def test_berwald_at_origin():
    assert phi_at("berwald", 1e-3, 0.0) == pytest.approx(1.0, abs=1e-5)


@pytest.mark.parametrize("family", sorted(FAMILIES))
def test_matches_reference_values(family):
    spec = MetricSpec(family, {})
    r, s = interior_points(spec, 10, seed=3)
    values = eval_phi(spec, PointSample(r, s), 0).value
    ref = np.array([float(ref_phi(family, {})(a, b)) for a, b in zip(r, s)])
    assert np.allclose(values, ref, rtol=1e-13, atol=0)


@settings(max_examples=50)
@given(st.floats(1e-3, 0.99), st.floats(-1.0, 1.0))
def test_shen_zero_is_half_funk(r, frac):
    s = r * frac
    half = 0.5 * phi_at("funk", r, s)
    assert abs(phi_at("shen", r, s, eps=0.0) - half) <= 1e-14 * abs(half)


@pytest.mark.parametrize("family,params", [("funk", {}), ("berwald", {}), ("shen", {"eps": 0.5}),
                                           ("shen", {"eps": -1.0}), ("shen", {"eps": -0.5})])
def test_projectively_flat_on_grid(family, params):
    spec = MetricSpec(family, params)
    pts = Grid(20, 20).points(spec)
    phi = eval_phi(spec, pts, 3, dtype=np.longdouble)
    ratio = np.abs(q_numerator(phi, pts)) / np.maximum(1.0, np.abs(phi.partial((1, 0))))
    assert float(ratio.max()) <= 1e-10


@pytest.mark.parametrize("family", ["klein", "proj_sphere", "euclidean"])
def test_riemannian_baselines_quadratic_in_s(family):
    spec = MetricSpec(family, {})
    r, s = interior_points(spec, 8, seed=1)
    phi = eval_phi(spec, PointSample(r, s), 4)
    phi2 = phi * phi
    assert np.allclose(phi2.partial((0, 3)), 0.0, atol=1e-12)
    assert np.allclose(phi2.partial((0, 4)), 0.0, atol=1e-12)


def test_shen_minus_one_is_klein():
    spec = MetricSpec("shen", {"eps": -1.0})
    r, s = interior_points(spec, 10)
    a = eval_phi(spec, PointSample(r, s), 3)
    b = eval_phi(MetricSpec("klein", {}), PointSample(r, s), 3)
    assert np.allclose(a.coeffs, b.coeffs, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("params", [{"eps": 1.0}, {"eps": -1.5}])
def test_shen_parameter_range(params):
    with pytest.raises(UsageError):
        MetricSpec("shen", params)


def test_soln1_requires_negative_K():
    with pytest.raises(UsageError):
        MetricSpec("soln1", {"K": 1.0})


@pytest.mark.parametrize("bad", [dict(family="nope"), dict(family="funk", params={"C": 1.0}),
                                 dict(family="funk", n=1), dict(family="funk", rho=-1.0)])
def test_spec_validation(bad):
    with pytest.raises(UsageError):
        MetricSpec(**bad)


def test_domain_errors_name_the_subexpression():
    spec = MetricSpec("funk", {}, rho=1.5)
    with pytest.raises(DomainError, match=r"1-\(r\^2-s\^2\).*r=1\.2"):
        eval_phi(spec, PointSample(1.2, 0.0), 2)


def test_point_outside_domain():
    spec = MetricSpec("funk", {})
    for r, s in [(1.0, 0.0), (0.5, 0.6), (1e-4, 0.0)]:
        with pytest.raises(DomainError):
            eval_phi(spec, PointSample(r, s), 2)


def test_degenerate_profile():
    spec = MetricSpec("callback", phi_fn=lambda r, s: 1 - 10 * s * s + 0 * r)
    with pytest.raises(DegenerateMetricError):
        eval_phi(spec, PointSample(0.5, 0.3), 2)


def test_raw_printed_k0_profile_is_negative():
    spec = MetricSpec("callback", phi_fn=lambda r, s: 0.5 / (sqrt(2 - r * r + s * s) * (sqrt(2 - r * r + s * s) - s) ** 2)
                      * -1)
    with pytest.raises(DegenerateMetricError):
        eval_phi(spec, PointSample(0.5, 0.1), 2)


def test_bryant_printed_has_smaller_feasible_ball():
    assert MetricSpec("bryant", {}).radius == pytest.approx(0.999)
    printed = MetricSpec("bryant_printed", {}).radius
    assert 0.5 < printed < 0.6


def test_feasible_radius_default_families():
    assert MetricSpec("soln_k0", {}).radius == pytest.approx(np.sqrt(2) * 0.999)
    assert MetricSpec("soln_km1", {}).radius == pytest.approx(1.0 * 0.999)
    assert feasible_radius(MetricSpec("funk", {}), 0.999) == pytest.approx(0.999)


def test_F_jet_euclidean():
    spec = MetricSpec("euclidean", {})
    x = np.array([0.2, -0.1, 0.3])
    y = np.array([1.0, 2.0, -0.5])
    F = eval_F_jet(spec, x, y, 3)
    assert F.value == pytest.approx(np.linalg.norm(y))
    assert np.allclose(F.grad(range(3)).value, 0.0)


@settings(max_examples=10, deadline=None)
@given(st.sampled_from(sorted(FAMILIES)), st.integers(0, 2**31))
def test_F_is_one_homogeneous(family, seed):
    spec = MetricSpec(family, {})
    rng = np.random.default_rng(seed)
    r, s = interior_points(spec, 1, seed=seed % 1000)
    x = np.array([s[0], np.sqrt(r[0] ** 2 - s[0] ** 2), 0.0])
    y = np.array([1.0, 0.0, 0.0]) * rng.uniform(0.5, 2.0)
    F1 = eval_F_jet(spec, x, y, 1).value
    F2 = eval_F_jet(spec, x, 2 * y, 1).value
    assert F2 == pytest.approx(2 * F1, rel=1e-14)


@pytest.mark.parametrize("family", sorted(FAMILIES))
def test_F_constant_term_matches_phi(family):
    spec = MetricSpec(family, {})
    r, s = interior_points(spec, 1, seed=5)
    x = np.array([s[0], np.sqrt(r[0] ** 2 - s[0] ** 2), 0.0])
    y = np.array([1.5, 0.0, 0.0])
    F = eval_F_jet(spec, x, y, 2)
    phi = eval_phi(spec, PointSample(r, s), 0).value[0]
    assert F.value == pytest.approx(1.5 * phi, rel=1e-14)


def test_F_rejects_zero_direction():
    with pytest.raises(DomainError):
        eval_F_jet(MetricSpec("funk", {}), np.array([0.1, 0, 0]), np.zeros(3), 2)


def test_catalog_listing():
    rows = {row["family"]: row for row in list_catalog()}
    assert rows["funk"]["K_target"] == -0.25
    assert rows["berwald"]["K_target"] == 0.0
    assert rows["shen"]["K_target"] == -1.0
    assert rows["soln_k0"]["K_target"] == 0.0
    assert rows["soln_km1"]["K_target"] == -1.0
    assert rows["bryant"]["K_target"] == 1.0
    assert set(rows) >= {"euclidean", "klein", "proj_sphere", "soln1", "soln_family"}
    json.dumps(list_catalog())


def test_spec_serializes():
    d = MetricSpec("shen", {"eps": 0.5}, n=4).to_dict()
    assert d == {"family": "shen", "params": {"eps": 0.5}, "n": 4, "rho": 0.999, "K_target": -1.0}
