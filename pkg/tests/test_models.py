import numpy as np
import pytest
from hypothesis import given, strategies as st

from ahg.comparison import integrate_geodesic
from ahg.manifold import CutLocusError, DomainError, OutOfChartError, PointRef
from ahg.models import CROSS, ModelId, analytic_distance, build_model, cross7, default_origin, random_points, stereo

from conftest import ALL_MODELS, model


def test_flat_structure_exact():
    M = model("flat_cn", 2)
    p = random_points(M, 1, 3)[0]
    assert np.array_equal(M.g(p), np.eye(4))
    assert np.array_equal(M.J(p) @ M.J(p), -np.eye(4))


def test_cpn_metric_at_origin():
    for K in (1.0, 0.5, 3.0):
        M = build_model("cpn_fs", 1, K)
        assert np.allclose(M.g(default_origin(M)), (2.0 / K) * np.eye(2), atol=1e-14)


def test_chn_metric_at_origin():
    M = build_model("chn_ball", 2, -2.0)
    assert np.allclose(M.g(default_origin(M)), np.eye(4), atol=1e-14)


@pytest.mark.parametrize(
    "mid",
    [ModelId("cpn_fs", 1, 0.0), ModelId("chn_ball", 1, 1.0), ModelId("s6_nk", 2), ModelId("hopf", 3), ModelId("flat_cn", 0), ModelId("nope")],
)
def test_invalid_parameters_rejected(mid):
    with pytest.raises(DomainError):
        build_model(mid)


@pytest.mark.parametrize("name", ALL_MODELS)
def test_structure_residuals_on_random_points(name):
    M = model(name)
    for p in random_points(M, 100, 11):
        r = M.structure_residuals(p)
        assert r["J2"] <= 1e-10 and r["JgJ"] <= 1e-10 and r["g_min_eig"] > 0


def test_octonion_table_is_totally_antisymmetric():
    assert np.allclose(CROSS, -CROSS.transpose(1, 0, 2))
    assert np.allclose(CROSS, -CROSS.transpose(0, 2, 1))


@given(seed=st.integers(0, 10_000))
def test_cross_product_squares_to_minus_identity_on_tangent_space(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=7)
    x /= np.linalg.norm(x)
    v = rng.normal(size=7)
    v -= (v @ x) * x
    assert abs(cross7(x, v) @ x) <= 1e-12
    assert np.allclose(cross7(x, cross7(x, v)), -v, atol=1e-12)


def test_s6_stereographic_embedding_lands_on_sphere():
    U = np.random.default_rng(0).normal(size=(50, 6))
    for chart in ("N", "S"):
        assert np.allclose(np.linalg.norm(stereo(chart, U), axis=1), 1.0, atol=1e-14)


def test_s6_nearly_kaehler_condition():
    # (D_X J) X = 0 for every tangent X
    from ahg.connection import covariant_derivative_tensor, levi_civita

    M = model("s6_nk")
    rng = np.random.default_rng(5)
    for p in random_points(M, 5, 2):
        DJ = covariant_derivative_tensor(M, p, lambda Y: M.acs(p.chart_id, Y), "ul", levi_civita(M))
        for _ in range(4):
            X = rng.normal(size=6)
            assert np.max(np.abs(np.einsum("abc,b,c->a", DJ, X, X))) <= 1e-6


def test_flat_distance():
    M = model("flat_cn", 2)
    o = default_origin(M)
    assert analytic_distance(M, o, PointRef("C", [1.0, 0, 0, 0])) == 1.0


def test_s6_antipodal_distance_is_cut_locus():
    from ahg.models import inverse_stereo

    M = model("s6_nk")
    u = np.array([0.4, -0.2, 0.1, 0.3, 0.0, 0.5])
    o = PointRef("N", u)
    x = stereo("N", u[None])[0]
    far = PointRef("S", inverse_stereo("S", -x))
    d = M.distance_field(o, "S")(far.coords[None])[0]
    assert abs(d - np.pi) <= 1e-9
    with pytest.raises(CutLocusError):
        analytic_distance(M, o, far)


@pytest.mark.parametrize("name,K", [("cpn_fs", 1.0), ("cpn_fs", 2.0), ("chn_ball", -1.0)])
def test_space_form_distance_matches_geodesic_length(name, K):
    M = build_model(name, 2, K)
    o = default_origin(M)
    rng = np.random.default_rng(1)
    for _ in range(3):
        v = rng.normal(size=4)
        path = integrate_geodesic(M, o, v, 1.0, step=0.01, rho_grid=(0.3, 0.7, 1.0))
        for rho in (0.3, 0.7, 1.0):
            q = path.points[path.index(rho)]
            assert abs(analytic_distance(M, o, q) - rho) <= 1e-6


def test_exact_geodesic_agrees_with_integration():
    for name in ("s6_nk", "hopf", "cpn_fs"):
        M = model(name)
        o = default_origin(M)
        v = np.random.default_rng(2).normal(size=M.real_dim)
        path = integrate_geodesic(M, o, v, 1.0, rho_grid=(1.0,))
        q = path.points[path.index(1.0)]
        exact = M.geodesic(o, path.direction, 1.0)
        if exact.chart_id != q.chart_id:
            exact = PointRef(q.chart_id, M.transition(exact.chart_id, q.chart_id, exact.coords, None)[0])
        assert np.max(np.abs(exact.coords - q.coords)) <= 1e-7


def test_hopf_distance_is_flat_on_the_cylinder():
    M = model("hopf")
    o = default_origin(M)
    q = PointRef("annulus", [np.e, 0, 0, 0])
    assert abs(analytic_distance(M, o, q) - 1.0) <= 1e-12


def test_validate_rejects_points_near_chart_boundary():
    M = model("chn_ball")
    with pytest.raises(OutOfChartError):
        M.point([0.999, 0.0])
    with pytest.raises(DomainError):
        M.point([0.1, 0.2, 0.3])


def test_random_points_deterministic_and_inside():
    for name in ALL_MODELS:
        M = model(name)
        a = random_points(M, 10, 4)
        b = random_points(M, 10, 4)
        assert all(np.array_equal(x.coords, y.coords) for x, y in zip(a, b))
        for p in a:
            M.validate(p)


def test_s6_chart_transition_roundtrip():
    M = model("s6_nk")
    u = np.array([0.3, -0.5, 0.2, 0.9, 0.1, -0.4])
    v, _ = M.transition("N", "S", u, None)
    w, _ = M.transition("S", "N", v, None)
    assert np.allclose(u, w, atol=1e-14)
    assert np.allclose(stereo("N", u[None]), stereo("S", v[None]), atol=1e-14)
