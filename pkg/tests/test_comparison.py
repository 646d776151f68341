import numpy as np
import pytest

from ahg.comparison import (
    check_diameter,
    check_evolution_identity,
    check_hessian_comparison_general,
    check_hessian_comparison_nk,
    cut_distance,
    distance_hessian,
    distance_hessian_at,
    integrate_geodesic,
    laplacian_bound,
    nk_bound,
    parallel_frame_along,
    sample_directions,
)
from ahg.manifold import ClassificationError, CutLocusError, DomainError, PointRef
from ahg.models import build_model, default_origin, stereo

from conftest import assert_close, model


def _radial_transverse(hs):
    return hs.H[0, 0].real, np.diag(hs.H)[1:].real


def test_flat_geodesic_is_straight():
    M = model("flat_cn", 2)
    o = default_origin(M)
    v = np.array([0.6, 0.0, -0.8, 0.0])
    path = integrate_geodesic(M, o, v, 2.0, rho_grid=(0.5, 2.0))
    for rho, p in path.samples:
        assert np.max(np.abs(p.coords - rho * v)) <= 1e-12


def test_s6_great_circle():
    M = model("s6_nk")
    o = default_origin(M)
    v = sample_directions(M, o, 1, 3)[0]
    path = integrate_geodesic(M, o, v, np.pi / 2, rho_grid=(np.pi / 2,))
    q = path.points[path.index(np.pi / 2)]
    exact = M.geodesic(o, v, np.pi / 2)
    assert np.max(np.abs(stereo(q.chart_id, q.coords[None]) - stereo(exact.chart_id, exact.coords[None]))) <= 1e-7


@pytest.mark.parametrize("name,reach", [("s6_nk", 3.0), ("hopf", 3.0), ("chn_ball", 2.0)])
def test_unit_speed_over_long_arc(name, reach):
    # the ball chart ends at distance about 2.3 once the stencil margin is taken off
    M = model(name)
    o = default_origin(M)
    for v in sample_directions(M, o, 3, 1):
        rho_max = min(reach, 0.95 * cut_distance(M, o, v))
        path = integrate_geodesic(M, o, v, rho_max)
        assert path.speed_residual <= 1e-8
        assert np.all(np.diff(path.rhos) > 0)


def test_geodesic_refuses_cut_locus():
    M = model("s6_nk")
    o = default_origin(M)
    with pytest.raises(CutLocusError):
        integrate_geodesic(M, o, np.ones(6), 3.5)
    with pytest.raises(DomainError):
        integrate_geodesic(M, o, np.zeros(6), 1.0)


def test_flat_transport_is_constant():
    M = model("flat_cn", 2)
    o = default_origin(M)
    path = integrate_geodesic(M, o, np.array([1.0, 0.5, 0.0, -0.3]), 1.5)
    tr = parallel_frame_along(M, path)
    for E in tr.frames:
        assert np.max(np.abs(E - tr.frames[0])) <= 1e-12


def test_s6_transport_keeps_radial_vector():
    M = model("s6_nk")
    o = default_origin(M)
    for v in sample_directions(M, o, 2, 0):
        path = integrate_geodesic(M, o, v, 3.0)
        tr = parallel_frame_along(M, path)
        assert np.max(tr.e1_drift) <= 1e-6
        assert np.max(tr.unitarity) <= 1e-7


def test_hopf_transport_drift_is_reported(hopf):
    o = default_origin(hopf)
    v = sample_directions(hopf, o, 1, 0)[0]
    tr = parallel_frame_along(hopf, integrate_geodesic(hopf, o, v, 1.0))
    assert not tr.radial_expected
    assert np.max(tr.unitarity) <= 1e-7
    assert np.max(tr.e1_drift) > 1e-3


@pytest.mark.parametrize("rho", [0.2, 0.5, 1.0])
def test_flat_hessian_entries(rho):
    M = model("flat_cn", 2)
    o = default_origin(M)
    path = integrate_geodesic(M, o, np.array([0.3, -1.0, 0.2, 0.5]), rho, rho_grid=(rho,))
    hs = distance_hessian(M, o, path, rho)
    rad, tr = _radial_transverse(hs)
    assert abs(rad - 1 / (2 * rho)) <= 1e-6
    assert np.max(np.abs(tr - 1 / rho)) <= 1e-6


@pytest.mark.parametrize("name,K", [("cpn_fs", 1.0), ("cpn_fs", 0.5), ("chn_ball", -1.0)])
def test_space_form_hessian_entries(name, K):
    M = build_model(name, 2, K)
    o = default_origin(M)
    f = (lambda x: 1 / np.tan(x)) if K > 0 else (lambda x: 1 / np.tanh(x))
    s, t = np.sqrt(abs(K) / 2), np.sqrt(2 * abs(K))
    for v in sample_directions(M, o, 2, 4):
        path = integrate_geodesic(M, o, v, 1.0, rho_grid=(0.2, 0.5, 1.0))
        for rho in (0.2, 0.5, 1.0):
            hs = distance_hessian(M, o, path, rho)
            rad, tr = _radial_transverse(hs)
            assert abs(rad - t / 2 * f(t * rho)) <= 1e-4
            assert np.max(np.abs(tr - s * f(s * rho))) <= 1e-4


@pytest.mark.parametrize("name", ["flat_cn", "cpn_fs", "s6_nk", "hopf", "chn_ball"])
def test_hessian_sample_invariants(name):
    M = model(name)
    o = default_origin(M)
    v = sample_directions(M, o, 1, 2)[0]
    path = integrate_geodesic(M, o, v, 0.8, rho_grid=(0.4, 0.8))
    for rho in (0.4, 0.8):
        hs = distance_hessian(M, o, path, rho)
        assert abs(hs.gradient[0] - 1 / np.sqrt(2)) <= 1e-6
        assert np.max(np.abs(hs.gradient[1:]), initial=0.0) <= 1e-6
        assert hs.hermitian_residual <= 1e-6
        assert hs.first_order_residual <= 1e-6


def test_nearly_kaehler_radial_column():
    # rho_{i1} = -rho_{i 1bar}
    M = model("s6_nk")
    o = default_origin(M)
    n = 3
    for v in sample_directions(M, o, 2, 5):
        path = integrate_geodesic(M, o, v, 1.2, rho_grid=(0.3, 1.2))
        for rho in (0.3, 1.2):
            full = distance_hessian(M, o, path, rho).full
            assert np.max(np.abs(full[:n, 0] + full[:n, n])) <= 1e-5


def test_hessian_needs_analytic_distance():
    M = model("flat_cn")
    from dataclasses import replace

    bare = replace(M, distance_field=None)
    with pytest.raises(DomainError):
        distance_hessian_at(bare, default_origin(M), PointRef("C", np.ones(4)))


def test_general_comparison_flat_equality():
    M = model("flat_cn", 2)
    rep = check_hessian_comparison_general(M, default_origin(M), directions=2, rho_grid=(0.2, 0.5, 1.0), samples=8)
    assert rep.passed
    for row in rep.rows:
        if "max_eig" in row:
            assert abs(row["max_eig"] - row["bound"]) <= 1e-6


@pytest.mark.parametrize("name", ["hopf", "chn_ball"])
def test_general_comparison_holds(name):
    M = model(name)
    rep = check_hessian_comparison_general(M, default_origin(M), directions=3, rho_grid=(0.1, 0.5, 1.0), samples=16)
    assert rep.passed
    assert rep.min_margin > 0
    assert rep.details["A_plus_Astar_margin"] >= -1e-4


def test_general_comparison_chn_transverse_below_bound():
    M = build_model("chn_ball", 2, -1.0)
    rep = check_hessian_comparison_general(M, default_origin(M), directions=2, rho_grid=(0.5, 1.0), samples=16, riccati=False)
    s = np.sqrt(0.5)
    for row in rep.rows:
        assert abs(row["max_eig"] - s / np.tanh(s * row["rho"])) <= 1e-4
        assert row["max_eig"] < row["bound"]


def test_nk_comparison_space_form_equality():
    M = build_model("cpn_fs", 2, 1.0)
    o = default_origin(M)
    rep = check_hessian_comparison_nk(M, o, directions=2, rho_grid=(0.5,))
    assert rep.passed and rep.details["equality_gap"] <= 1e-4
    v = sample_directions(M, o, 1, 0)[0]
    hs = distance_hessian(M, o, integrate_geodesic(M, o, v, 0.5, rho_grid=(0.5,)), 0.5)
    assert abs(hs.H[0, 0].real - np.sqrt(2) / 2 / np.tan(np.sqrt(2) * 0.5)) <= 1e-4


def test_nk_comparison_flat_branch():
    M = model("flat_cn", 2)
    rep = check_hessian_comparison_nk(M, default_origin(M), directions=2, rho_grid=(0.2, 1.0))
    assert rep.details["branch"] == "zero" and rep.passed
    assert rep.details["equality_gap"] <= 1e-6


def test_nk_comparison_s6():
    M = model("s6_nk")
    rep = check_hessian_comparison_nk(M, default_origin(M), directions=3, rho_grid=(0.2, 0.5, 1.0))
    assert rep.passed and rep.details["branch"] == "positive"
    assert rep.min_margin >= -1e-4


def test_nk_comparison_refuses_hermitian(hopf):
    with pytest.raises(ClassificationError):
        check_hessian_comparison_nk(hopf, default_origin(hopf))


def test_nk_bound_branches_and_laplacian_trace():
    grad = np.array([1 / np.sqrt(2), 0, 0])
    for K in (1.0, 0.0, -1.0):
        B = nk_bound(0.7, K, grad)
        assert abs(2 * np.trace(B).real - laplacian_bound(0.7, K, 3)) <= 1e-12
    assert_close(nk_bound(0.7, 0.0, grad), np.diag([1 / 1.4, 1 / 0.7, 1 / 0.7]), 1e-12)


def test_diameter_space_form_sharp():
    M = build_model("cpn_fs", 1, 1.0)
    rep = check_diameter(M, default_origin(M), directions=2)
    assert rep.passed
    assert abs(rep.details["K"] - 2.0) <= 1e-3
    assert rep.details["sharp"] and abs(rep.details["model_diameter"] - np.pi / np.sqrt(2)) <= 1e-12


def test_diameter_s6():
    M = model("s6_nk")
    rep = check_diameter(M, default_origin(M), directions=2)
    assert rep.passed and rep.details["K"] <= 1 + 1e-3 and rep.details["diameter_ok"]


def test_diameter_rejects_nonpositive_K():
    M = model("flat_cn")
    with pytest.raises(DomainError):
        check_diameter(M, default_origin(M), directions=1)


def test_tolerance_monotone():
    M = model("s6_nk")
    o = default_origin(M)
    prev = False
    for tol in (1e-12, 1e-8, 1e-4, 1e-2):
        rep = check_hessian_comparison_nk(M, o, directions=1, rho_grid=(0.5,), K=0.5, tol=tol)
        assert rep.passed or not prev
        prev = rep.passed


@pytest.mark.parametrize("name,tol", [("flat_cn", 1e-5), ("cpn_fs", 1e-4), ("s6_nk", 1e-4), ("hopf", 1e-4), ("chn_ball", 1e-4)])
def test_evolution_identity(name, tol):
    M = model(name)
    o = default_origin(M)
    v = sample_directions(M, o, 1, 6)[0]
    path = integrate_geodesic(M, o, v, 1.0, rho_grid=(0.2, 0.6, 1.0))
    rep = check_evolution_identity(M, o, path, (0.2, 0.6, 1.0))
    assert rep.max_residual <= tol
