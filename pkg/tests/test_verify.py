import numpy as np
import pytest
from hypothesis import given, strategies as st

from ahg import fd
from ahg.curvature import FrameTensors
from ahg.manifold import ClassificationError, PointRef
from ahg.models import random_points, stereo
from ahg.verify import (
    ResidualReport,
    check_bianchi,
    check_connection_comparisons,
    check_kirichenko,
    check_ricci_identity,
    check_structure,
    classify,
    comparison_gaps,
    merge,
)

from conftest import ALL_MODELS, model

SMOOTH = lambda X: np.sin(X[:, 0]) * np.exp(0.3 * X[:, 1]) + X[:, -1] ** 2 - 0.5 * X[:, 0] * X[:, -1]


def _by_id(reports):
    return {r.identity_id: r for r in reports}


@pytest.mark.parametrize("name", ALL_MODELS)
def test_structure_checks_pass_on_100_points(name):
    M = model(name)
    for r in check_structure(M, random_points(M, 100, 3)):
        assert r.passed, (r.identity_id, r.max_residual)


def test_bianchi_flat():
    M = model("flat_cn", 2)
    for r in check_bianchi(M, random_points(M, 1, 0)[0]):
        assert r.max_residual <= 1e-8


@pytest.mark.parametrize("name", ALL_MODELS)
def test_bianchi_all_models(name):
    M = model(name)
    for p in random_points(M, 2, 6):
        for r in check_bianchi(M, p):
            assert r.passed, (name, r.identity_id, r.max_residual)


def test_bianchi_s6_fourth_identity_sides_vanish():
    M = model("s6_nk")
    r = _by_id(check_bianchi(M, random_points(M, 1, 1)[0]))["bianchi_4"]
    assert r.max_residual <= 1e-5
    assert r.details["lhs_max"] <= 1e-5 and r.details["rhs_max"] <= 1e-5


def test_bianchi_hopf_torsion_terms_are_active(hopf):
    # both sides are nonzero here, so agreement is a real test of the torsion terms
    r = _by_id(check_bianchi(hopf, random_points(hopf, 1, 1)[0]))["bianchi_1"]
    assert r.passed and r.details["lhs_max"] > 1e-2


def test_ricci_identity_kaehler_symmetric_hessian():
    M = model("cpn_fs", 2)
    for p in random_points(M, 2, 0):
        r = _by_id(check_ricci_identity(M, p, SMOOTH))
        assert r["ricci_identity_f20"].max_residual <= 1e-6
        assert r["ricci_identity_f20"].details["torsion_term_max"] <= 1e-7


def test_ricci_identity_s6_ambient_coordinate():
    M = model("s6_nk")
    for p in random_points(M, 2, 3):
        f = lambda U, c=p.chart_id: stereo(c, U)[:, 2]
        for r in check_ricci_identity(M, p, f):
            assert r.max_residual <= 1e-5, r.identity_id
        assert _by_id(check_ricci_identity(M, p, f))["ricci_identity_f20"].details["torsion_term_max"] > 1e-2


def test_ricci_identity_flat_polynomial():
    M = model("flat_cn", 2)
    p = PointRef("C", [0.2, -0.1, 0.3, 0.05])
    f = lambda X: X[:, 0] ** 2 * X[:, 1] + X[:, 2] * X[:, 3]
    r = _by_id(check_ricci_identity(M, p, f))
    for key in ("ricci_identity_f11", "ricci_identity_f20", "ricci_identity_f_all"):
        assert r[key].max_residual <= 1e-9


@pytest.mark.parametrize("name", ALL_MODELS)
def test_ricci_identity_section_all_models(name):
    M = model(name)
    p = random_points(M, 1, 2)[0]
    assert _by_id(check_ricci_identity(M, p, SMOOTH))["ricci_identity_section"].passed


@pytest.mark.parametrize("name", ALL_MODELS)
def test_comparisons_all_models(name):
    M = model(name)
    for p in random_points(M, 2, 9):
        for r in check_connection_comparisons(M, p, SMOOTH):
            assert r.passed, (name, r.identity_id, r.max_residual)


def test_space_form_laplacians_agree():
    M = model("cpn_fs", 2)
    for p in random_points(M, 2, 1):
        r = _by_id(check_connection_comparisons(M, p, SMOOTH))
        assert r["quasi_kaehler_laplacian_equal"].max_residual <= 1e-6


def test_flat_gaps_vanish():
    M = model("flat_cn", 2)
    p = random_points(M, 1, 1)[0]
    for r in check_connection_comparisons(M, p, SMOOTH):
        assert r.max_residual <= 1e-9


def _log_norm(X):
    return np.log(np.sum(X**2, axis=1))


def test_hopf_laplacian_gap_matches_torsion_prediction(hopf):
    for p in random_points(hopf, 3, 4):
        meas, pred = comparison_gaps(hopf, p, _log_norm)["laplacian"]
        assert abs(float(meas)) > 0.5
        assert abs(float(meas - pred)) <= 1e-5


def test_hopf_laplacian_gap_index_placement(hopf):
    # contracting the second torsion term on its first and third slots
    # gives a visibly different number; only the conjugate-trace form matches
    n = 2
    p = random_points(hopf, 1, 4)[0]
    T = FrameTensors.at(hopf, p)
    from ahg.connection import function_jets

    fa = T.E.T @ function_jets(_log_norm, p, 1)[1]
    tau = T.tau
    h, b = slice(0, n), slice(n, 2 * n)
    meas, _ = comparison_gaps(hopf, p, _log_norm, tensors=T)["laplacian"]
    other = (np.einsum("iil,l->", tau[h, h, h], fa[b]) + np.einsum("lil,l->", tau[b, b, b], fa[h])).real
    assert abs(float(meas) - other) > 0.1


def test_classification_of_catalog():
    expected = {"flat_cn": "kaehler", "cpn_fs": "kaehler", "chn_ball": "kaehler", "s6_nk": "nearly_kaehler", "hopf": "hermitian"}
    for name, tag in expected.items():
        M = model(name)
        c = classify(M, random_points(M, 3, 0))
        assert c.tag == tag and c.matches_declared
    hopf_ev = classify(model("hopf"), random_points(model("hopf"), 2, 0)).evidence
    assert all(ev["tau_20"] > 1e-2 for ev in hopf_ev)


def test_classification_idempotent_and_order_free():
    M = model("s6_nk")
    pts = random_points(M, 3, 5)
    a = classify(M, pts)
    b = classify(M, pts[::-1])
    assert a.tag == b.tag
    assert [e["point"] for e in a.evidence] == [e["point"] for e in b.evidence]
    assert classify(M, pts).evidence == a.evidence


def test_classification_needs_points():
    with pytest.raises(ClassificationError):
        classify(model("flat_cn"), [])


def test_kirichenko():
    M = model("s6_nk")
    assert check_kirichenko(M, random_points(M, 3, 0)).max_residual <= 1e-5
    K = model("cpn_fs", 2)
    assert check_kirichenko(K, random_points(K, 2, 0)).max_residual <= 1e-9
    with pytest.raises(ClassificationError):
        check_kirichenko(model("hopf"), random_points(model("hopf"), 1, 0))


def _s6_ricci_error():
    from ahg.curvature import ricci_at

    M = model("s6_nk")
    p = PointRef("N", [0.03, -0.02, 0.01, 0.025, -0.015, 0.05])
    return float(np.max(np.abs(ricci_at(M, p, "levi_civita") - 5 * np.eye(3))))


def _hopf_scalar_error():
    # C^2 minus 0 with |z|^-2 times the flat metric is R x S^3: half the scalar curvature is 3
    from ahg.curvature import ricci_at

    M = model("hopf")
    p = PointRef("annulus", [5.0, 1.0, -2.0, 1.5])
    return abs(float(np.trace(ricci_at(M, p, "levi_civita")).real) - 3.0)


def _cpn_curvature_error():
    from ahg.curvature import curvature_at

    M = model("cpn_fs", 2, 1.0)
    p = PointRef("affine", [0.3, -0.2, 0.1, 0.25])
    d = np.eye(2)
    ex = np.einsum("ij,kl->ijkl", d, d) + np.einsum("il,kj->ijkl", d, d)
    return float(np.max(np.abs(curvature_at(M, p).block("hbhb") - ex)))


@pytest.mark.parametrize("err", [_s6_ricci_error, _hopf_scalar_error, _cpn_curvature_error])
def test_identity_residual_shrinks_with_step(err, monkeypatch):
    # at least fourth order until the roundoff floor is reached
    res = []
    for h in (2e-2, 1e-2):
        monkeypatch.setattr(fd, "STEP", h)
        res.append(err())
    assert res[1] <= res[0] / 16 or max(res) <= 1e-9


residual_reports = st.builds(
    ResidualReport,
    st.just("x"),
    st.floats(0, 1e3),
    st.none(),
    st.floats(0, 1e3),
)


@given(a=residual_reports, b=residual_reports, c=residual_reports)
def test_merge_associative(a, b, c):
    left = merge([merge([a, b]), c])
    right = merge([a, merge([b, c])])
    assert left.max_residual == right.max_residual == max(a.max_residual, b.max_residual, c.max_residual)


@given(r=residual_reports)
def test_pass_iff_within_tolerance(r):
    assert r.passed == (r.max_residual <= r.tolerance)
