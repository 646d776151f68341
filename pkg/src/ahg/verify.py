"""Identity checks returning quantified residuals."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import fd
from .connection import (
    LocalGeometry,
    canonical,
    covariant_derivative_coords,
    function_jets,
    hessian_coords,
    levi_civita,
    to_frame,
)
from .curvature import FrameTensors
from .frames import choose_pivots_batch, frame_batch, unitary_frame_at
from .manifold import ClassificationError, ManifoldSpec, PointRef

# tolerance ladder
TOL_ALGEBRAIC = 1e-7
TOL_FIRST = 1e-6
TOL_CURVATURE = 1e-5


@dataclass
class ResidualReport:
    identity_id: str
    max_residual: float
    location: Optional[PointRef]
    tolerance: float
    passed: bool = field(init=False)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.max_residual = float(self.max_residual)
        self.passed = bool(self.max_residual <= self.tolerance)

    @property
    def pass_(self) -> bool:
        return self.passed

    def to_json(self) -> dict:
        return {
            "identity_id": self.identity_id,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "location": None if self.location is None else self.location.to_json(),
            "details": self.details,
        }


def merge(reports: Sequence[ResidualReport]) -> ResidualReport:
    """Max-reduction of reports of one identity (associative)."""
    worst = max(reports, key=lambda r: r.max_residual)
    return ResidualReport(worst.identity_id, worst.max_residual, worst.location, worst.tolerance, dict(worst.details))


def _tensors(M, p, tensors):
    return FrameTensors.at(M, p, canonical(M)) if tensors is None else tensors


# ---------------------------------------------------------------- almost Hermitian structure


def check_structure(
    M: ManifoldSpec,
    sample: Sequence[PointRef],
    tol_algebraic: float = 1e-10,
    tol_connection: float = TOL_FIRST,
) -> list:
    """J^2 + I, J^T g J - g, frame unitarity, canonical nabla g, nabla J and mixed torsion."""
    n, m = M.complex_dim, M.real_dim
    conn = canonical(M)
    worst = {k: (0.0, None) for k in ("J_squared", "J_compatible", "frame_unitarity", "nabla_g", "nabla_J", "mixed_torsion")}

    def bump(key, val, p):
        if val >= worst[key][0]:
            worst[key] = (float(val), p)

    charts = sorted({p.chart_id for p in sample})
    for chart in charts:
        pts = [p for p in sample if p.chart_id == chart]
        for p in pts:
            M.validate(p)
        X = np.array([p.coords for p in pts])
        g = M.metric(chart, X)
        J = M.acs(chart, X)
        E = frame_batch(g, J, choose_pivots_batch(g, J, n))
        G = conn.christoffel(chart, X)
        dg = fd.derivative(lambda Y: M.metric(chart, Y), X)
        dJ = fd.derivative(lambda Y: M.acs(chart, Y), X)
        for k, p in enumerate(pts):
            bump("J_squared", np.max(np.abs(J[k] @ J[k] + np.eye(m))), p)
            bump("J_compatible", np.max(np.abs(J[k].T @ g[k] @ J[k] - g[k])), p)
            e = E[k][:, :n]
            bump("frame_unitarity", np.max(np.abs(e.T @ g[k] @ e.conj() - np.eye(n))), p)
            bump("nabla_g", np.max(np.abs(covariant_derivative_coords(g[k], dg[k], G[k], "ll"))), p)
            bump("nabla_J", np.max(np.abs(covariant_derivative_coords(J[k], dJ[k], G[k], "ul"))), p)
            T = G[k] - G[k].transpose(0, 2, 1)
            tau = to_frame(T, "ull", E[k], np.linalg.inv(E[k]))
            bump("mixed_torsion", np.max(np.abs(tau[:, :n, n:])), p)
    tols = {"J_squared": tol_algebraic, "J_compatible": tol_algebraic, "frame_unitarity": tol_algebraic}
    return [
        ResidualReport(key, val, p, tols.get(key, tol_connection), {"model": M.name, "points": len(sample)})
        for key, (val, p) in worst.items()
    ]


# ---------------------------------------------------------------- first Bianchi identities


def bianchi_sides(T: FrameTensors) -> dict:
    """LHS and RHS arrays [i, j, k, l] of the four first Bianchi identities."""
    n = T.n
    R, tau, dt = T.R, T.tau, T.dtau
    h, b = slice(0, n), slice(n, 2 * n)
    Rhbhb = R[h, b, h, b]  # R_{i jb k lb}
    sides = {}
    lhs1 = Rhbhb - Rhbhb.transpose(2, 1, 0, 3)
    rhs1 = dt[h, h, h, b].transpose(1, 0, 2, 3) - np.einsum("mik,jlm->ijkl", tau[b, h, h], tau[h, b, b])
    sides["bianchi_1"] = (lhs1, rhs1)
    lhs2 = Rhbhb - Rhbhb.transpose(0, 3, 2, 1)
    # tau^{ib}_{jb lb; k}
    d2 = dt[b, b, b, h].transpose(0, 1, 3, 2)  # [i, j, k, l]
    rhs2 = d2 - np.einsum("ikm,mjl->ijkl", tau[b, h, h], tau[h, b, b])
    sides["bianchi_2"] = (lhs2, rhs2)
    lhs3 = Rhbhb - Rhbhb.transpose(2, 3, 0, 1)
    # tau^l_{ik; jb}
    d3 = dt[h, h, h, b].transpose(1, 3, 2, 0)  # [i, j, k, l]
    rhs3 = d3 + d2 - np.einsum("ikm,mjl->ijkl", tau[b, h, h], tau[h, b, b]) - np.einsum(
        "mik,ljm->ijkl", tau[b, h, h], tau[h, b, b]
    )
    sides["bianchi_3"] = (lhs3, rhs3)
    lhs4 = R[h, b, h, h]
    # -tau^{ib}_{kl; jb} + tau^{ib}_{jb mb} tau^{mb}_{kl}
    rhs4 = -dt[b, h, h, b].transpose(0, 3, 1, 2) + np.einsum("ijm,mkl->ijkl", tau[b, b, b], tau[b, h, h])
    sides["bianchi_4"] = (lhs4, rhs4)
    return sides


def check_bianchi(M: ManifoldSpec, p: PointRef, tensors: Optional[FrameTensors] = None, tol: float = TOL_CURVATURE) -> list:
    T = _tensors(M, p, tensors)
    out = []
    for key, (lhs, rhs) in bianchi_sides(T).items():
        out.append(
            ResidualReport(
                key,
                np.max(np.abs(lhs - rhs)),
                p,
                tol,
                details={"lhs_max": float(np.max(np.abs(lhs))), "rhs_max": float(np.max(np.abs(rhs)))},
            )
        )
    return out


# ---------------------------------------------------------------- Ricci identities


def _gradient_frame(E, df):
    return E.T @ df


def check_ricci_identity(
    M: ManifoldSpec,
    p: PointRef,
    f: Callable,
    section: Optional[Callable] = None,
    tensors: Optional[FrameTensors] = None,
    tol: float = TOL_FIRST,
) -> list:
    """Commutation of covariant derivatives for a function and a (1,0)-vector section.

    ``section`` maps chart points (N, m) to a real vector field (N, m); its
    (1,0) part ``(V - iJV)/2`` is used.  Defaults to a fixed polynomial field.
    """
    T = _tensors(M, p, tensors)
    L = T.geom
    E, F = T.E, T.F
    n = T.n
    _, df, d2f = function_jets(f, p, 2)
    H = E.T @ hessian_coords(df, d2f, L.G) @ E
    grad = E.T @ df
    pred = np.einsum("cab,c->ab", T.tau, grad)
    r11 = np.max(np.abs(H[:n, n:] - H[n:, :n].T))
    r20 = np.max(np.abs((H - H.T - pred)[:n, :n]))
    rall = np.max(np.abs(H - H.T - pred))
    reports = [
        ResidualReport("ricci_identity_f11", r11, p, tol),
        ResidualReport("ricci_identity_f20", r20, p, tol, details={"torsion_term_max": float(np.max(np.abs(pred[:n, :n])))}),
        ResidualReport("ricci_identity_f_all", rall, p, tol),
    ]
    # vector-valued section
    chart = p.chart_id
    if section is None:
        c = p.coords

        def section(X):
            Y = X - c
            return np.stack([np.sin(Y[:, (k + 1) % Y.shape[1]]) + 0.3 * Y[:, k] ** 2 + (k + 1) * 0.1 for k in range(Y.shape[1])], axis=1)

    def s_field(X):
        V = section(X)
        return 0.5 * (V - 1j * np.einsum("nij,nj->ni", M.acs(chart, X), V))

    x = p.coords[None]
    s0, ds, d2s = function_jets(s_field, p, 2)  # ds[l, nu], d2s[l, m, nu]
    G, dG = L.G, L.dG
    Ns = ds.T + np.einsum("vmk,k->vm", G, s0)  # (nabla s)^nu_mu
    dNs = d2s.transpose(0, 2, 1) + np.einsum("lvmk,k->lvm", dG, s0) + np.einsum("vmk,lk->lvm", G, ds)
    NNs = covariant_derivative_coords(Ns, dNs, G, "ul")  # [nu, mu, l]
    lhs = NNs - NNs.transpose(0, 2, 1)
    Rup = L.curvature_up()
    Tc = L.torsion()
    rhs = -np.einsum("vkml,k->vml", Rup, s0) + np.einsum("kml,vk->vml", Tc, Ns)
    res = to_frame(lhs - rhs, "ull", E, F)
    reports.append(
        ResidualReport(
            "ricci_identity_section",
            np.max(np.abs(res)),
            p,
            TOL_CURVATURE,
            details={"curvature_term_max": float(np.max(np.abs(to_frame(rhs, "ull", E, F))))},
        )
    )
    return reports


# ---------------------------------------------------------------- connection comparisons


def default_vector_field(p: PointRef):
    c = np.array(p.coords)

    def X(Y):
        Z = Y - c
        m = Y.shape[1]
        return np.stack([np.cos(Z[:, (k + 2) % m]) * (1 + 0.2 * k) + Z[:, k] * Z[:, (k + 1) % m] for k in range(m)], axis=1)

    return X


def comparison_gaps(M: ManifoldSpec, p: PointRef, f: Callable, X: Optional[Callable] = None, tensors=None) -> dict:
    """Measured and predicted differences between canonical and Levi-Civita operators."""
    T = _tensors(M, p, tensors)
    L = T.geom
    E, F = T.E, T.F
    n = T.n
    tau = T.tau
    G_lc = levi_civita(M).christoffel(p.chart_id, p.coords[None])[0]
    _, df, d2f = function_jets(f, p, 2)
    H = E.T @ hessian_coords(df, d2f, L.G) @ E
    HL = E.T @ hessian_coords(df, d2f, G_lc) @ E
    fa = E.T @ df  # f_a
    fh, fb = fa[:n], fa[n:]
    h, b = slice(0, n), slice(n, 2 * n)
    out = {}
    # f_{i jb} - f_{,i jb} = 1/2 (tau^j_{i l} f_{lb} + tau^{ib}_{jb lb} f_l)
    pred11 = 0.5 * (np.einsum("jil,l->ij", tau[h, h, h], fb) + np.einsum("ijl,l->ij", tau[b, b, b], fh))
    out["hessian_11"] = (H[h, b] - HL[h, b], pred11)
    # f_{ij} - f_{,ij} = 1/2 (tau^l_{ij} f_l + tau^{lb}_{ij} f_lb + tau^{jb}_{il} f_lb + tau^{ib}_{jl} f_lb)
    pred20 = 0.5 * (
        np.einsum("lij,l->ij", tau[h, h, h], fh)
        + np.einsum("lij,l->ij", tau[b, h, h], fb)
        + np.einsum("jil,l->ij", tau[b, h, h], fb)
        + np.einsum("ijl,l->ij", tau[b, h, h], fb)
    )
    out["hessian_20"] = (H[h, h] - HL[h, h], pred20)
    lap = 2.0 * np.trace(H[h, b]).real
    lapL = 2.0 * np.trace(HL[h, b]).real
    # tau^i_{i l} f_lb + tau^{ib}_{ib lb} f_l
    predL = np.einsum("iil,l->", tau[h, h, h], fb) + np.einsum("iil,l->", tau[b, b, b], fh)
    out["laplacian"] = (np.array(lap - lapL), np.array(predL.real))
    out["laplacian_trace_check"] = (np.array(lap), np.array(np.trace(np.linalg.solve(L.g, hessian_coords(df, d2f, L.G)))))
    # divergence of a real vector field
    X = default_vector_field(p) if X is None else X
    x = p.coords[None]
    X0 = X(x)[0]
    dX = fd.derivative(X, x)[0]  # dX[mu, nu]
    div = np.trace(dX) + np.einsum("vvk,k->", L.G, X0)
    divL = np.trace(dX) + np.einsum("vvk,k->", G_lc, X0)
    Xa = F @ X0
    predD = np.einsum("i,jji->", Xa[h], tau[h, h, h]) + np.einsum("i,jji->", Xa[b], tau[b, b, b])
    out["divergence"] = (np.array(div - divL), np.array(predD.real))
    # <D_Y X - nabla_Y X, Z> = 1/2(<tau(X,Y),Z> + <tau(Y,Z),X> - <tau(Z,X),Y>)
    g = L.g
    diff = np.einsum("zv,vyx->zyx", g, G_lc - L.G)  # [z, y, x]
    Tl = np.einsum("zv,vab->zab", g, L.torsion())  # Tl[z, a, b] = <tau(d_a, d_b), d_z>
    pred = 0.5 * (Tl.transpose(0, 2, 1) + Tl.transpose(2, 1, 0) - Tl.transpose(1, 0, 2))
    # terms: <tau(X,Y),Z> = Tl[z,x,y]; <tau(Y,Z),X> = Tl[x,y,z]; <tau(Z,X),Y> = Tl[y,z,x]
    out["connection_difference"] = (diff, pred)
    return out


def check_connection_comparisons(
    M: ManifoldSpec,
    p: PointRef,
    f: Callable,
    X: Optional[Callable] = None,
    tensors: Optional[FrameTensors] = None,
    tol: float = TOL_FIRST,
) -> list:
    gaps = comparison_gaps(M, p, f, X, tensors)
    reports = []
    for key in ("hessian_11", "hessian_20", "laplacian", "divergence", "connection_difference"):
        meas, pred = gaps[key]
        reports.append(
            ResidualReport(
                f"comparison_{key}",
                np.max(np.abs(meas - pred)),
                p,
                tol,
                details={"measured_max": float(np.max(np.abs(meas))), "predicted_max": float(np.max(np.abs(pred)))},
            )
        )
    if M.kind in ("kaehler", "quasi_kaehler", "nearly_kaehler"):
        for key in ("hessian_11", "laplacian", "divergence"):
            meas, _ = gaps[key]
            reports.append(ResidualReport(f"quasi_kaehler_{key}_equal", np.max(np.abs(meas)), p, tol))
    return reports


# ---------------------------------------------------------------- classification


def torsion_evidence(tau: np.ndarray) -> dict:
    n = tau.shape[0] // 2
    t20 = tau[:n, :n, :n]
    t02 = tau[n:, :n, :n]
    cyc = t02 - t02.transpose(1, 2, 0)  # tau^{kb}_{ij} - tau^{ib}_{jk}: [k,i,j] vs [i,j,k]
    return {
        "torsion": float(np.max(np.abs(tau))),
        "tau_20": float(np.max(np.abs(t20))),
        "tau_02": float(np.max(np.abs(t02))),
        "cyclic_02": float(np.max(np.abs(cyc))),
    }


def _class_from(ev: dict) -> str:
    thr = 1e-5 * (1.0 + ev["torsion"])
    if ev["torsion"] <= thr:
        return "kaehler"
    if ev["tau_20"] <= thr and ev["cyclic_02"] <= thr:
        return "nearly_kaehler"
    if ev["tau_20"] <= thr:
        return "quasi_kaehler"
    if ev["tau_02"] <= thr:
        return "hermitian"
    return "general"


@dataclass
class Classification:
    tag: str
    evidence: list
    declared: str

    @property
    def matches_declared(self) -> bool:
        return self.tag == self.declared


def classify(M: ManifoldSpec, sample: Sequence[PointRef]) -> Classification:
    """Class tag from torsion of the canonical connection computed without assuming a class."""
    if len(sample) == 0:
        raise ClassificationError("classification needs at least one sample point")
    conn = canonical(M, path="b")
    # sort for order independence of the evidence list
    pts = sorted(sample, key=lambda q: (q.chart_id, tuple(q.coords)))
    evidence, tags = [], set()
    for p in pts:
        M.validate(p)
        L = LocalGeometry(M, p, conn)
        E = unitary_frame_at(M, p).full
        tau = to_frame(L.torsion(), "ull", E, np.linalg.inv(E))
        ev = torsion_evidence(tau)
        ev["point"] = p.to_json()
        tag = _class_from(ev)
        ev["tag"] = tag
        evidence.append(ev)
        tags.add(tag)
    if len(tags) > 1:
        raise ClassificationError(f"classification unstable across sample: {sorted(tags)}")
    return Classification(tags.pop(), evidence, M.kind)


def check_kirichenko(M: ManifoldSpec, sample: Sequence[PointRef], tol: float = TOL_CURVATURE) -> ResidualReport:
    if M.kind not in ("nearly_kaehler", "kaehler"):
        raise ClassificationError(f"parallel torsion is asserted only for nearly Kaehler manifolds, {M.name} is {M.kind}")
    worst, loc = 0.0, None
    for p in sample:
        T = FrameTensors.at(M, p, canonical(M))
        r = float(np.max(np.abs(T.dtau)))
        if loc is None or r > worst:
            worst, loc = r, p
    return ResidualReport("kirichenko_parallel_torsion", worst, loc, tol)
