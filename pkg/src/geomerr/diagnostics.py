"""Geometry-induced error quantities, bound coefficients and the error-energy
budget for linear symmetric hyperbolic systems on mapped domains.

Matrix-valued nodal fields have shape (nx, ny, n, n); vector fields have a
leading axis of length 2. The scalar advection problems use n = 1.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import TensorGrid
from .geometry import contravariant, face_geometry, metric_terms
from .solver import FACE_ORDER, centered_derivative
from .solver import boundary_positions as _boundary_positions

SYMMETRY_TOL = 1e-10
UNIT_VECTOR_TOL = 1e-14
ENERGY_FLOOR = 1e-12
ETA_TRANSIENT = 0.25
BUDGET_COLUMNS = ("t", "energy", "D", "BG", "V1", "V2", "V3", "V4", "residual", "eta")


class SplitError(ValueError):
    """Raised for non-symmetric input or inconsistent characteristic partitions."""


# ---------------------------------------------------------------- systems

@dataclass(frozen=True)
class SymmetricSystem:
    """Space vector of symmetric coefficient matrices, A = A_1 x + A_2 y."""

    A: np.ndarray  # (d, n, n)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ValueError("A must have shape (d, n, n)")
        if np.max(np.abs(A - np.swapaxes(A, 1, 2)), initial=0.0) > 1e-14:
            raise SplitError("coefficient matrices must be symmetric")
        object.__setattr__(self, "A", A)

    @classmethod
    def from_advection(cls, a) -> "SymmetricSystem":
        a = np.atleast_1d(np.asarray(a, dtype=float))
        if a.size == 1:
            a = np.array([a[0], 0.0])
        return cls(a.reshape(-1, 1, 1))

    @property
    def dims(self) -> tuple[int, int]:
        return self.A.shape[0], self.A.shape[1]

    def dot(self, vec) -> np.ndarray:
        """Sum_k vec[k] A_k for vec of shape (d, ...); returns (..., n, n)."""
        return np.einsum("k...,kab->...ab", np.asarray(vec, dtype=float), self.A)


@dataclass
class CharacteristicSplit:
    A_plus: np.ndarray
    A_minus: np.ndarray
    A_abs: np.ndarray
    P: np.ndarray
    Lambda: np.ndarray


def _check_symmetric(M: np.ndarray) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise SplitError("matrix must be square")
    if np.max(np.abs(M - M.T)) > SYMMETRY_TOL:
        raise SplitError(f"matrix asymmetry {np.max(np.abs(M - M.T)):.3e} exceeds {SYMMETRY_TOL}")
    return 0.5 * (M + M.T)


def char_split(M) -> CharacteristicSplit:
    """Eigenvalue splitting M = P Lambda P^T, M+- = P Lambda+- P^T.

    Eigenvalues are sorted in descending order and each eigenvector is
    normalized so its first nonzero component is positive.
    """
    M = _check_symmetric(M)
    lam, P = np.linalg.eigh(M)
    order = np.argsort(-lam, kind="stable")
    lam, P = lam[order], P[:, order]
    for j in range(P.shape[1]):
        nz = np.flatnonzero(np.abs(P[:, j]) > 1e-12)
        if nz.size and P[nz[0], j] < 0:
            P[:, j] = -P[:, j]
    lp, lm = np.maximum(lam, 0.0), np.minimum(lam, 0.0)
    A_plus = (P * lp) @ P.T
    A_minus = (P * lm) @ P.T
    return CharacteristicSplit(A_plus, A_minus, A_plus - A_minus, P, lam)


def boundary_matrix(system: SymmetricSystem, Ja_normal, outward_normal) -> np.ndarray:
    """Normal coefficient matrix (Ja . A) n at a reference face node.

    Args:
        system: coefficient matrices.
        Ja_normal: volume weighted contravariant vector of the face-normal
            reference direction (Ja^1 on xi faces, Ja^2 on eta faces).
        outward_normal: reference-space outward unit normal, e.g. (0, -1) on
            the bottom face.
    """
    n = np.asarray(outward_normal, dtype=float)
    sign = float(n.sum())
    if not np.isclose(abs(sign), 1.0) or np.count_nonzero(n) != 1:
        raise ValueError("outward_normal must be one of the four reference face normals")
    return sign * system.dot(np.asarray(Ja_normal, dtype=float))


def split_consistency(B, A, E) -> dict:
    """Compare the splitting of B = A + E with the split pieces of A and E."""
    B, A, E = (np.atleast_2d(np.asarray(m, float)) for m in (B, A, E))
    if np.max(np.abs(B - A - E)) > 1e-12:
        raise ValueError("B must equal A + E")
    sb, sa, se = char_split(B), char_split(A), char_split(E)
    e_star_p = sb.A_plus - sa.A_plus
    e_star_m = sb.A_minus - sa.A_minus
    return {
        "B_plus": sb.A_plus, "B_minus": sb.A_minus,
        "sum_plus": sa.A_plus + se.A_plus, "sum_minus": sa.A_minus + se.A_minus,
        "E_star_plus": e_star_p, "E_star_minus": e_star_m,
        "plus_discrepancy": float(np.linalg.norm(sb.A_plus - sa.A_plus - se.A_plus, 2)),
        "minus_discrepancy": float(np.linalg.norm(sb.A_minus - sa.A_minus - se.A_minus, 2)),
        "E_star_plus_discrepancy": float(np.linalg.norm(e_star_p - se.A_plus, 2)),
        "E_star_minus_discrepancy": float(np.linalg.norm(e_star_m - se.A_minus, 2)),
    }


def reflection_wellposed(R_bar, Lambda_plus, Lambda_minus) -> tuple[bool, float]:
    """Test Lambda+ + R^T Lambda- R >= 0 for a reflection R from outgoing to incoming."""
    lp = np.atleast_2d(np.asarray(Lambda_plus, dtype=float))
    lm = np.atleast_2d(np.asarray(Lambda_minus, dtype=float))
    if lp.ndim == 2 and lp.shape[0] == 1 and lp.shape[1] > 1:
        lp = np.diag(lp[0])
    if lm.ndim == 2 and lm.shape[0] == 1 and lm.shape[1] > 1:
        lm = np.diag(lm[0])
    R = np.atleast_2d(np.asarray(R_bar, dtype=float))
    if R.shape != (lm.shape[0], lp.shape[0]):
        raise SplitError(
            f"reflection matrix has shape {R.shape}, expected {(lm.shape[0], lp.shape[0])} "
            "(incoming x outgoing)"
        )
    G = lp + R.T @ lm @ R
    lam_min = float(np.min(np.linalg.eigvalsh(0.5 * (G + G.T))))
    return lam_min >= -1e-14, lam_min


# ---------------------------------------------------------- error fields

@dataclass
class GeometricErrorField:
    """Nodal geometry errors between a correct and an erroneous domain."""

    grid: TensorGrid
    J: np.ndarray
    J_e: np.ndarray
    dX: np.ndarray
    dJa1: np.ndarray
    dJa2: np.ndarray
    eps: np.ndarray
    rho: np.ndarray
    vareps: np.ndarray
    grad_vareps: np.ndarray
    A1: np.ndarray  # correct contravariant matrices Ja^1 . A, (nx, ny, n, n)
    A2: np.ndarray
    E1: np.ndarray  # error matrices dJa^i . A
    E2: np.ndarray
    X: np.ndarray
    X_e: np.ndarray
    correct_covariant: tuple = field(repr=False, default=())

    def divergence_E(self) -> np.ndarray:
        """Discrete reference divergence of (E1, E2), shape (nx, ny, n, n)."""
        g = self.grid
        return (np.einsum("ik,kj...->ij...", g.D_xi, self.E1)
                + np.einsum("jk,ik...->ij...", g.D_eta, self.E2))


def geometric_error(correct, erroneous, grid: TensorGrid, system: SymmetricSystem) -> GeometricErrorField:
    """Compute Delta X, Delta Ja^i, eps, rho, vareps, grad vareps and E^i on `grid`."""
    mc = metric_terms(correct, grid)
    me = metric_terms(erroneous, grid)
    eps = me.J - mc.J
    rho = mc.J / me.J
    vareps = rho - 1.0
    dJa1, dJa2 = me.Ja1 - mc.Ja1, me.Ja2 - mc.Ja2
    return GeometricErrorField(
        grid=grid, J=mc.J, J_e=me.J, dX=me.X - mc.X, dJa1=dJa1, dJa2=dJa2,
        eps=eps, rho=rho, vareps=vareps, grad_vareps=grid.gradient(vareps),
        A1=system.dot(mc.Ja1), A2=system.dot(mc.Ja2), E1=system.dot(dJa1), E2=system.dot(dJa2),
        X=mc.X, X_e=me.X, correct_covariant=(mc.X_xi, mc.X_eta),
    )


def _contract(M1, M2, f1, f2):
    """M1 f1 + M2 f2 with matrices (..., n, n) and scalar nodal fields."""
    return M1 * f1[..., None, None] + M2 * f2[..., None, None]


def spectral_norm(M: np.ndarray) -> np.ndarray:
    return np.linalg.norm(M, ord=2, axis=(-2, -1))


def reference_gradient(solution, domain, grid: TensorGrid, times) -> tuple[np.ndarray, np.ndarray]:
    """q_xi and q_eta of a plane wave through the correct map, shape (T, nx, ny)."""
    X = domain.position(grid.XI, grid.ETA)
    x_xi, x_eta = domain.covariant(grid.XI, grid.ETA)
    q_xi, q_eta = [], []
    for t in np.atleast_1d(times):
        g = solution.gradient(X, t)
        q_xi.append(np.sum(g * x_xi, axis=0))
        q_eta.append(np.sum(g * x_eta, axis=0))
    return np.stack(q_xi), np.stack(q_eta)


def _as_state(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q[..., None] if q.ndim == 3 else q


def _j_norm_max(field_t: np.ndarray, grid: TensorGrid, J: np.ndarray) -> float:
    """max over the leading time axis of the J-weighted norm of (T, nx, ny, n) data."""
    sq = np.einsum("txya,xy->t", field_t * field_t, grid.W * J)
    return float(np.sqrt(np.max(sq)))


@dataclass
class BoundCoefficients:
    c1: float
    c2: float
    c3: float
    c4: float
    alpha_estimate: float = float("nan")
    M1_norm: float = float("nan")
    M2_norm: float = float("nan")
    M3_norm: float = float("nan")
    R_bound_location_coeff: float = float("nan")
    R_bound_derivative_coeff: float = float("nan")
    R_bound_second_deriv_coeff: float = float("nan")

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def bound_coefficients(gef: GeometricErrorField, q_xi: np.ndarray, q_eta: np.ndarray,
                       eta_mean: float | None = None, B_max: float = 0.0, gamma: int = 0,
                       boundary_terms=None) -> BoundCoefficients:
    """Growth coefficients c1, c2 and source coefficients c3, c4.

    c1, c2 are half the max-over-nodes spectral norms of (E.grad vareps)/J and
    (A.grad vareps)/J. c3 = ||(1+vareps) E.grad q / J||_J and
    c4 = ||vareps A.grad q / J||_J, maximized over the supplied times. Dividing
    by J once is what the Cauchy-Schwarz step against the J-weighted error
    norm requires.
    """
    g = gef.grid
    J = gef.J
    gv = gef.grad_vareps
    EgradV = _contract(gef.E1, gef.E2, gv[0], gv[1])
    AgradV = _contract(gef.A1, gef.A2, gv[0], gv[1])
    c1 = 0.5 * float(np.max(spectral_norm(EgradV / J[..., None, None])))
    c2 = 0.5 * float(np.max(spectral_norm(AgradV / J[..., None, None])))
    qx, qe = _as_state(q_xi), _as_state(q_eta)
    Egq = np.einsum("xyab,txyb->txya", gef.E1, qx) + np.einsum("xyab,txyb->txya", gef.E2, qe)
    Agq = np.einsum("xyab,txyb->txya", gef.A1, qx) + np.einsum("xyab,txyb->txya", gef.A2, qe)
    c3 = _j_norm_max((1.0 + gef.vareps)[None, ..., None] * Egq / J[None, ..., None], g, J)
    c4 = _j_norm_max(gef.vareps[None, ..., None] * Agq / J[None, ..., None], g, J)
    out = BoundCoefficients(c1, c2, c3, c4)
    if eta_mean is not None:
        out.alpha_estimate = float(eta_mean - gamma * B_max - c1 - c2)
    if boundary_terms is not None:
        out.M1_norm, out.M2_norm, out.M3_norm = boundary_terms.M_norms
        out.R_bound_location_coeff = boundary_terms.location_coeff
        out.R_bound_derivative_coeff = boundary_terms.derivative_coeff
        out.R_bound_second_deriv_coeff = boundary_terms.second_derivative_coeff
    return out


# ---------------------------------------------------------- curved-boundary perturbation terms

def _zcross(u, v):
    return u[0] * v[1] - u[1] * v[0]


def _unit(v):
    mag = np.hypot(v[0], v[1])
    scale = max(float(np.max(mag, initial=0.0)), 1.0)
    safe = np.where(mag > UNIT_VECTOR_TOL * scale, mag, 1.0)
    return np.where(mag > UNIT_VECTOR_TOL * scale, v / safe, 0.0), mag


@dataclass
class CurvedBoundaryTerms:
    """Perturbation functionals for one curved boundary (the bottom curve)."""

    fields: dict
    M1: np.ndarray
    M2: np.ndarray
    M3: np.ndarray
    A_hat1: np.ndarray
    A_hat2: np.ndarray
    M_norms: tuple
    location_source: float
    derivative_source: float
    location_growth: float
    derivative_growth: float
    second_derivative_growth: float
    e_norm: float
    curve_max: tuple
    source_parts: dict

    @property
    def location_coeff(self) -> float:
        return self.location_growth * self.e_norm + self.location_source

    @property
    def derivative_coeff(self) -> float:
        return self.derivative_growth * self.e_norm + self.derivative_source

    @property
    def second_derivative_coeff(self) -> float:
        return self.second_derivative_growth * self.e_norm

    def first_order_A_grad_vareps(self) -> np.ndarray:
        """|dGamma| M1 + |dGamma'| M2 + |dGamma''| M3 with pointwise magnitudes."""
        f = self.fields
        return (f["mag0"][..., None, None] * self.M1 + f["mag1"][..., None, None] * self.M2
                + f["mag2"][..., None, None] * self.M3)

    def summary(self) -> dict:
        return {
            "location_coeff": self.location_coeff, "derivative_coeff": self.derivative_coeff,
            "second_derivative_coeff": self.second_derivative_coeff,
            "location_source": self.location_source, "derivative_source": self.derivative_source,
            "location_growth": self.location_growth, "derivative_growth": self.derivative_growth,
            "second_derivative_growth": self.second_derivative_growth,
            "M1_norm": self.M_norms[0], "M2_norm": self.M_norms[1], "M3_norm": self.M_norms[2],
            "dGamma_max": self.curve_max[0], "dGamma1_max": self.curve_max[1],
            "dGamma2_max": self.curve_max[2], "e_norm": self.e_norm, **self.source_parts,
        }


def appendix_b_functionals(correct, erroneous, grid: TensorGrid, system: SymmetricSystem,
                           q_xi: np.ndarray, q_eta: np.ndarray, e_norm: float = 0.0) -> CurvedBoundaryTerms:
    """Perturbation fields r, s, p, M matrices and R-bound coefficients of a curved boundary.

    Only the bottom curves of the two domains may differ. The brace
    coefficients are
        location:   1/2 ||M1/J|| ||e|| + ||A1_hat q_xi / J^2||_J + ||r1 (A.grad q) / J^3||_J
        derivative: 1/2 ||M2/J|| ||e|| + ||(1-eta) A2_hat q_eta / J^2||_J
                    + ||(1-eta) r2 (A.grad q) / J^3||_J
        second:     1/2 ||M3/J|| ||e||
    with ||.|| the max-over-nodes spectral norm, J-norms maximized over the
    sample times, and ||e|| supplied by the caller.
    """
    XI, ETA = grid.XI, grid.ETA
    cb, eb = correct.curves[0], erroneous.curves[0]
    d0 = eb(XI) - cb(XI)
    d1 = eb.deriv(XI) - cb.deriv(XI)
    d2 = eb.deriv2(XI) - cb.deriv2(XI)
    al, mag0 = _unit(d0)
    be, mag1 = _unit(d1)
    ga, mag2 = _unit(d2)
    x_xi, x_eta = correct.covariant(XI, ETA)
    x_xixi, x_xieta, x_etaeta = correct.second_derivatives(XI, ETA)
    ja1, ja2, J = contravariant(x_xi, x_eta)
    J_xi = _zcross(x_xixi, x_eta) + _zcross(x_xi, x_xieta)
    J_eta = _zcross(x_xieta, x_eta) + _zcross(x_xi, x_etaeta)
    f = {
        "r1": _zcross(al, x_xi), "r2": _zcross(be, x_eta), "r3": -_zcross(al, be),
        "s1": _zcross(al, x_xixi), "s2": _zcross(be, x_xi), "s3": _zcross(ga, x_eta),
        "s4": _zcross(be, x_xieta), "s5": _zcross(al, ga),
        "p1": _zcross(al, x_xieta), "p2": _zcross(be, x_eta), "p3": _zcross(be, x_etaeta),
        "p4": _zcross(be, al), "mag0": mag0, "mag1": mag1, "mag2": mag2,
        "J": J, "J_xi": J_xi, "J_eta": J_eta,
    }
    om = 1.0 - ETA
    A1, A2 = system.dot(ja1), system.dot(ja2)
    J2 = J * J
    c = lambda s: s[..., None, None]
    M1 = A1 * c((f["r1"] * J_xi - J * f["s1"]) / J2) + A2 * c((f["r1"] * J_eta - J * f["p1"]) / J2)
    M2 = (A1 * c((om * f["r2"] * J_xi - J * (f["s2"] + om * f["s4"])) / J2)
          + A2 * c((om * f["r2"] * J_eta + J * (f["p2"] - om * f["p3"])) / J2))
    M3 = -A1 * c(om * f["s3"] / J)
    A_hat1 = al[0][..., None, None] * system.A[1] - al[1][..., None, None] * system.A[0]
    A_hat2 = be[0][..., None, None] * system.A[1] - be[1][..., None, None] * system.A[0]
    norms = tuple(float(np.max(spectral_norm(M / J[..., None, None]))) for M in (M1, M2, M3))

    qx, qe = _as_state(q_xi), _as_state(q_eta)
    Agq = np.einsum("xyab,txyb->txya", A1, qx) + np.einsum("xyab,txyb->txya", A2, qe)
    Jt = J[None, ..., None]
    loc_a = _j_norm_max(np.einsum("xyab,txyb->txya", A_hat1, qx) / Jt ** 2, grid, J)
    loc_r = _j_norm_max(f["r1"][None, ..., None] * Agq / Jt ** 3, grid, J)
    der_a = _j_norm_max(om[None, ..., None] * np.einsum("xyab,txyb->txya", A_hat2, qe) / Jt ** 2, grid, J)
    der_r = _j_norm_max((om * f["r2"])[None, ..., None] * Agq / Jt ** 3, grid, J)
    s = np.linspace(0.0, 1.0, 4096)
    cmax = tuple(float(np.max(np.hypot(*(getattr(eb, k)(s) - getattr(cb, k)(s)))))
                 for k in ("eval", "deriv", "deriv2"))
    return CurvedBoundaryTerms(
        fields=f, M1=M1, M2=M2, M3=M3, A_hat1=A_hat1, A_hat2=A_hat2, M_norms=norms,
        location_source=loc_a + loc_r, derivative_source=der_a + der_r,
        location_growth=0.5 * norms[0], derivative_growth=0.5 * norms[1],
        second_derivative_growth=0.5 * norms[2], e_norm=float(e_norm), curve_max=cmax,
        source_parts={"location_Ahat_term": loc_a, "location_r_term": loc_r,
                      "derivative_Ahat_term": der_a, "derivative_r_term": der_r},
    )


# ---------------------------------------------------------- energy budget

@dataclass
class EnergyBudget:
    t: np.ndarray
    energy: np.ndarray
    D: np.ndarray
    BG: np.ndarray
    BG_linear: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    V3: np.ndarray
    V4: np.ndarray
    rate: np.ndarray
    residual: np.ndarray
    eta: np.ndarray
    gamma: int
    rate_semidiscrete: np.ndarray = None
    residual_semidiscrete: np.ndarray = None

    def max_term(self) -> np.ndarray:
        return np.max(np.abs(np.stack([self.D, self.BG, self.V1, self.V2, self.V3, self.V4])), axis=0)

    def relative_residual(self, t_min: float = 0.5, t_max: float = 1.5,
                          semidiscrete: bool = False) -> float:
        """max |residual| / max budget term over [t_min, t_max].

        The default residual uses the finite-difference energy rate; with
        semidiscrete=True it uses the exact rate of the DG ODE instead, which
        isolates the spatial part of the residual.
        """
        res = self.residual_semidiscrete if semidiscrete else self.residual
        m = (self.t >= t_min) & (self.t <= t_max) & np.isfinite(res)
        if not np.any(m):
            return float("nan")
        return float(np.max(np.abs(res[m])) / np.max(self.max_term()[m]))

    def rows(self):
        for k in range(self.t.size):
            yield [self.t[k], self.energy[k], self.D[k], self.BG[k], self.V1[k], self.V2[k],
                   self.V3[k], self.V4[k], self.residual[k], self.eta[k]]

    def to_csv(self, path) -> Path:
        path = Path(path)
        try:
            with path.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(BUDGET_COLUMNS)
                for row in self.rows():
                    w.writerow([repr(float(x)) for x in row])
        except OSError as exc:
            raise OSError(f"could not write budget CSV {path}: {exc}") from exc
        return path

    def eta_mean(self, t_min: float = ETA_TRANSIENT) -> float:
        m = (self.t > t_min) & np.isfinite(self.eta)
        return float(np.mean(self.eta[m])) if np.any(m) else float("nan")

    def B_max(self) -> float:
        m = self.energy > ENERGY_FLOOR
        if not np.any(m):
            return 0.0
        return float(np.max(self.BG[m] / self.energy[m]))


def energy_budget(result, gef: GeometricErrorField | None = None, system: SymmetricSystem | None = None,
                  gamma: int | None = None) -> EnergyBudget:
    """Terms of 1/2 d/dt ||e||_J^2 + D = gamma BG + V1 + V2 + V3 + V4 along a run.

    D and BG use the exact erroneous normal speed B = Ja_e . a n on each face
    with rho = J/J_e; BG uses the exact data difference g(X_e) - g(X) and BG_linear
    its mean-value form grad g . dX. Volume terms use the recorded nodal error
    and the analytic solution gradient.
    """
    cfg = result.config
    grid = result.grid
    gamma = cfg.gamma if gamma is None else gamma
    system = SymmetricSystem.from_advection(cfg.advection) if system is None else system
    if gef is None:
        gef = geometric_error(cfg.correct_domain, cfg.domain, grid, system)
    sol = cfg.solution
    op = result.operator
    e = result.errors()
    times = result.times
    J = gef.J
    energy = np.einsum("kij,ij->k", e * e, grid.W * J)

    cf = face_geometry(cfg.correct_domain, grid)
    D = np.zeros(times.size)
    BG = np.zeros(times.size)
    BGl = np.zeros(times.size)
    for name in FACE_ORDER:
        fe, fc = op.faces[name], cf[name]
        B = op.Bn[name]
        rho = fc.J / fe.J
        w = fe.weights
        bp, bm = np.maximum(B, 0.0), np.abs(np.minimum(B, 0.0))
        dXf = fe.position - fc.position
        for k, t in enumerate(times):
            tr = _trace(grid, e[k], name)
            D[k] += 0.5 * np.sum(w * rho * bp * tr * tr)
            if np.any(bm > 0):
                eg = sol(fe.position, t) - sol(fc.position, t)
                BG[k] += 0.5 * np.sum(w * rho * bm * eg * eg)
                gl = np.sum(sol.gradient(fc.position, t) * dXf, axis=0)
                BGl[k] += 0.5 * np.sum(w * rho * bm * gl * gl)

    q_xi, q_eta = reference_gradient(sol, cfg.correct_domain, grid, times)
    gv = gef.grad_vareps
    EgV = (gef.E1[..., 0, 0] * gv[0] + gef.E2[..., 0, 0] * gv[1])
    AgV = (gef.A1[..., 0, 0] * gv[0] + gef.A2[..., 0, 0] * gv[1])
    Egq = gef.E1[None, ..., 0, 0] * q_xi + gef.E2[None, ..., 0, 0] * q_eta
    Agq = gef.A1[None, ..., 0, 0] * q_xi + gef.A2[None, ..., 0, 0] * q_eta
    W = grid.W
    V1 = 0.5 * np.einsum("kij,ij->k", e * e, W * EgV)
    V2 = 0.5 * np.einsum("kij,ij->k", e * e, W * AgV)
    V3 = -np.einsum("kij,kij,ij->k", (1.0 + gef.vareps)[None] * Egq, e, W)
    V4 = -np.einsum("kij,kij,ij->k", gef.vareps[None] * Agq, e, W)

    rate = centered_derivative(energy, times)
    rhs_terms = D - gamma * BG - V1 - V2 - V3 - V4
    residual = 0.5 * rate + rhs_terms
    # exact d/dt ||e||_J^2 = 2 <J e, v_t - q_t> from the semi-discrete operator
    pos = _boundary_positions(cfg, op)
    sd = np.empty(times.size)
    for k, t in enumerate(times):
        vt = op.apply(result.states[k], sol(pos, t))
        qt = sol.time_derivative(result.correct_positions, t)
        sd[k] = 2.0 * np.sum(grid.W * J * e[k] * (vt - qt))
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = np.where(energy > 0, D / energy, np.nan)
    return EnergyBudget(times, energy, D, BG, BGl, V1, V2, V3, V4, rate, residual, eta, gamma,
                        sd, 0.5 * sd + rhs_terms)


def _trace(grid: TensorGrid, f: np.ndarray, name: str) -> np.ndarray:
    if name == "left":
        return grid.l0_xi @ f
    if name == "right":
        return grid.l1_xi @ f
    if name == "bottom":
        return f @ grid.l0_eta
    return f @ grid.l1_eta


# ---------------------------------------------------------- long-term bound

@dataclass
class LongTermBound:
    alpha: float
    applicable: bool
    asymptote: float
    source: float
    times: np.ndarray
    envelope: np.ndarray
    message: str = ""


def long_term_bound(c1: float, c2: float, c3: float, c4: float, eta_mean: float,
                    B_max: float = 0.0, gamma: int = 0, e0: float = 0.0, times=None) -> LongTermBound:
    """Integrating-factor envelope e^{-alpha t}||e0|| + (c3+c4)(1 - e^{-alpha t})/alpha.

    alpha = eta_mean - gamma B_max - c1 - c2. When alpha <= 0 the bound is
    reported as not applicable and the envelope is filled with inf.
    """
    alpha = float(eta_mean - gamma * B_max - c1 - c2)
    src = float(c3 + c4)
    t = np.zeros(1) if times is None else np.asarray(times, dtype=float)
    if not np.isfinite(alpha) or alpha <= 0.0:
        return LongTermBound(alpha, False, float("inf"), src, t, np.full(t.shape, np.inf),
                             "bound not applicable: insufficient outflow dissipation (alpha <= 0)")
    decay = np.exp(-alpha * t)
    env = decay * e0 + src * (1.0 - decay) / alpha
    return LongTermBound(alpha, True, src / alpha, src, t, env)


def long_term_bound_1d(delta: float, c0: float, rho: float | None = None, e0: float = 0.0,
                       times=None) -> LongTermBound:
    """The 1D form e^{-rho c0 t}||e0|| + 4 pi |delta| (1 - e^{-rho c0 t})/c0."""
    rho = 1.0 / (1.0 - delta) if rho is None else rho
    t = np.zeros(1) if times is None else np.asarray(times, dtype=float)
    if c0 <= 0:
        return LongTermBound(rho * c0, False, float("inf"), 4 * math.pi * abs(delta), t,
                             np.full(t.shape, np.inf), "bound not applicable: c0 <= 0")
    decay = np.exp(-rho * c0 * t)
    src = 4.0 * math.pi * abs(delta)
    return LongTermBound(rho * c0, True, src / c0, src, t, decay * e0 + src * (1.0 - decay) / c0)
