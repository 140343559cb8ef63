"""Legendre-Gauss quadrature, spectral differentiation and barycentric
interpolation on the reference interval [0, 1].

The classical rule is computed on [-1, 1] by Newton iteration and shifted
once, so every other module works directly in [0, 1] coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_NEWTON_TOL = 4.0 * np.finfo(float).eps
_NEWTON_MAXIT = 100


def legendre_and_derivative(n: int, x):
    """Evaluate the Legendre polynomial L_n and L_n' at x in [-1, 1].

    Uses the three-term recurrence. Works on scalars or arrays.
    """
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.ones_like(x), np.zeros_like(x)
    if n == 1:
        return x.copy(), np.ones_like(x)
    l_prev2, l_prev1 = np.ones_like(x), x.copy()
    dl_prev2, dl_prev1 = np.zeros_like(x), np.ones_like(x)
    for k in range(2, n + 1):
        l_k = ((2 * k - 1) * x * l_prev1 - (k - 1) * l_prev2) / k
        dl_k = dl_prev2 + (2 * k - 1) * l_prev1
        l_prev2, l_prev1 = l_prev1, l_k
        dl_prev2, dl_prev1 = dl_prev1, dl_k
    return l_prev1, dl_prev1


def _gauss_symmetric(n_order: int):
    """Legendre-Gauss nodes/weights on [-1, 1] for polynomial order N."""
    npts = n_order + 1
    if n_order == 0:
        return np.array([0.0]), np.array([2.0])
    nodes = np.zeros(npts)
    weights = np.zeros(npts)
    for j in range((npts + 1) // 2):
        # Chebyshev-Gauss estimate of the j-th root of L_{N+1}
        x = -np.cos((2 * j + 1) * np.pi / (2 * n_order + 2))
        for _ in range(_NEWTON_MAXIT):
            lval, dval = legendre_and_derivative(npts, x)
            step = -lval / dval
            x = x + step
            if abs(step) <= _NEWTON_TOL * max(abs(x), 1.0):
                break
        _, dval = legendre_and_derivative(npts, x)
        nodes[j] = x
        nodes[n_order - j] = -x
        weights[j] = weights[n_order - j] = 2.0 / ((1.0 - x * x) * dval * dval)
    if n_order % 2 == 0:
        _, dval = legendre_and_derivative(npts, 0.0)
        nodes[n_order // 2] = 0.0
        weights[n_order // 2] = 2.0 / (dval * dval)
    return nodes, weights


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    """Barycentric weights 1/prod_{k!=j}(x_j - x_k), scaled to max |w| = 1."""
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / np.prod(diff, axis=1)
    return w / np.max(np.abs(w))


@dataclass(frozen=True)
class QuadratureRule:
    """Legendre-Gauss rule of polynomial order N on [0, 1]."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray
    barycentric_weights: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.order + 1

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def gauss_legendre(N: int) -> QuadratureRule:
    """Legendre-Gauss nodes and weights mapped affinely onto [0, 1].

    Exact for polynomials of degree <= 2N + 1.
    """
    if int(N) != N or N < 0:
        raise ValueError(f"polynomial order must be a non-negative integer, got {N!r}")
    N = int(N)
    x, w = _gauss_symmetric(N)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    for arr in (nodes, weights):
        arr.setflags(write=False)
    bary = barycentric_weights(nodes)
    bary.setflags(write=False)
    return QuadratureRule(N, nodes, weights, bary)


def derivative_matrix(rule: QuadratureRule) -> np.ndarray:
    """Spectral derivative matrix at the quadrature nodes.

    Off-diagonal entries come from the barycentric formula; the diagonal is
    the negative row sum so that constants are differentiated to exactly 0.
    """
    x = rule.nodes
    lam = rule.barycentric_weights
    n = x.size
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                D[i, j] = (lam[j] / lam[i]) / (x[i] - x[j])
        D[i, i] = -np.sum(D[i, :])
    return D


def lagrange_row(rule: QuadratureRule, x: float) -> np.ndarray:
    """Values of every Lagrange basis polynomial at the point x."""
    nodes = rule.nodes
    lam = rule.barycentric_weights
    hit = np.nonzero(nodes == x)[0]
    row = np.zeros(nodes.size)
    if hit.size:
        row[hit[0]] = 1.0
        return row
    t = lam / (x - nodes)
    return t / np.sum(t)


def interpolate(values, rule: QuadratureRule, x: float):
    """Barycentric Lagrange interpolation of nodal values at x.

    `values` may carry trailing axes; interpolation acts on the first one.
    A point that coincides with a node returns the stored value unchanged.
    """
    values = np.asarray(values, dtype=float)
    hit = np.nonzero(rule.nodes == x)[0]
    if hit.size:
        return values[hit[0]]
    return np.tensordot(lagrange_row(rule, x), values, axes=(0, 0))


def weighted_norm_sq(field, J, rule: QuadratureRule, rule_eta: QuadratureRule | None = None) -> float:
    """Quadrature value of <J f, f> over [0,1] or [0,1]^2."""
    field = np.asarray(field, dtype=float)
    J = np.broadcast_to(np.asarray(J, dtype=float), field.shape)
    if np.any(J <= 0.0):
        raise ValueError("Jacobian must be positive at every node")
    if field.ndim == 1:
        w = rule.weights
    elif field.ndim == 2:
        w = np.outer(rule.weights, (rule_eta or rule).weights)
    else:
        raise ValueError("field must be nodal values on a 1D or 2D tensor grid")
    return float(np.sum(w * J * field * field))


class TensorGrid:
    """Tensor-product Gauss grid on [0,1]^2 with separate orders per direction.

    An order of 0 in eta gives a single node at eta = 1/2 with unit weight,
    which is how one-dimensional problems are carried on the 2D machinery.
    """

    def __init__(self, order_xi: int, order_eta: int | None = None):
        self.rule_xi = gauss_legendre(order_xi)
        self.rule_eta = gauss_legendre(order_xi if order_eta is None else order_eta)
        self.xi = self.rule_xi.nodes
        self.eta = self.rule_eta.nodes
        self.XI, self.ETA = np.meshgrid(self.xi, self.eta, indexing="ij")
        self.W = np.outer(self.rule_xi.weights, self.rule_eta.weights)
        self.D_xi = derivative_matrix(self.rule_xi)
        self.D_eta = derivative_matrix(self.rule_eta)
        self.l0_xi = lagrange_row(self.rule_xi, 0.0)
        self.l1_xi = lagrange_row(self.rule_xi, 1.0)
        self.l0_eta = lagrange_row(self.rule_eta, 0.0)
        self.l1_eta = lagrange_row(self.rule_eta, 1.0)

    @property
    def shape(self) -> tuple[int, int]:
        return self.XI.shape

    @property
    def is_1d(self) -> bool:
        return self.rule_eta.order == 0

    def gradient(self, f: np.ndarray) -> np.ndarray:
        """Spectral (d/dxi, d/deta) of a nodal field; trailing axes allowed."""
        d_xi = np.tensordot(self.D_xi, f, axes=(1, 0))
        d_eta = np.moveaxis(np.tensordot(self.D_eta, f, axes=(1, 1)), 0, 1)
        return np.stack([d_xi, d_eta])

    def divergence(self, fx: np.ndarray, fy: np.ndarray) -> np.ndarray:
        return self.gradient(fx)[0] + self.gradient(fy)[1]

    def norm_sq(self, f: np.ndarray, J) -> float:
        """<J f, f> by quadrature; trailing state axes are summed."""
        f = np.asarray(f, dtype=float)
        J = np.asarray(J, dtype=float)
        sq = f * f
        while sq.ndim > 2:
            sq = sq.sum(axis=-1)
        return float(np.sum(self.W * J * sq))

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """Unweighted L2 inner product <f, g> by quadrature."""
        prod = np.asarray(f) * np.asarray(g)
        while prod.ndim > 2:
            prod = prod.sum(axis=-1)
        return float(np.sum(self.W * prod))

    def faces(self):
        """(name, parameter nodes, fixed coordinate, weights, outward sign) per face."""
        return (
            ("left", self.eta, ("xi", 0.0), self.rule_eta.weights, -1.0),
            ("right", self.eta, ("xi", 1.0), self.rule_eta.weights, 1.0),
            ("bottom", self.xi, ("eta", 0.0), self.rule_xi.weights, -1.0),
            ("top", self.xi, ("eta", 1.0), self.rule_xi.weights, 1.0),
        )

    def trace(self, f: np.ndarray, face: str) -> np.ndarray:
        """Interpolate a nodal field to one of the four faces."""
        if face == "left":
            return np.tensordot(self.l0_xi, f, axes=(0, 0))
        if face == "right":
            return np.tensordot(self.l1_xi, f, axes=(0, 0))
        if face == "bottom":
            return np.tensordot(self.l0_eta, f, axes=(0, 1))
        if face == "top":
            return np.tensordot(self.l1_eta, f, axes=(0, 1))
        raise KeyError(face)
