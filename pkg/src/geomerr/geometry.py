"""Boundary curves, transfinite maps and metric terms for correct and
erroneous domains.

All maps go from the reference square [0,1]^2 to the plane. Curves are
oriented so that the bottom and top run in +xi and the left and right run
in +eta. Every curve carries closed-form first and second derivatives so
that metric terms are exact and geometry error is isolated from
discretization error.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .basis import TensorGrid, gauss_legendre

CORNER_TOL = 1e-9
JACOBIAN_MIN = 1e-10
DEFAULT_CURVE_SAMPLES = 4096


class InvalidDomainError(ValueError):
    """Raised when a mapping has a non-positive Jacobian or broken corners."""


def _vec(x, y, like):
    like = np.asarray(like, dtype=float)
    return np.stack(np.broadcast_arrays(np.asarray(x, dtype=float) + 0.0 * like,
                                        np.asarray(y, dtype=float) + 0.0 * like))


@dataclass(frozen=True)
class BoundaryCurve:
    """Parametric curve s -> (x, y) on s in [0, 1] with analytic derivatives.

    Each callable maps an array of parameters to an array of shape (2, ...).
    """

    eval: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    deriv2: Callable[[np.ndarray], np.ndarray]
    name: str = ""

    def __call__(self, s):
        return self.eval(np.asarray(s, dtype=float))


def line(p0, p1, name: str = "line") -> BoundaryCurve:
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    d = p1 - p0

    def ev(s):
        s = np.asarray(s, dtype=float)
        return p0.reshape((2,) + (1,) * s.ndim) * (1.0 - s) + p1.reshape((2,) + (1,) * s.ndim) * s

    return BoundaryCurve(ev, lambda s: _vec(d[0], d[1], s), lambda s: _vec(0.0, 0.0, s), name)


def polynomial_curve(cx, cy, name: str = "polynomial") -> BoundaryCurve:
    """Curve with polynomial components given by power-series coefficients."""
    px = np.polynomial.Polynomial(cx)
    py = np.polynomial.Polynomial(cy)
    dpx, dpy = px.deriv(), py.deriv()
    ddpx, ddpy = dpx.deriv(), dpy.deriv()
    return BoundaryCurve(
        lambda s: _vec(px(s), py(s), s),
        lambda s: _vec(dpx(s), dpy(s), s),
        lambda s: _vec(ddpx(s), ddpy(s), s),
        name,
    )


def lagrange_curve(curve: BoundaryCurve, nodes, name: str | None = None) -> BoundaryCurve:
    """Polynomial interpolant of `curve` through the parameter values `nodes`.

    Values use the product form of the Lagrange basis so the interpolant
    returns the sampled points exactly at the nodes.
    """
    nodes = np.asarray(nodes, dtype=float)
    pts = curve(nodes)
    n = nodes.size
    basis = []
    for k in range(n):
        others = np.delete(nodes, k)
        scale = np.prod(nodes[k] - others)
        basis.append(np.polynomial.Polynomial.fromroots(others) / scale)
    d1 = [b.deriv() for b in basis]
    d2 = [b.deriv(2) for b in basis]

    def ev(s):
        s = np.asarray(s, dtype=float)
        out = 0.0
        for k in range(n):
            lk = np.ones_like(s)
            for j in range(n):
                if j != k:
                    lk = lk * (s - nodes[j]) / (nodes[k] - nodes[j])
            out = out + pts[:, k].reshape((2,) + (1,) * s.ndim) * lk
        return out

    def combine(polys):
        def f(s):
            s = np.asarray(s, dtype=float)
            return sum(pts[:, k].reshape((2,) + (1,) * s.ndim) * polys[k](s) for k in range(n))
        return f

    return BoundaryCurve(ev, combine(d1), combine(d2), name or f"{curve.name}_interp{n - 1}")


def arc_length_circle() -> BoundaryCurve:
    """Unit quarter circle from (0, 1) to (1, 0) at constant speed pi/2."""
    h = 0.5 * np.pi

    def ev(s):
        th = h * (1.0 - np.asarray(s, dtype=float))
        return np.stack([np.cos(th), np.sin(th)])

    def d1(s):
        th = h * (1.0 - np.asarray(s, dtype=float))
        return h * np.stack([np.sin(th), -np.cos(th)])

    def d2(s):
        th = h * (1.0 - np.asarray(s, dtype=float))
        return h * h * np.stack([-np.cos(th), -np.sin(th)])

    return BoundaryCurve(ev, d1, d2, "arc_length")


def x_param_circle() -> BoundaryCurve:
    """Unit quarter circle from (0, 1) to (1, 0) parametrized by x.

    The derivative is unbounded at s = 1, where the circle has a vertical
    tangent; only use this curve exactly at s < 1 or as interpolation data.
    """

    def ev(s):
        s = np.asarray(s, dtype=float)
        return np.stack([s, np.sqrt(np.clip(1.0 - s * s, 0.0, None))])

    def d1(s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return np.stack([np.ones_like(s), -s / np.sqrt(1.0 - s * s)])

    def d2(s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return np.stack([np.zeros_like(s), -1.0 / (1.0 - s * s) ** 1.5])

    return BoundaryCurve(ev, d1, d2, "x_param")


class MappedDomain:
    """Transfinite (Gordon-Hall) map of four boundary curves.

    Curve order is bottom, right, top, left. Positions, Jacobian columns and
    second derivatives are evaluated in closed form from the curves.
    """

    synthetic = False

    def __init__(self, curves, name: str = ""):
        if len(curves) != 4:
            raise ValueError("a mapped domain needs exactly four curves")
        self.curves = tuple(curves)
        self.name = name
        b, r, t, l = self.curves
        corners = {
            "p00": (b(0.0), l(0.0)),
            "p10": (b(1.0), r(0.0)),
            "p01": (t(0.0), l(1.0)),
            "p11": (t(1.0), r(1.0)),
        }
        for key, (pa, pb) in corners.items():
            gap = float(np.linalg.norm(np.asarray(pa) - np.asarray(pb)))
            if gap > CORNER_TOL:
                raise InvalidDomainError(f"corner {key} mismatch of {gap:.3e}")
        self.p00 = np.asarray(b(0.0), dtype=float)
        self.p10 = np.asarray(b(1.0), dtype=float)
        self.p01 = np.asarray(t(0.0), dtype=float)
        self.p11 = np.asarray(t(1.0), dtype=float)

    @staticmethod
    def _c(p, like):
        return p.reshape((2,) + (1,) * np.ndim(like))

    def position(self, xi, eta) -> np.ndarray:
        xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
        b, r, t, l = self.curves
        c = lambda p: self._c(p, xi)
        return ((1 - eta) * b(xi) + eta * t(xi) + (1 - xi) * l(eta) + xi * r(eta)
                - ((1 - xi) * (1 - eta) * c(self.p00) + xi * (1 - eta) * c(self.p10)
                   + (1 - xi) * eta * c(self.p01) + xi * eta * c(self.p11)))

    def covariant(self, xi, eta):
        """Return (X_xi, X_eta), each of shape (2, ...)."""
        xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
        b, r, t, l = self.curves
        c = lambda p: self._c(p, xi)
        x_xi = ((1 - eta) * b.deriv(xi) + eta * t.deriv(xi) - l(eta) + r(eta)
                - (-(1 - eta) * c(self.p00) + (1 - eta) * c(self.p10)
                   - eta * c(self.p01) + eta * c(self.p11)))
        x_eta = (-b(xi) + t(xi) + (1 - xi) * l.deriv(eta) + xi * r.deriv(eta)
                 - (-(1 - xi) * c(self.p00) - xi * c(self.p10)
                    + (1 - xi) * c(self.p01) + xi * c(self.p11)))
        return x_xi, x_eta

    def second_derivatives(self, xi, eta):
        """Return (X_xixi, X_xieta, X_etaeta)."""
        xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
        b, r, t, l = self.curves
        c = lambda p: self._c(p, xi)
        x_xixi = (1 - eta) * b.deriv2(xi) + eta * t.deriv2(xi)
        x_etaeta = (1 - xi) * l.deriv2(eta) + xi * r.deriv2(eta)
        x_xieta = (-b.deriv(xi) + t.deriv(xi) - l.deriv(eta) + r.deriv(eta)
                   - (c(self.p00) - c(self.p10) - c(self.p01) + c(self.p11)))
        return x_xixi, x_xieta, x_etaeta

    def jacobian(self, xi, eta) -> np.ndarray:
        x_xi, x_eta = self.covariant(xi, eta)
        return x_xi[0] * x_eta[1] - x_xi[1] * x_eta[0]

    def check_valid(self, order: int = 24) -> None:
        rule = gauss_legendre(order)
        XI, ETA = np.meshgrid(rule.nodes, rule.nodes, indexing="ij")
        _require_positive(self.jacobian(XI, ETA), XI, ETA, self.name)


class MixedDomain:
    """Synthetic domain taking positions from one map and derivatives from another.

    Positions drive initial and boundary data; derivatives drive metric terms
    and the Jacobian. The pair is generally not integrable, so the metric
    identities do not have to hold for the combination.
    """

    synthetic = True

    def __init__(self, location: MappedDomain, derivative: MappedDomain, name: str = "mixed"):
        self.location = location
        self.derivative = derivative
        self.curves = location.curves
        self.name = name

    def position(self, xi, eta):
        return self.location.position(xi, eta)

    def covariant(self, xi, eta):
        return self.derivative.covariant(xi, eta)

    def second_derivatives(self, xi, eta):
        return self.derivative.second_derivatives(xi, eta)

    def jacobian(self, xi, eta):
        return self.derivative.jacobian(xi, eta)

    def check_valid(self, order: int = 24) -> None:
        self.derivative.check_valid(order)


def _require_positive(J, XI, ETA, name=""):
    bad = np.asarray(J) <= JACOBIAN_MIN
    if np.any(bad):
        idx = np.unravel_index(np.argmin(J), np.shape(J))
        raise InvalidDomainError(
            f"domain {name!r} is invalid: J = {float(np.asarray(J)[idx]):.3e} at "
            f"(xi, eta) = ({float(np.asarray(XI)[idx]):.6f}, {float(np.asarray(ETA)[idx]):.6f})"
        )


def transfinite_map(curves, name: str = "") -> MappedDomain:
    return MappedDomain(curves, name)


def blend_domain(bottom: BoundaryCurve, top: BoundaryCurve, name: str = "") -> MappedDomain:
    """Domain with curved bottom and top joined by straight sides.

    The transfinite map then reduces to X = (1 - eta) bottom + eta top.
    """
    right = line(bottom(1.0), top(1.0), "right")
    left = line(bottom(0.0), top(0.0), "left")
    return MappedDomain((bottom, right, top, left), name)


@dataclass
class MetricField:
    """Nodal metric terms on a tensor grid.

    Ja1 and Ja2 have shape (2, nx, ny); J has shape (nx, ny).
    """

    Ja1: np.ndarray
    Ja2: np.ndarray
    J: np.ndarray
    X: np.ndarray
    X_xi: np.ndarray
    X_eta: np.ndarray


def contravariant(x_xi, x_eta):
    """Volume weighted contravariant vectors and Jacobian from (X_xi, X_eta)."""
    ja1 = np.stack([x_eta[1], -x_eta[0]])
    ja2 = np.stack([-x_xi[1], x_xi[0]])
    J = x_xi[0] * x_eta[1] - x_xi[1] * x_eta[0]
    return ja1, ja2, J


def metric_terms(dom, grid: TensorGrid) -> MetricField:
    """Exact nodal metric terms Ja1 = X_eta x z, Ja2 = z x X_xi, J = z.(X_xi x X_eta)."""
    x_xi, x_eta = dom.covariant(grid.XI, grid.ETA)
    ja1, ja2, J = contravariant(x_xi, x_eta)
    _require_positive(J, grid.XI, grid.ETA, getattr(dom, "name", ""))
    return MetricField(ja1, ja2, J, dom.position(grid.XI, grid.ETA), x_xi, x_eta)


@dataclass
class FaceGeometry:
    """Geometry sampled at the face quadrature points of one reference face."""

    name: str
    sign: float
    weights: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    position: np.ndarray
    Ja_normal: np.ndarray  # contravariant vector of the face-normal direction, (2, n)
    J: np.ndarray


def face_geometry(dom, grid: TensorGrid) -> dict[str, FaceGeometry]:
    out = {}
    for name, s, (axis, value), weights, sign in grid.faces():
        if axis == "xi":
            xi, eta = np.full_like(s, value), s
        else:
            xi, eta = s, np.full_like(s, value)
        x_xi, x_eta = dom.covariant(xi, eta)
        ja1, ja2, J = contravariant(x_xi, x_eta)
        out[name] = FaceGeometry(name, sign, weights, xi, eta, dom.position(xi, eta),
                                 ja1 if axis == "xi" else ja2, J)
    return out


UNIT_SQUARE_TOP = line((0.0, 1.0), (1.0, 1.0), "top")

FAMILIES = ("omega", "omega1", "omega2", "omega3", "omega4")


def normalize_family(family: str) -> str:
    key = str(family).strip().lower().replace("ω", "omega").replace("_", "").replace("(", "").replace(")", "")
    if key in ("", "0", "omega0", "correct"):
        key = "omega"
    if key in ("1", "2", "3", "4"):
        key = "omega" + key
    if key.startswith("omegae"):
        key = "omega" + key[len("omegae"):]
    if key not in FAMILIES:
        raise ValueError(f"unknown domain family {family!r}; expected one of {FAMILIES}")
    return key


def bottom_curve(family: str, delta: float) -> BoundaryCurve:
    """Bottom boundary of the unit square or one of its four perturbations."""
    fam = normalize_family(family)
    d = float(delta)
    if fam == "omega":
        return polynomial_curve([0.0, 1.0], [0.0], "bottom")
    if fam == "omega1":
        return polynomial_curve([0.0, 1.0], [0.0, -d], "bottom_e1")
    if fam == "omega2":
        return polynomial_curve([0.0, 1.0], [0.5 * d, -d], "bottom_e2")
    if fam == "omega3":
        return polynomial_curve([0.0, 1.0], [0.0, -4.0 * d, 4.0 * d], "bottom_e3")
    return polynomial_curve([0.0, 1.0], [0.5 * d, -4.0 * d, 4.0 * d], "bottom_e4")


def family_domain(family: str, delta: float = 0.0) -> MappedDomain:
    """Unit square (family "omega") or a perturbed-bottom erroneous domain."""
    fam = normalize_family(family)
    if abs(delta) >= 0.5:
        raise InvalidDomainError(f"|delta| must be below 0.5, got {delta}")
    dom = blend_domain(bottom_curve(fam, delta), UNIT_SQUARE_TOP, name=f"{fam}(delta={delta:g})")
    dom.check_valid()
    return dom


def interval_domain(x_left: float, x_right: float = 1.0) -> MappedDomain:
    """Strip [x_left, x_right] x [0, 1]; the 1D problems run on it with no eta flux."""
    if x_right <= x_left:
        raise InvalidDomainError("interval must have positive length")
    return MappedDomain((
        line((x_left, 0.0), (x_right, 0.0), "bottom"),
        line((x_right, 0.0), (x_right, 1.0), "right"),
        line((x_left, 1.0), (x_right, 1.0), "top"),
        line((x_left, 0.0), (x_left, 1.0), "left"),
    ), name=f"interval[{x_left:g},{x_right:g}]")


CIRCLE_NODES = (0.0, 0.5, 1.0)
CIRCLE_TOP_HEIGHT = 3.0
CIRCLE_TOP_WIDTH = 1.5


def circle_curve(parametrization: str = "arc_length", approx: str = "exact") -> BoundaryCurve:
    """Quarter circle boundary, exact or as its quadratic interpolant at {0, 1/2, 1}."""
    if parametrization not in ("x_param", "arc_length"):
        raise ValueError(f"unknown parametrization {parametrization!r}")
    if approx not in ("exact", "quadratic_interp"):
        raise ValueError(f"unknown approximation mode {approx!r}")
    exact = x_param_circle() if parametrization == "x_param" else arc_length_circle()
    if approx == "exact":
        return exact
    return lagrange_curve(exact, CIRCLE_NODES, f"{parametrization}_quadratic")


def circle_domain(parametrization: str = "arc_length", approx: str = "exact",
                  top_height: float = CIRCLE_TOP_HEIGHT,
                  top_width: float = CIRCLE_TOP_WIDTH) -> MappedDomain:
    """Quadrilateral above the unit quarter circle.

    The arc from (0, 1) to (1, 0) is the bottom boundary. The other three
    sides are straight: left from (0, 1) to (0, H), top from (0, H) to (W, H)
    and right from (1, 0) to (W, H). W > 1 keeps the right side from being
    tangent to the arc at (1, 0), where the map would be singular. The exact
    x-parametrized arc has an unbounded derivative at (1, 0), so an exact
    circle domain always uses the arc-length form.
    """
    if top_width <= 1.0 or top_height <= 1.0:
        raise InvalidDomainError("circle domain needs top_width > 1 and top_height > 1")
    arc = arc_length_circle() if approx == "exact" else circle_curve(parametrization, approx)
    corner = (float(top_width), float(top_height))
    dom = MappedDomain((
        arc,
        line((1.0, 0.0), corner, "right"),
        line((0.0, top_height), corner, "top"),
        line((0.0, 1.0), (0.0, top_height), "left"),
    ), name=f"circle[{parametrization},{approx}]")
    dom.check_valid()
    return dom


@dataclass
class CurveErrors:
    max_location: float
    max_derivative: float
    max_second_derivative: float
    s: np.ndarray = field(repr=False)
    location: np.ndarray = field(repr=False)
    derivative: np.ndarray = field(repr=False)
    second_derivative: np.ndarray = field(repr=False)

    def as_tuple(self):
        return (self.max_location, self.max_derivative, self.max_second_derivative)


def delta_gamma(correct: BoundaryCurve, erroneous: BoundaryCurve,
                n_samples: int = DEFAULT_CURVE_SAMPLES) -> CurveErrors:
    """Max magnitudes of the location, tangent and curvature-vector errors.

    Maxima are taken over a uniform sample of n_samples points in [0, 1];
    non-finite samples (a singular exact derivative) are ignored.
    """
    if n_samples < 64:
        raise ValueError("n_samples must be at least 64")
    s = np.linspace(0.0, 1.0, n_samples)
    with np.errstate(invalid="ignore"):
        d0 = erroneous(s) - correct(s)
        d1 = erroneous.deriv(s) - correct.deriv(s)
        d2 = erroneous.deriv2(s) - correct.deriv2(s)

    def mx(d):
        mag = np.hypot(d[0], d[1])
        mag = mag[np.isfinite(mag)]
        return float(mag.max()) if mag.size else float("nan")

    return CurveErrors(mx(d0), mx(d1), mx(d2), s, d0, d1, d2)


def mixed_domain(correct, erroneous, use_location_from: str = "erroneous",
                 use_derivative_from: str = "erroneous"):
    """Combine positions and derivatives from the correct/erroneous pair."""
    pick = {"correct": correct, "erroneous": erroneous}
    try:
        loc = pick[use_location_from]
        der = pick[use_derivative_from]
    except KeyError as exc:
        raise ValueError(f"source must be 'correct' or 'erroneous', got {exc.args[0]!r}") from None
    if loc is der:
        return loc
    mixed = MixedDomain(loc, der, name=f"mixed[loc={use_location_from},der={use_derivative_from}]")
    mixed.check_valid()
    return mixed


ISOLATE_SOURCES = {
    "both": ("erroneous", "erroneous"),
    "location": ("erroneous", "correct"),
    "location_only": ("erroneous", "correct"),
    "derivative": ("correct", "erroneous"),
    "derivative_only": ("correct", "erroneous"),
}


@dataclass
class DomainSpec:
    """JSON-serializable description of a domain."""

    family: str = "omega"
    delta: float = 0.0
    parametrization: str | None = None
    approximation: str = "exact"

    def build(self):
        if self.family == "circle":
            return circle_domain(self.parametrization or "arc_length", self.approximation)
        if self.family == "interval":
            return interval_domain(self.delta, 1.0)
        return family_domain(self.family, self.delta)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "DomainSpec":
        known = {k: data[k] for k in ("family", "delta", "parametrization", "approximation") if k in data}
        return cls(**known)

    @classmethod
    def from_json(cls, text: str) -> "DomainSpec":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "DomainSpec":
        return cls.from_json(Path(path).read_text())
