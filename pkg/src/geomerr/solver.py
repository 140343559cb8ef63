"""Single-element DG spectral element solver for constant-coefficient
advection on mapped domains, with analytic reference solutions.

The semi-discrete operator is linear, v_t = L v + S g(t), where g stacks the
boundary data at the face quadrature points. L and S are assembled once from
the weak-form DGSEM on Legendre-Gauss nodes and time is advanced with
classical RK4.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .basis import TensorGrid
from .geometry import MetricField, face_geometry, interval_domain, metric_terms

FACE_ORDER = ("left", "right", "bottom", "top")
# RK4 stability limit on the imaginary axis is 2 sqrt(2).
RK4_STABILITY_LIMIT = 2.8


class SolverError(RuntimeError):
    """Raised when a run produces non-finite values."""


@dataclass(frozen=True)
class PlaneWave:
    """q(x, t) = sin(omega pi (a.x - |a|^2 t)), an exact solution of q_t + a.grad q = 0."""

    advection: tuple[float, float] = (math.sqrt(3.0) / 2.0, 0.5)
    omega: float = 4.0

    @property
    def a(self) -> np.ndarray:
        return np.asarray(self.advection, dtype=float)

    def phase(self, x: np.ndarray, t: float) -> np.ndarray:
        a = self.a
        return a[0] * x[0] + a[1] * x[1] - float(a @ a) * t

    def __call__(self, x, t):
        return np.sin(self.omega * np.pi * self.phase(np.asarray(x, float), t))

    def gradient(self, x, t) -> np.ndarray:
        """Physical gradient, shape (2, ...)."""
        c = self.omega * np.pi * np.cos(self.omega * np.pi * self.phase(np.asarray(x, float), t))
        a = self.a
        return np.stack([a[0] * c, a[1] * c])

    def time_derivative(self, x, t):
        a = self.a
        c = self.omega * np.pi * np.cos(self.omega * np.pi * self.phase(np.asarray(x, float), t))
        return -float(a @ a) * c


def wave_1d(a: float = 1.0) -> PlaneWave:
    """The 1D solution sin(2 pi (x - a t)) as a plane wave in x."""
    if a <= 0:
        raise ValueError("the 1D problem needs a > 0")
    return PlaneWave((float(a), 0.0), 2.0 / float(a))


def analytic_2d(x, y, t, advection=(math.sqrt(3.0) / 2.0, 0.5), omega: float = 4.0):
    return PlaneWave(tuple(advection), omega)(np.stack(np.broadcast_arrays(x, y)), t)


def analytic_1d(kind: str, xi, t, a: float = 1.0, delta: float = 0.0, gamma: int = 1):
    """Exact 1D solutions in reference coordinates.

    kind "correct" is sin(2 pi (xi - a t)) on [0, 1]. kind "erroneous" is the
    solution on [delta, 1] mapped by x_e = delta + xi (1 - delta) with inflow
    data sin(2 pi (gamma delta - a t)) at xi = 0.
    """
    xi = np.asarray(xi, dtype=float)
    if kind == "correct":
        return np.sin(2.0 * np.pi * (xi - a * t))
    if kind != "erroneous":
        raise ValueError(f"unknown kind {kind!r}")
    if gamma not in (0, 1):
        raise ValueError("gamma must be 0 or 1")
    inside = xi - a * t / (1.0 - delta) >= 0.0
    base = xi * (1.0 - delta) - a * t
    return np.where(inside, np.sin(2.0 * np.pi * (delta + base)),
                    np.sin(2.0 * np.pi * (gamma * delta + base)))


@dataclass
class SimulationConfig:
    """Run parameters. `domain` is the computational (possibly erroneous) domain."""

    domain: object
    correct_domain: object
    N: int = 18
    N_eta: int | None = None
    dt: float = 1e-4
    t_final: float = 1.5
    advection: tuple[float, float] = (math.sqrt(3.0) / 2.0, 0.5)
    omega: float = 4.0
    gamma: int = 1
    record_interval: int = 10

    def __post_init__(self):
        if self.gamma not in (0, 1):
            raise ValueError("gamma must be 0 or 1")
        if self.dt <= 0 or self.t_final < 0:
            raise ValueError("need dt > 0 and t_final >= 0")
        if self.record_interval < 1:
            raise ValueError("record_interval must be positive")
        self.advection = tuple(float(c) for c in np.broadcast_to(np.asarray(self.advection, float), (2,))) \
            if np.ndim(self.advection) else (float(self.advection), 0.0)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def solution(self) -> PlaneWave:
        return PlaneWave(self.advection, self.omega)


class DGOperator:
    """Weak-form DGSEM for v_t + (1/J) div_xi(B v) = 0 with upwind boundary flux.

    The contravariant speeds b_i = Ja^i . a are taken from the analytic metric
    terms of `domain` at nodes and at the face quadrature points.
    """

    def __init__(self, domain, grid: TensorGrid, advection):
        self.grid = grid
        self.domain = domain
        self.a = np.asarray(advection, dtype=float)
        self.metrics: MetricField = metric_terms(domain, grid)
        m = self.metrics
        self.b1 = np.einsum("k...,k->...", m.Ja1, self.a)
        self.b2 = np.einsum("k...,k->...", m.Ja2, self.a)
        self.faces = face_geometry(domain, grid)
        self.Bn = {}
        for name in FACE_ORDER:
            f = self.faces[name]
            self.Bn[name] = f.sign * np.einsum("k...,k->...", f.Ja_normal, self.a)
        self.face_sizes = [self.faces[n].weights.size for n in FACE_ORDER]
        self.face_positions = np.concatenate([self.faces[n].position for n in FACE_ORDER], axis=1)
        self._assemble()

    def _pieces(self):
        g = self.grid
        wx, we = g.rule_xi.weights, g.rule_eta.weights
        dhat_x = -(g.D_xi.T * wx[None, :]) / wx[:, None]
        dhat_e = -(g.D_eta.T * we[None, :]) / we[:, None]
        lift = {
            "left": (np.outer(g.l0_xi / wx, g.l0_xi), "xi"),
            "right": (np.outer(g.l1_xi / wx, g.l1_xi), "xi"),
            "bottom": (np.outer(g.l0_eta / we, g.l0_eta), "eta"),
            "top": (np.outer(g.l1_eta / we, g.l1_eta), "eta"),
        }
        return dhat_x, dhat_e, lift

    def _assemble(self):
        g = self.grid
        nx, ny = g.shape
        Ix, Iy = np.eye(nx), np.eye(ny)
        dhat_x, dhat_e, lift = self._pieces()
        A = np.kron(dhat_x, Iy) * self.b1.ravel()[None, :] + np.kron(Ix, dhat_e) * self.b2.ravel()[None, :]
        cols = []
        for name in FACE_ORDER:
            lmat, axis = lift[name]
            B = self.Bn[name]
            bp, bm = np.maximum(B, 0.0), np.minimum(B, 0.0)
            if axis == "xi":
                A += np.kron(lmat, np.diag(bp))
                vec = (g.l0_xi if name == "left" else g.l1_xi) / g.rule_xi.weights
                cols.append(np.kron(vec[:, None], np.diag(bm)))
            else:
                A += np.kron(np.diag(bp), lmat)
                vec = (g.l0_eta if name == "bottom" else g.l1_eta) / g.rule_eta.weights
                cols.append(np.kron(np.diag(bm), vec[:, None]))
        inv_j = 1.0 / self.metrics.J.ravel()
        self.L = -inv_j[:, None] * A
        self.S = -inv_j[:, None] * np.concatenate(cols, axis=1)

    def boundary_vector(self, g_faces: dict) -> np.ndarray:
        return np.concatenate([np.broadcast_to(np.asarray(g_faces[n], float), (s,))
                               for n, s in zip(FACE_ORDER, self.face_sizes)])

    def split_faces(self, gvec: np.ndarray) -> dict:
        out, k = {}, 0
        for n, s in zip(FACE_ORDER, self.face_sizes):
            out[n] = gvec[k:k + s]
            k += s
        return out

    def apply(self, v: np.ndarray, gvec: np.ndarray) -> np.ndarray:
        shape = v.shape
        return (self.L @ v.ravel() + self.S @ gvec).reshape(shape)

    def max_speed(self) -> float:
        return float(np.max((np.abs(self.b1) + np.abs(self.b2)) / self.metrics.J))

    def spectral_radius(self) -> float:
        if not hasattr(self, "_rho"):
            self._rho = float(np.max(np.abs(np.linalg.eigvals(self.L))))
        return self._rho


def dg_rhs(v: np.ndarray, op: DGOperator, g_faces: dict) -> np.ndarray:
    """Direct nodal evaluation of the DG time derivative (reference implementation).

    Args:
        v: nodal state, shape grid.shape.
        op: operator holding metrics, speeds and grid.
        g_faces: boundary data per face name at the face quadrature points.

    Returns:
        dv/dt with the same shape as v.
    """
    g = op.grid
    wx, we = g.rule_xi.weights, g.rule_eta.weights
    dhat_x, dhat_e, _ = op._pieces()
    f1, f2 = op.b1 * v, op.b2 * v
    vol = dhat_x @ f1 + f2 @ dhat_e.T
    traces = {"left": g.l0_xi @ v, "right": g.l1_xi @ v, "bottom": v @ g.l0_eta, "top": v @ g.l1_eta}
    fn = {}
    for name in FACE_ORDER:
        B = op.Bn[name]
        fn[name] = np.maximum(B, 0.0) * traces[name] + np.minimum(B, 0.0) * np.asarray(g_faces[name], float)
    surf = (np.outer(g.l0_xi / wx, fn["left"]) + np.outer(g.l1_xi / wx, fn["right"])
            + np.outer(fn["bottom"], g.l0_eta / we) + np.outer(fn["top"], g.l1_eta / we))
    return -(surf + vol) / op.metrics.J


def rk_step(v: np.ndarray, rhs: Callable[[np.ndarray, float], np.ndarray], t: float, dt: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of v' = rhs(v, t)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    k1 = rhs(v, t)
    k2 = rhs(v + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = rhs(v + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = rhs(v + dt * k3, t + dt)
    return v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class SimulationResult:
    config: SimulationConfig
    grid: TensorGrid
    operator: DGOperator
    times: np.ndarray
    states: np.ndarray  # (n_records, nx, ny)
    correct_positions: np.ndarray  # (2, nx, ny)
    correct_J: np.ndarray
    extra: dict = field(default_factory=dict)

    def reference(self, t: float) -> np.ndarray:
        return self.config.solution(self.correct_positions, t)

    def errors(self) -> np.ndarray:
        """Nodal error e = v - q(X) at every record, shape like states."""
        sol = self.config.solution
        return np.stack([s - sol(self.correct_positions, t) for s, t in zip(self.states, self.times)])

    def error_norms(self) -> np.ndarray:
        e = self.errors()
        return np.sqrt(np.einsum("kij,ij->k", e * e, self.grid.W * self.correct_J))

    def final_error(self) -> float:
        return float(self.error_norms()[-1])


def boundary_positions(config: SimulationConfig, op: DGOperator) -> np.ndarray:
    """Face positions at which boundary data is evaluated (gamma selects the domain)."""
    if config.gamma == 1:
        return op.face_positions
    faces = face_geometry(config.correct_domain, op.grid)
    return np.concatenate([faces[n].position for n in FACE_ORDER], axis=1)


def make_grid(config: SimulationConfig) -> TensorGrid:
    return TensorGrid(config.N, config.N if config.N_eta is None else config.N_eta)


def simulate(config: SimulationConfig, initial=None, boundary=None) -> SimulationResult:
    """Advance the DG solution from the plane-wave initial state to t_final.

    Args:
        config: run parameters.
        initial: optional nodal initial state; defaults to q(X(xi), 0) with X
            the run domain's position map.
        boundary: optional callable t -> stacked face data; defaults to the
            plane wave at the gamma-selected boundary positions.

    Returns:
        SimulationResult with states recorded every `record_interval` steps and
        at the final time.
    """
    grid = make_grid(config)
    op = DGOperator(config.domain, grid, config.advection)
    sol = config.solution
    x_run = config.domain.position(grid.XI, grid.ETA)
    v = sol(x_run, 0.0) if initial is None else np.array(initial, dtype=float)
    if boundary is None:
        pos = boundary_positions(config, op)
        boundary = lambda t: sol(pos, t)
    courant = config.dt * op.spectral_radius()
    if courant > RK4_STABILITY_LIMIT:
        warnings.warn(f"time step may be unstable: dt * spectral radius = {courant:.3g}", RuntimeWarning)

    L, S = op.L, op.S
    shape = v.shape

    def rhs(u, t):
        return L @ u + S @ boundary(t)

    n = config.n_steps
    dt = config.dt
    u = v.ravel().copy()
    times, states = [0.0], [v.copy()]
    for step in range(1, n + 1):
        t0 = (step - 1) * dt
        u = rk_step(u, rhs, t0, dt)
        if not np.all(np.isfinite(u)):
            raise SolverError(f"non-finite solution at step {step} (t = {step * dt:.6g})")
        if step % config.record_interval == 0 or step == n:
            times.append(step * dt)
            states.append(u.reshape(shape).copy())
    correct = config.correct_domain.position(grid.XI, grid.ETA)
    cm = metric_terms(config.correct_domain, grid)
    return SimulationResult(config, grid, op, np.asarray(times), np.stack(states), correct, cm.J)


def config_1d(delta: float, a: float = 1.0, gamma: int = 1, N: int = 18, dt: float = 1e-4,
              t_final: float = 6.0, record_interval: int = 10) -> SimulationConfig:
    """1D shifted-interval problem realized on a strip with one eta node."""
    wave = wave_1d(a)
    return SimulationConfig(domain=interval_domain(delta, 1.0), correct_domain=interval_domain(0.0, 1.0),
                            N=N, N_eta=0, dt=dt, t_final=t_final, advection=wave.advection,
                            omega=wave.omega, gamma=gamma, record_interval=record_interval)


def error_field(v: np.ndarray, t: float, solution: PlaneWave, correct_positions: np.ndarray) -> np.ndarray:
    """e = v - q evaluated at the correct physical location of each reference node."""
    return v - solution(correct_positions, t)


def energy_monitor(result: SimulationResult) -> dict:
    """Energy balance of a recorded run on its own (computational) domain.

    The upwind DG scheme satisfies, for exactly integrated volume terms,
    d/dt ||v||^2_J = -sum B+ v^2 - sum |B-| (v - g)^2 + sum |B-| g^2, with face
    sums taken by face quadrature. The returned residual compares this with a
    centered difference of the recorded energy. `bound` is the initial energy
    plus the accumulated inflow-data integral, which bounds the energy.
    """
    op, grid = result.operator, result.grid
    states = result.states
    J = op.metrics.J
    energy = np.einsum("kij,ij->k", states * states, grid.W * J)
    sol = result.config.solution
    pos = boundary_positions(result.config, op)
    outflow = np.zeros(len(states))
    jump = np.zeros(len(states))
    data = np.zeros(len(states))
    for k, (s, t) in enumerate(zip(states, result.times)):
        gf = op.split_faces(sol(pos, t))
        tr = _traces(grid, s)
        for name in FACE_ORDER:
            B = op.Bn[name]
            w = op.faces[name].weights
            bm = np.abs(np.minimum(B, 0.0))
            outflow[k] += np.sum(w * np.maximum(B, 0.0) * tr[name] ** 2)
            jump[k] += np.sum(w * bm * (tr[name] - gf[name]) ** 2)
            data[k] += np.sum(w * bm * gf[name] ** 2)
    rate = centered_derivative(energy, result.times)
    balance = -outflow - jump + data
    accumulated = np.concatenate([[0.0], np.cumsum(0.5 * (data[1:] + data[:-1]) * np.diff(result.times))])
    return {"t": result.times, "energy": energy, "rate": rate, "balance": balance,
            "outflow": outflow, "jump": jump, "inflow_data": data,
            "residual": rate - balance, "bound": energy[0] + accumulated}


def _traces(grid: TensorGrid, s: np.ndarray) -> dict:
    return {"left": grid.l0_xi @ s, "right": grid.l1_xi @ s, "bottom": s @ grid.l0_eta, "top": s @ grid.l1_eta}


def centered_derivative(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Fourth-order centered difference on a uniform series; NaN at the two ends."""
    y = np.asarray(y, dtype=float)
    out = np.full_like(y, np.nan)
    if y.size < 5:
        return out
    h = np.diff(t)
    if not np.allclose(h[:-1], h[0], rtol=1e-9, atol=0):
        raise ValueError("centered_derivative needs a uniform sample spacing (except the last)")
    h0 = h[0]
    m = y.size - 2 if not np.isclose(h[-1], h0, rtol=1e-9) else y.size
    out[2:m - 2] = (y[0:m - 4] - 8 * y[1:m - 3] + 8 * y[3:m - 1] - y[4:m]) / (12.0 * h0)
    return out
