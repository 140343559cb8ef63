"""Acceptance criteria 1-10, each reporting one PASS/FAIL line."""
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from geomerr import experiments as ex
from geomerr.diagnostics import (SymmetricSystem, bound_coefficients, energy_budget, geometric_error,
                                 long_term_bound, long_term_bound_1d, reference_gradient)
from geomerr.geometry import family_domain
from geomerr.solver import SimulationConfig, analytic_1d, config_1d, simulate

pytestmark = pytest.mark.slow
TESTS = Path(__file__).parent


def within(value, ref, tol):
    return abs(value - ref) <= tol


@pytest.fixture(scope="module")
def sweep_1d():
    spec = ex.ExperimentSpec(name="sweep_1d", family="1d", delta_values=[0.05, 0.1], N=18, dt=1e-4, t_final=6.0)
    r = ex.run_1d_sweep(spec)
    return {(row[0], row[1]): row[2] for row in r.rows}


@pytest.fixture(scope="module")
def circle():
    return ex.run_circle(ex.ExperimentSpec(name="circle", family="circle", N=26))


def test_criterion_01_1d_max_errors(sweep_1d, criterion):
    ok = True
    parts = []
    for g in (0, 1):
        e1, e05 = sweep_1d[(0.1, g)], sweep_1d[(0.05, g)]
        ratio = e1 / e05
        ok &= within(e1, 0.283, 0.03 * 0.283) and within(e05, 0.143, 0.03 * 0.143) and within(ratio, 1.98, 0.05)
        parts.append(f"gamma={g}: {e1:.5f}, {e05:.5f}, ratio {ratio:.4f}")
    assert criterion(1, ok, "max ||e||_J (delta 0.1, 0.05; ref 0.283, 0.143, ratio 1.98): " + "; ".join(parts))


def test_criterion_02_gamma_insensitivity(sweep_1d, criterion):
    rel = {d: abs(sweep_1d[(d, 0)] - sweep_1d[(d, 1)]) / sweep_1d[(d, 1)] for d in (0.05, 0.1)}
    ok = all(v < 0.02 for v in rel.values())
    assert criterion(2, ok, "gamma 0 vs 1 rel. difference: " + ", ".join(f"delta={d}: {v:.3%}" for d, v in rel.items()))


def test_criterion_03_oracle_equivalence(criterion):
    delta = 0.1
    res = simulate(config_1d(delta, gamma=1, N=18, dt=1e-4, t_final=1.5, record_interval=15000))
    d = res.states[-1] - analytic_1d("erroneous", res.grid.XI, res.times[-1], delta=delta, gamma=1)
    err = math.sqrt(np.sum(res.grid.W * (1 - delta) * d * d))
    assert criterion(3, err < 1e-6, f"||v - v_exact||_J at t=1.5, delta=0.1, gamma=1: {err:.3e} (< 1e-6)")


def test_criterion_04_slope_ratios(criterion):
    spec = ex.ExperimentSpec(name="sweep_2d", N=18, dt=1e-4, t_final=1.5)
    r = {f: ex.run_2d_sweep(spec, f) for f in ("omega1", "omega2", "omega3", "omega4")}
    r12 = ex.slope_ratio(r["omega1"], r["omega2"])
    r34 = ex.slope_ratio(r["omega3"], r["omega4"])
    ok = within(r12, 2.04, 0.15) and within(r34, 2.18, 0.15)
    assert criterion(4, ok, f"slope ratios omega1/omega2 {r12:.4f} (2.04 +- 0.15), omega3/omega4 {r34:.4f} (2.18 +- 0.15)")


def test_criterion_05_circle_table(circle, criterion):
    rows = {row[0]: row for row in circle.rows}
    xp, al = rows["x_param"], rows["arc_length"]
    ratio = xp[3] / al[3]
    ok = (within(xp[3], 0.598, 0.03 * 0.598) and within(al[3], 0.0536, 0.03 * 0.0536)
          and within(ratio, 11.1, 0.5) and within(xp[1], 0.27, 0.05 * 0.27) and within(al[1], 0.030, 0.05 * 0.030))
    assert criterion(5, ok, f"||e||_J x_param {xp[3]:.5f} (0.598), arc {al[3]:.5f} (0.0536), ratio {ratio:.3f} (11.1); "
                            f"|dGamma|_max {xp[1]:.4f} (0.27), {al[1]:.5f} (0.030)")


def test_criterion_06_correct_domain_accuracy(circle, criterion):
    dom = family_domain("omega")
    res = simulate(SimulationConfig(domain=dom, correct_domain=dom, N=18, dt=1e-4, t_final=1.5, record_interval=15000))
    e2d, ec = res.final_error(), circle.rows[0][4]
    ok = e2d <= 1e-7 and ec <= 1.1e-7
    assert criterion(6, ok, f"square N=18: {e2d:.3e} (<= 1e-7), circle N=26: {ec:.3e} (<= 1.1e-7)")


def test_criterion_07_budget_closure(criterion):
    fd, sd = [], []
    for N in (10, 14, 18):
        res = simulate(config_1d(0.1, gamma=1, N=N, dt=1e-4, t_final=1.6))
        bud = energy_budget(res)
        fd.append(bud.relative_residual(0.5, 1.5))
        sd.append(bud.relative_residual(0.5, 1.5, semidiscrete=True))
    floor = 1e-8  # below this both residuals sit at the time-differencing / round-off floor

    def improving(r):
        steps = all(b < a or (a < floor and b < floor) for a, b in zip(r, r[1:]))
        return r[-1] <= r[0] and steps

    ok = all(v < 1e-2 for v in fd) and improving(fd) and improving(sd)
    assert criterion(7, ok, "relative residual N=10,14,18: centered-difference "
                     + ", ".join(f"{v:.2e}" for v in fd) + "; semi-discrete " + ", ".join(f"{v:.2e}" for v in sd))


def test_criterion_08_bound_validity(criterion):
    ok = True
    parts = []
    system = SymmetricSystem.from_advection((1.0, 0.0))
    for delta in (0.05, 0.1):
        for g in (0, 1):
            cfg = config_1d(delta, gamma=g, N=18, dt=1e-4, t_final=6.0)
            res = simulate(cfg)
            gef = geometric_error(cfg.correct_domain, cfg.domain, res.grid, system)
            bud = energy_budget(res, gef, system)
            qx, qe = reference_gradient(cfg.solution, cfg.correct_domain, res.grid, res.times[::20])
            c = bound_coefficients(gef, qx, qe)
            en = res.error_norms()
            b = long_term_bound(c.c1, c.c2, c.c3, c.c4, bud.eta_mean(), bud.B_max(), g, float(en[0]), res.times)
            b1 = long_term_bound_1d(delta, bud.eta_mean(), e0=float(en[0]), times=res.times)
            if g == 0:
                dom = b.applicable and b1.applicable and np.all(b.envelope >= en) and np.all(b1.envelope >= en)
                ok &= bool(dom)
                parts.append(f"delta={delta} gamma=0: eta {bud.eta_mean():.3f}, asymptote {b.asymptote:.4f} "
                             f"vs max ||e|| {en.max():.4f}, dominates {bool(dom)}")
            else:
                parts.append(f"delta={delta} gamma=1: alpha {b.alpha:.3f}, {b.message or 'applicable'}")
    assert criterion(8, ok, "; ".join(parts))


def test_criterion_09_brace_coefficients(criterion):
    refs = {"omega1": (25.4, 4.52), "omega3": (27.2, 3.9)}
    ok = True
    parts = []
    for fam, (rl, rd) in refs.items():
        d = ex.run_bounds(ex.ExperimentSpec(family=fam, N=18), delta=0.05)
        loc, der = d["R_bound_location_coeff"], d["R_bound_derivative_coeff"]
        ok &= within(loc, rl, 0.1 * rl) and within(der, rd, 0.1 * rd)
        parts.append(f"{fam}: location {loc:.3f} ({rl}), derivative {der:.3f} ({rd})")
    assert criterion(9, ok, "; ".join(parts) + " [+-10%]")


def test_criterion_10_invariant_suites(criterion):
    t0 = time.perf_counter()
    files = [str(TESTS / f) for f in ("test_basis.py", "test_geometry.py", "test_diagnostics.py", "test_solver.py")]
    r = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *files],
                       capture_output=True, text=True)
    elapsed = time.perf_counter() - t0
    last = r.stdout.strip().splitlines()[-1] if r.stdout.strip() else r.stderr.strip()
    ok = r.returncode == 0 and elapsed < 60
    assert criterion(10, ok, f"invariant suites: {last} ({elapsed:.1f} s, < 60 s)")
