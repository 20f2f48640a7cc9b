"""Invariant battery shared by the ``validate`` command and the test suite.

Each check returns the worst residual it saw and the threshold it must stay
under. The quick level covers the analytic identities for one parameter
set; the full level adds three simulation cross-checks.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import algebra, metrics, sim, solver
from .exceptions import SQFError
from .model import SymmetricParams

FE_POINTS = (0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0)


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool
    seconds: float
    detail: str = ""

    def as_dict(self):
        return {"name": self.name, "value": self.value, "threshold": self.threshold,
                "passed": self.passed, "seconds": self.seconds, "detail": self.detail}


def _check(name, threshold, fn):
    t0 = time.perf_counter()
    try:
        value, detail = fn()
        passed = bool(np.isfinite(value) and value < threshold)
    except (SQFError, ArithmeticError, ValueError) as exc:
        value, detail, passed = float("inf"), f"{type(exc).__name__}: {exc}", False
    return CheckResult(name, float(value), threshold, passed, time.perf_counter() - t0, detail)


# ---------------------------------------------------------------------------
# analytic checks
# ---------------------------------------------------------------------------

def vieta_check(params: SymmetricParams, n_real=200, n_complex=200, seed=0):
    """Worst Vieta residual over real z in [0, 50] and random complex z right of eta1."""
    eta1 = algebra.ramification_points(params).eta1
    rng = np.random.default_rng(seed)
    zs = list(np.linspace(0.0, 50.0, n_real))
    re = rng.uniform(eta1 + 0.1, 20.0, n_complex)
    im = rng.uniform(-20.0, 20.0, n_complex)
    zs += list(re + 1j * im)
    worst = 0.0
    for z in zs:
        worst = max(worst, max(algebra.vieta_residuals(algebra.cubic_roots(z, params), params)))
    return worst, f"{len(zs)} points"


def ordering_check(params: SymmetricParams, n=200):
    """Count of real z >= 0 where alpha < -z <= beta <= 0 < gamma fails (0 is a pass)."""
    bad = 0
    for z in np.linspace(0.0, 50.0, n):
        r = algebra.cubic_roots(z, params)
        a, b, g = r.alpha.real, r.beta.real, r.gamma.real
        if not (a < -z <= b + 1e-12 * (1 + z) and b <= 1e-12 and g > 0):
            bad += 1
    return float(bad), f"{n} points"


def functional_eq_check(params: SymmetricParams, points=FE_POINTS, tol=solver.DEFAULT_TOL):
    worst = max(solver.residual_functional_eq(z, params, tol) for z in points)
    return worst, f"z in {list(points)}"


def pk_check(params: SymmetricParams, n=100):
    s = np.linspace(0.01, 50.0, n)
    return max(solver.pk_residual(x, params) for x in s), f"{n} points on [0.01, 50]"


def kernel_check(params: SymmetricParams):
    pairs = [(0.3, 1.7), (1.0, 0.2), (2.5, 4.0), (0.7 + 0.4j, 1.1 - 0.3j), (5.0, 0.0)]
    return max(solver.kernel_equation_residuals(a, b, params) for a, b in pairs), \
        f"{len(pairs)} pairs"


def normalization_check(params: SymmetricParams):
    """max(|F(0,0) - 1|, |F0(0,0) + G(0) - rho/2|)."""
    g0 = solver.g_zero(params)
    f00 = solver.f_marginal(0.0, params)
    bal = solver.f0_transform(0.0, 0.0, params) + g0
    a = abs(f00 - 1.0)
    b = abs(bal - params.rho / 2.0)
    return max(a, b), f"|F(0,0)-1|={a:.3g}, |F0(0,0)+G(0)-rho/2|={b:.3g}"


def g_zero_check(params: SymmetricParams, ks=(4, 5, 6, 7)):
    """|lim G(s) as s -> 0+ minus M((lam - 2 mu)/4)|, limit taken by Richardson."""
    s = np.array([10.0 ** (-k) for k in ks])
    g, ok = solver.g_values(s, params)
    if not ok.all():
        raise SQFError("G could not be evaluated near 0")
    lim = metrics.richardson(g.real, 10.0).value
    m = solver.m_series((params.lam - 2.0 * params.mu) / 4.0, params).value.real
    return abs(lim - m), f"limit {lim!r}, M value {m!r}"


def route_check(params: SymmetricParams):
    """Agreement of the two expressions for G where both apply (large real s)."""
    s = [5.0, 10.0, 20.0, 50.0]
    vals = [solver.route_discrepancy(x, params) for x in s]
    vals = [v for v in vals if math.isfinite(v)]
    if not vals:
        return 0.0, "no point where both routes apply"
    return max(vals), f"{len(vals)} points"


# ---------------------------------------------------------------------------
# simulation checks
# ---------------------------------------------------------------------------

def _outside(est: sim.Estimate, target: float) -> float:
    """Distance from target to the CI in half-widths; < 1 means the CI covers it."""
    return abs(est.point - target) / est.half_width_99


def sim_empty_check(params: SymmetricParams, cycles=100_000, seed=0):
    out = sim.simulate(sim.symmetric_config(params.lam, params.mu, cycles=cycles, seed=seed,
                                            ccdf_grid=()))
    _, p_empty = metrics.empty_queue_probability(params)
    worst = max(_outside(out.p_empty_both, 1.0 - params.rho), _outside(out.p_empty_1, p_empty))
    return worst, f"p_empty_1={out.p_empty_1.point:.5f}+-{out.p_empty_1.half_width_99:.2g}"


def sim_total_check(params: SymmetricParams, cycles=100_000, seed=0):
    grid = (1.0, 5.0, 10.0)
    out = sim.simulate(sim.symmetric_config(params.lam, params.mu, cycles=cycles, seed=seed,
                                            ccdf_grid=grid))
    exact = metrics.mm1_total_ccdf(np.array(grid), params)
    return max(_outside(e, x) for e, x in zip(out.ccdf_total, exact)), "u in {1, 5, 10}"


def sim_sandwich_check(params: SymmetricParams, cycles=100_000, seed=0):
    grid = tuple(float(u) for u in np.arange(0.0, 20.5, 0.5))
    rep = sim.sandwich_check(sim.symmetric_config(params.lam, params.mu, cycles=cycles, seed=seed,
                                                  ccdf_grid=grid))
    return float(len(rep.violations)), f"largest excess over the joint CI {rep.max_excess:.3g}"


def run_battery(params: SymmetricParams, level: str = "quick", seed: int = 0,
                tol: float = solver.DEFAULT_TOL):
    """Run the checks for ``level`` ('quick' or 'full') and return CheckResults."""
    if level not in ("quick", "full"):
        raise ValueError("level must be 'quick' or 'full'")
    checks = [
        ("vieta", 1e-10, lambda: vieta_check(params, n_complex=50)),
        ("branch_ordering", 0.5, lambda: ordering_check(params)),
        ("functional_equation", 1e-9, lambda: functional_eq_check(params, tol=tol)),
        ("pollaczek_khinchin", 1e-9, lambda: pk_check(params, n=20 if level == "quick" else 100)),
        ("kernel_equations", 1e-9, lambda: kernel_check(params)),
        ("normalization", 1e-8, lambda: normalization_check(params)),
        ("g_zero_limit", 1e-6, lambda: g_zero_check(params)),
        ("route_agreement", 1e-9, lambda: route_check(params)),
    ]
    if level == "full":
        checks += [
            ("sim_empty_probabilities", 1.0, lambda: sim_empty_check(params, seed=seed)),
            ("sim_total_workload", 1.0, lambda: sim_total_check(params, seed=seed)),
            ("sim_sandwich", 0.5, lambda: sim_sandwich_check(params, seed=seed)),
        ]
    return [_check(name, thr, fn) for name, thr, fn in checks]
