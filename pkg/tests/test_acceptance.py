"""Acceptance criteria 1-12, one PASS/FAIL line per criterion on stdout.

Criteria with several parts print one line per part. Run with ``-s`` (or
look at the captured output) to see the report.
"""
import functools
import time

import numpy as np
import pytest

from sqfqueue import cli, inversion, metrics, sim, validation
from sqfqueue.inversion import InversionOptions
from sqfqueue.model import SymmetricParams
from sqfqueue.sim import Policy

from conftest import PARAM_SETS

ALL = [SymmetricParams(lam, mu) for lam, mu in PARAM_SETS]


@pytest.fixture
def report(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {label}: {detail}")
        assert ok, f"criterion {label}: {detail}"
    return emit


def test_criterion_01_algebra_battery(report):
    t0 = time.perf_counter()
    worst = max(validation.vieta_check(p, n_real=200, n_complex=200, seed=1)[0] for p in ALL)
    bad = sum(validation.ordering_check(p, n=200)[0] for p in ALL)
    dt = time.perf_counter() - t0
    report("1", worst < 1e-10 and bad == 0 and dt < 5,
           f"max Vieta residual {worst:.2e}, ordering failures {int(bad)}, "
           f"{dt:.2f} s for {len(ALL)} parameter sets")


def test_criterion_02_functional_equation(report):
    t0 = time.perf_counter()
    worst = max(validation.functional_eq_check(p)[0] for p in ALL)
    dt = time.perf_counter() - t0
    report("2", worst < 1e-9 and dt < 5, f"max relative residual {worst:.2e} in {dt:.2f} s")


def test_criterion_03_pollaczek_khinchin(report):
    worst = max(validation.pk_check(p, n=100)[0] for p in ALL)
    report("3", worst < 1e-9, f"max residual {worst:.2e} over 100 points x 3 sets")


def test_criterion_04_normalization_and_balance(report):
    worst = max(validation.normalization_check(p)[0] for p in ALL)
    report("4", worst < 1e-8, f"max of |F(0,0)-1| and |F0(0,0)+G(0)-rho/2| = {worst:.2e}")


def test_criterion_05_g_zero_limit(report):
    worst = max(validation.g_zero_check(p)[0] for p in ALL)
    report("5", worst < 1e-6, f"max |lim G(s) - M((lam-2mu)/4)| = {worst:.2e}")


def test_criterion_06_saturation_limit(report):
    t0 = time.perf_counter()
    res, code, _, _ = cli.run(["sweep", "--mu", "2", "--rho-min", "0.5", "--rho-max", "0.999",
                               "--steps", "11"])
    dt = time.perf_counter() - t0
    last = res.rows[-1]
    report("6", code == 0 and last[0] == pytest.approx(0.999) and abs(last[1] - 0.251) <= 0.01
           and dt < 60, f"P(U1=0) at rho=0.999 is {last[1]:.6f} ({dt:.2f} s)")


def test_criterion_07_simulation_vs_analytics(report):
    p = SymmetricParams(1.8, 2.0)
    t0 = time.perf_counter()
    out = sim.simulate(sim.symmetric_config(1.8, 2.0, cycles=100_000, seed=0, ccdf_grid=()))
    dt = time.perf_counter() - t0
    pe = metrics.empty_queue_probability(p)[1]
    checks = {"p_empty_both~0.1": out.p_empty_both.contains(0.1),
              "frac_serving_1~0.45": out.frac_serving_1.contains(0.45),
              "p_le~0.55": out.p_le.contains(0.55),
              f"p_empty_1~{pe:.5f}": out.p_empty_1.contains(pe)}
    report("7", all(checks.values()) and dt < 120,
           ", ".join(f"{k} {'ok' if v else 'MISS'}" for k, v in checks.items())
           + f"; p_empty_1 = {out.p_empty_1.point:.4f} +- {out.p_empty_1.half_width_99:.4f}"
           f" ({dt:.2f} s)")


@functools.lru_cache(maxsize=None)
def _inverted_window_fit(p, u_max, n):
    u = np.linspace(u_max / n, u_max, n)
    v = inversion.ccdf_curve(u, params=p).value
    sel = (v >= 1e-5) & (v <= 1e-2)
    slope, intercept = np.polyfit(u[sel], np.log(v[sel]), 1)
    return slope, np.exp(intercept), u[sel]


def test_criterion_08a_supercritical_rate(report):
    rate, _, w = _inverted_window_fit(SymmetricParams(1.8, 2.0), 120.0, 2400)
    err = abs(rate / -0.2 - 1)
    report("8a", err < 0.05, f"rho=0.9 fitted rate {rate:.5f} (error {err:.2%}), "
           f"window u in [{w.min():.2f}, {w.max():.2f}]")


def test_criterion_08b_subcritical_rate(report):
    # in this CCDF window u is only 2 to 6 and the u^(-3/2) factor still
    # dominates the local slope; see the large-u tests in test_metrics
    p = SymmetricParams(0.6, 2.0)
    rate, _, w = _inverted_window_fit(p, 12.0, 1200)
    err = abs(rate / p.zeta_plus - 1)
    report("8b", err < 0.05, f"rho=0.3 fitted rate {rate:.5f} vs zeta+ {p.zeta_plus:.5f} "
           f"(error {err:.2%}), window u in [{w.min():.2f}, {w.max():.2f}]")


def test_criterion_08c_supercritical_prefactor(report):
    _, pref, _ = _inverted_window_fit(SymmetricParams(1.8, 2.0), 120.0, 2400)
    err = abs(pref / 0.4 - 1)
    report("8c", err < 0.15, f"fitted prefactor {pref:.5f} vs 0.4 (error {err:.2%})")


def test_criterion_09_singularity_coefficients(report):
    r0 = metrics.extrapolate_residue(SymmetricParams(1.8, 2.0))
    e0 = abs(r0.value - 0.04) / 0.04
    p06 = SymmetricParams(0.6, 2.0)
    rp = metrics.extrapolate_sqrt_coefficient(p06)
    closed = metrics.sqrt_coefficient(p06)
    e1 = abs(rp.value - closed) / abs(closed)
    s1 = rp.spread / abs(rp.value)
    report("9", e0 < 1e-4 and e1 < 1e-2 and s1 < 1e-2,
           f"residue {r0.value:.8f} (rel err {e0:.1e}); sqrt coefficient {rp.value:.6f} vs "
           f"{closed:.6f} (rel err {e1:.1e}, Richardson spread {s1:.1e})")


def test_criterion_10_stochastic_sandwich(report):
    rep = sim.sandwich_check(sim.symmetric_config(1.8, 2.0, cycles=100_000, seed=0))
    hol = rep.lower.p_empty_1
    report("10", rep.ok and hol.contains(1 - 0.45),
           f"{len(rep.violations)} ordering violations on {len(rep.middle.ccdf_grid)} grid "
           f"points; priority queue P(empty) {hol.point:.4f} +- {hol.half_width_99:.4f}")


# u = 10 at rho = 0.3 has CCDF 2.5e-7 and needs about 1e7 cycles to be observed
C11_CYCLES = {0.6: 100_000, 0.9: 100_000, 0.3: 10_000_000}


def test_criterion_11_total_workload_oracle(report):
    grid = (1.0, 5.0, 10.0)
    misses = []
    for p in ALL:
        out = sim.simulate(sim.symmetric_config(p.lam, p.mu, cycles=C11_CYCLES[round(p.rho, 2)],
                                                seed=0, ccdf_grid=grid))
        exact = metrics.mm1_total_ccdf(np.array(grid), p)
        misses += [(p.rho, u) for u, e, x in zip(grid, out.ccdf_total, exact) if not e.contains(x)]
    report("11", not misses, f"points outside the CI: {misses or 'none'}")


def test_criterion_12_inversion_fidelity(report):
    p = SymmetricParams(1.8, 2.0)
    grid = tuple(float(x) for x in np.arange(0.0, 15.25, 0.25))
    out = sim.simulate(sim.symmetric_config(1.8, 2.0, cycles=1_000_000, seed=0, ccdf_grid=grid))
    inv = inversion.ccdf_curve(np.array(grid), params=p).value
    gap = float(np.max(np.abs(inv - np.array([e.point for e in out.ccdf_1]))))
    u = np.linspace(0.25, 15.0, 60)
    a = inversion.ccdf_curve(u, InversionOptions(node_count=64), params=p).value
    b = inversion.ccdf_curve(u, InversionOptions(node_count=128), params=p).value
    dbl = float(np.max(np.abs(a - b)))
    report("12", gap <= 1e-2 and dbl < 1e-8,
           f"sup gap to simulation {gap:.4f} on [0, 15]; node doubling change {dbl:.1e}")
