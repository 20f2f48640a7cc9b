import math

import numpy as np
import pytest

from oracles import mm1_ccdf
from sqfqueue import inversion, metrics, sim, solver
from sqfqueue.exceptions import SQFError
from sqfqueue.metrics import SingularityKind
from sqfqueue.model import Regime, validate_symmetric

P_EMPTY = {1.2: 0.638118122591754, 1.8: 0.3700742864285177, 0.6: 0.8370700963931675}
R_PLUS = -18.260041942319305
KAPPA = 6.86070461747493


def test_empty_probability_frozen(params):
    g0, pe = metrics.empty_queue_probability(params)
    assert pe == pytest.approx(P_EMPTY[params.lam], rel=1e-12)
    assert pe == pytest.approx(1 - params.rho + g0, rel=1e-15)


def test_near_saturation_limit():
    for lam, frozen in ((1.998, 0.25132605147501325), (1.999, 0.2506633966)):
        pe = metrics.empty_queue_probability(validate_symmetric(lam, 2.0))[1]
        assert abs(pe - 0.251) <= 0.01
        assert pe == pytest.approx(frozen, rel=1e-9)


def test_empty_probability_envelope():
    for rho in np.arange(0.1, 0.951, 0.05):
        p = validate_symmetric(rho * 2, 2.0)
        pe = metrics.empty_queue_probability(p)[1]
        assert 1 - rho <= pe <= 1 - rho / 2
        assert pe <= metrics.hol_empty_prob(p)


def test_supercritical_law(p18):
    law = metrics.sqf_tail_law(p18)
    assert law.regime is Regime.SUPERCRITICAL
    assert (law.rate, law.power, law.prefactor) == pytest.approx((-0.2, 0.0, 0.4), abs=1e-14)


def test_critical_law():
    law = metrics.sqf_tail_law(validate_symmetric(1.0, 2.0))
    assert law.regime is Regime.CRITICAL
    assert law.rate == -1.0 and law.power == -0.5
    assert law.prefactor == pytest.approx(1 / math.sqrt(4 * math.pi), rel=1e-15)


def test_subcritical_law(p06):
    law = metrics.sqf_tail_law(p06)
    assert law.rate == p06.zeta_plus and law.power == -1.5
    assert law.prefactor > 0
    assert law.prefactor == pytest.approx(KAPPA, rel=1e-9)
    rp = metrics.sqrt_coefficient(p06)
    kappa = (p06.zeta_plus + p06.mu) * rp / (p06.zeta_plus * p06.lam * math.sqrt(math.pi))
    assert law.prefactor == kappa


def test_regime_continuity():
    # rates scale with mu; at mu = 1 the distance at rho = 0.49 is about 0.01
    for rho in (0.49, 0.51):
        assert abs(metrics.sqf_tail_law(validate_symmetric(rho, 1.0)).rate + 0.5) < 0.02
    gaps = [abs(metrics.sqf_tail_law(validate_symmetric(2 * (0.5 - d), 2.0)).rate + 1.0)
            for d in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert np.all(np.diff(gaps) < 0) and gaps[-1] < 1e-3


def test_tail_law_ccdf_and_dict(p18):
    law = metrics.sqf_tail_law(p18)
    assert law.ccdf(10.0) == pytest.approx(0.4 * math.exp(-2.0))
    assert law.as_dict()["regime"] == "Supercritical"


def test_pole_singularity(p18):
    rep = metrics.g_singularity(p18)
    assert rep.kind is SingularityKind.SIMPLE_POLE
    assert rep.location == p18.sigma0
    assert rep.leading_coeff == pytest.approx(0.04, rel=1e-12)


def test_branch_singularity(p06):
    rep = metrics.g_singularity(p06)
    assert rep.kind is SingularityKind.ALGEBRAIC_ORDER_HALF
    assert rep.location == p06.zeta_plus
    assert rep.leading_coeff == pytest.approx(R_PLUS, rel=1e-9)


def test_critical_singularity_request_rejected():
    with pytest.raises(SQFError):
        metrics.g_singularity(validate_symmetric(1.0, 2.0))


def test_residue_extrapolation(p18):
    ex = metrics.extrapolate_residue(p18)
    assert abs(ex.value - 0.04) / 0.04 < 1e-4


def test_sqrt_coefficient_extrapolation(p06):
    ex = metrics.extrapolate_sqrt_coefficient(p06)
    closed = metrics.sqrt_coefficient(p06)
    assert abs(ex.value - closed) / abs(closed) < 1e-2
    assert ex.spread / abs(ex.value) < 1e-2


def test_sqrt_coefficient_needs_derivative_term(p06):
    # freezing M at the branch point drops a term of the same order
    frozen = metrics.sqrt_coefficient(p06, chain_rule=False)
    ex = metrics.extrapolate_sqrt_coefficient(p06)
    assert abs(frozen - ex.value) / abs(ex.value) > 0.05


def test_branch_constants(p06):
    a = metrics.branch_value(p06)
    e0 = metrics.branch_sqrt_coefficient(p06)
    x = solver.algebra.xi_pair(p06.zeta_plus + 1e-10, p06).xi_plus
    assert abs(x.real - a - e0 * 1e-5) < 1e-8
    eps = 1e-8
    x = solver.algebra.xi_pair(p06.zeta_plus + eps, p06).xi_plus
    assert (x.real - a) / math.sqrt(eps) == pytest.approx(metrics.branch_sqrt_coefficient(p06),
                                                          rel=1e-3)


def test_richardson_on_polynomial():
    t = [0.1 / 10 ** k for k in range(4)]
    ex = metrics.richardson([3.0 + 2 * x - 5 * x * x for x in t], 10.0)
    assert ex.value == pytest.approx(3.0, abs=1e-13)


def test_large_u_prefactors_subcritical(p06):
    # the approach to the asymptote is like 1 - c/u with c near 50, so compare far out
    opts = inversion.InversionOptions(node_count=128, precision_target=1e-12)
    u = np.array([2560.0, 5120.0])
    for tr, law in ((inversion.sqf_ccdf_transform(p06), metrics.sqf_tail_law(p06)),
                    (inversion.hol_ccdf_transform(p06), metrics.hol_tail_law(p06))):
        b = law.rate + 5e-4
        res = inversion.invert_grid(u, lambda s: tr(s + b), opts)  # noqa: B023
        assert res.valid.all()
        ratio = np.exp(np.log(res.value) + (b - law.rate) * u - np.log(law.prefactor)
                       - law.power * np.log(u))
        assert abs(2 * ratio[1] - ratio[0] - 1) < 5e-3


@pytest.mark.parametrize("lam", [1.0, 1.8])
def test_hol_prefactor_by_inversion(lam):
    p = validate_symmetric(lam, 2.0)
    law = metrics.hol_tail_law(p)
    tr = inversion.hol_ccdf_transform(p)
    b = law.rate + 0.02
    u = np.array([640.0])
    res = inversion.invert_grid(u, lambda s: tr(s + b),
                                inversion.InversionOptions(node_count=96, precision_target=1e-10))
    ratio = math.exp(math.log(res.value[0]) + (b - law.rate) * u[0]
                     - math.log(law.prefactor) - law.power * math.log(u[0]))
    assert abs(ratio - 1) < 5e-3


def test_hol_law_regimes(p18):
    law = metrics.hol_tail_law(p18)
    assert law.rate == p18.sigma0 == metrics.sqf_tail_law(p18).rate
    assert law.prefactor == pytest.approx(0.8)
    crit = metrics.hol_tail_law(validate_symmetric(1.0, 2.0))
    assert (crit.rate, crit.power) == (-1.0, -0.5)
    assert metrics.hol_empty_prob(p18) == pytest.approx(0.55)


def test_hol_transform_limits(params):
    assert abs(metrics.hol_transform(1e-9, params) - 1) < 1e-7
    at_inf = metrics.hol_transform(1e9, params).real
    assert at_inf >= 1 - params.rho
    vals = metrics.hol_transform(np.array([0.5, 1.0]), params)
    assert vals.shape == (2,)


def test_hol_transform_matches_simulation(p18):
    cfg = sim.symmetric_config(1.8, 2.0, cycles=100_000, seed=21, ccdf_grid=(),
                               laplace_grid=(0.5, 1.0, 2.0), policy=sim.Policy.HOL_PRIORITY_2)
    out = sim.simulate(cfg)
    for s, est in zip((0.5, 1.0, 2.0), out.laplace_1):
        assert est.contains(metrics.hol_transform(s, p18).real)


def test_mm1_total(p18):
    assert metrics.mm1_total_ccdf(0.0, p18) == pytest.approx(0.9)
    assert metrics.mm1_total_ccdf(10.0, p18) == pytest.approx(0.9 * math.exp(-2), rel=1e-14)
    for u in (0.5, 3.0, 17.0):
        assert metrics.mm1_total_ccdf(u, p18) == pytest.approx(mm1_ccdf(u, 1.8, 2.0), rel=1e-13)
    with pytest.raises(ValueError):
        metrics.mm1_total_ccdf(-1.0, p18)


def test_hol_priority_ccdf(p18):
    assert metrics.hol_priority_ccdf(0.0, p18) == pytest.approx(0.45)
