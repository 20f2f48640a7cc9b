import math

import numpy as np
import pytest

from sqfqueue import inversion, metrics
from sqfqueue.exceptions import InversionError
from sqfqueue.inversion import InversionMethod, InversionOptions

CURVE_09 = {0.05: 0.61371582, 1.0: 0.41169621, 5.0: 0.15175077, 10.0: 0.05448454,
            15.0: 0.01994879, 20.0: 0.00732987, 30.0: 0.00099155}


def test_options_validation():
    with pytest.raises(ValueError):
        InversionOptions(node_count=8)
    with pytest.raises(ValueError):
        InversionOptions(precision_target=0.0)
    assert InversionOptions(method="FixedTalbot").method is InversionMethod.TALBOT


def test_known_transform():
    # Exp(1): CCDF transform 1/(1+s)
    u = np.array([0.1, 1.0, 5.0, 20.0])
    res = inversion.invert_grid(u, lambda s: 1.0 / (1.0 + s))
    assert np.allclose(res.value, np.exp(-u), atol=1e-9)
    tal = inversion.invert_grid(u, lambda s: 1.0 / (1.0 + s),
                                InversionOptions(method=InversionMethod.TALBOT))
    assert np.allclose(tal.value, np.exp(-u), atol=1e-9)


def test_frozen_curve(p18):
    u = np.array(sorted(CURVE_09))
    res = inversion.ccdf_curve(u, params=p18)
    assert res.valid.all()
    assert np.allclose(res.value, [CURVE_09[x] for x in u], atol=1e-8)


def test_value_at_zero(params):
    g0, _ = metrics.empty_queue_probability(params)
    res = inversion.ccdf_curve([0.0, 1e-3], params=params)
    assert res.value[0] == pytest.approx(params.rho - g0, rel=1e-14)
    assert abs(res.value[1] - res.value[0]) < 1e-2


def test_supercritical_log_slope(p18):
    u = np.array([30.0, 40.0])
    v = inversion.ccdf_curve(u, params=p18).value
    assert (math.log(v[1]) - math.log(v[0])) / 10 == pytest.approx(-0.2, rel=1e-4)


def test_monotone(params):
    u = np.linspace(0.0, 30.0, 121)
    v = inversion.ccdf_curve(u, params=params).value
    assert np.all(np.diff(v) <= 1e-7)


def test_sandwich(params):
    u = np.linspace(0.0, 30.0, 61)
    sqf = inversion.ccdf_curve(u, params=params).value
    hol = inversion.ccdf_curve(u, params=params,
                               transform=inversion.hol_ccdf_transform(params)).value
    low = metrics.hol_priority_ccdf(u, params)
    assert np.all(low <= sqf + 1e-9) and np.all(sqf <= hol + 1e-9)


def test_tail_ratio_heavy_load(p18):
    law = metrics.sqf_tail_law(p18)
    u = np.linspace(30, 70, 41)
    v = inversion.ccdf_curve(u, params=p18).value
    window = (v >= 1e-6) & (v <= 1e-3)
    assert window.sum() > 10
    assert np.all(np.abs(v[window] / law.ccdf(u[window]) - 1) < 0.1)


def test_tail_ratio_light_load_approaches_slowly(p06):
    # at rho = 0.3 the ratio is still far below 1 in the same window but increasing
    law = metrics.sqf_tail_law(p06)
    u = np.linspace(3, 9, 13)
    v = inversion.ccdf_curve(u, params=p06).value
    ratio = v / law.ccdf(u)
    assert np.all(np.diff(ratio) > 0)
    assert ratio[-1] < 0.5


def test_nodes_in_right_half_plane():
    opts = InversionOptions()
    _, nodes = inversion._euler_nodes(np.array([0.01, 1.0, 100.0]), opts)
    assert np.all(nodes.real > 0)


def test_node_doubling(params):
    u = np.linspace(0.5, 30, 60)
    a = inversion.ccdf_curve(u, InversionOptions(node_count=64), params=params).value
    b = inversion.ccdf_curve(u, InversionOptions(node_count=128), params=params).value
    assert np.max(np.abs(a - b)) < 1e-8


def test_hol_talbot_cross_check(p18):
    u = np.array([1.0, 5.0, 10.0, 20.0])
    tr = inversion.hol_ccdf_transform(p18)
    e = inversion.invert_grid(u, tr)
    t = inversion.invert_grid(u, tr, InversionOptions(method=InversionMethod.TALBOT))
    assert t.valid.all()
    assert np.max(np.abs(e.value - t.value)) < 1e-5


def test_talbot_on_sqf_is_guarded(p18):
    res = inversion.ccdf_curve([5.0], InversionOptions(method="FixedTalbot"), params=p18)
    assert not res.valid[0]
    assert np.isnan(res.value[0]) and "contour node" in res.diagnostics[0]
    with pytest.raises(InversionError) as exc:
        inversion.invert_ccdf(5.0, opts=InversionOptions(method="FixedTalbot"), params=p18)
    assert exc.value.diagnostics["nodes"]


def test_invert_ccdf_scalar(p18):
    assert inversion.invert_ccdf(10.0, params=p18) == pytest.approx(CURVE_09[10.0], abs=1e-8)
    with pytest.raises(ValueError):
        inversion.invert_ccdf(0.0, params=p18)
    with pytest.raises(ValueError):
        inversion.invert_ccdf(1.0)


def test_rows_and_bad_grid(p18):
    res = inversion.ccdf_curve([1.0, 2.0], params=p18)
    assert [r[0] for r in res.rows()] == [1.0, 2.0]
    with pytest.raises(ValueError):
        inversion.ccdf_curve([-1.0], params=p18)


def test_zero_without_atom():
    res = inversion.invert_grid([0.0, 1.0], lambda s: 1.0 / (1.0 + s))
    assert not res.valid[0] and res.valid[1]
