import pytest

from sqfqueue import cli, solver, validation
from sqfqueue.model import SymmetricParams


@pytest.fixture
def corrupted_q(monkeypatch):
    original = solver._series_factors

    def flipped(z, alpha, params):
        q, L, h = original(z, alpha, params)
        return -q, L, h

    solver.g_zero.cache_clear()
    monkeypatch.setattr(solver, "_series_factors", flipped)
    yield
    solver.g_zero.cache_clear()


def test_quick_battery_passes(params):
    checks = validation.run_battery(params, "quick")
    assert len(checks) == 8
    failed = [(c.name, c.value, c.detail) for c in checks if not c.passed]
    assert not failed


def test_full_battery_passes():
    checks = validation.run_battery(SymmetricParams(1.8, 2.0), "full", seed=0)
    assert [c.name for c in checks][-3:] == ["sim_empty_probabilities", "sim_total_workload",
                                             "sim_sandwich"]
    assert all(c.passed for c in checks), [c for c in checks if not c.passed]


def test_bad_level():
    with pytest.raises(ValueError):
        validation.run_battery(SymmetricParams(1.2, 2.0), "thorough")


def test_corrupted_q_fails_functional_equation(corrupted_q):
    checks = {c.name: c for c in validation.run_battery(SymmetricParams(1.2, 2.0), "quick")}
    assert not checks["functional_equation"].passed
    assert checks["functional_equation"].value > 1e-3


def test_corrupted_q_makes_validate_exit_5(corrupted_q):
    res, rc, _, err = cli.run(["validate"])
    assert rc == 5
    assert "functional_equation" in res.outputs["failed"]
    assert "functional_equation" in err


def test_check_wrapper_catches_numeric_errors():
    def boom():
        raise ZeroDivisionError("x")
    r = validation._check("boom", 1.0, boom)
    assert not r.passed and r.value == float("inf") and "ZeroDivisionError" in r.detail
    r = validation._check("nan", 1.0, lambda: (float("nan"), ""))
    assert not r.passed
