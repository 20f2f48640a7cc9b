"""Empty-queue probabilities, tail laws and the head-of-line baselines.

Tail laws have the form ``P(U1 > u) ~ prefactor * u**power * exp(rate * u)``.
Their constants come from the dominant singularity of the transform through
the Tauberian correspondence: a simple pole ``c / (s - a)`` of the CCDF
transform gives ``c e^{a u}``, a term ``c (s - a)^{1/2}`` gives
``c u^{-3/2} e^{a u} / Gamma(-1/2)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import algebra, solver
from .exceptions import SQFError
from .model import Regime, SymmetricParams


@dataclass(frozen=True)
class TailLaw:
    regime: Regime
    rate: float
    power: float
    prefactor: float

    def ccdf(self, u):
        u = np.asarray(u, dtype=float)
        return self.prefactor * u ** self.power * np.exp(self.rate * u)

    def as_dict(self):
        return {"regime": self.regime.value, "rate": self.rate, "power": self.power,
                "prefactor": self.prefactor}


class SingularityKind(str, enum.Enum):
    SIMPLE_POLE = "SimplePole"
    ALGEBRAIC_ORDER_HALF = "AlgebraicOrderHalf"
    ALGEBRAIC_ORDER_MINUS_HALF = "AlgebraicOrderMinusHalf"


@dataclass(frozen=True)
class SingularityReport:
    location: float
    kind: SingularityKind
    leading_coeff: float

    def as_dict(self):
        return {"location": self.location, "kind": self.kind.value,
                "leading_coeff": self.leading_coeff}


@dataclass(frozen=True)
class Extrapolation:
    """Richardson estimate of a limit with the spread of its last two entries."""

    value: float
    spread: float
    samples: tuple


# ---------------------------------------------------------------------------
# empty queue
# ---------------------------------------------------------------------------

def empty_queue_probability(params: SymmetricParams):
    """(G(0), P(U1 = 0)) with P(U1 = 0) = 1 - rho + G(0)."""
    g0 = solver.g_zero(params)
    return g0, 1.0 - params.rho + g0


def hol_empty_prob(params: SymmetricParams) -> float:
    """Empty probability of the queue holding priority: 1 - rho/2."""
    return 1.0 - params.rho / 2.0


# ---------------------------------------------------------------------------
# constants at the branch point zeta+
# ---------------------------------------------------------------------------

def branch_value(params: SymmetricParams) -> float:
    """a+ = xi+(zeta+) = -mu + sqrt(lam mu / 2), the double root at the branch point."""
    return -params.mu + math.sqrt(params.lam * params.mu / 2.0)


def branch_sqrt_coefficient(params: SymmetricParams) -> float:
    """E0 with xi+(s) = a+ + E0 sqrt(s - zeta+) + O(s - zeta+)."""
    lam, mu = params.lam, params.mu
    zp, zm = params.zeta_plus, params.zeta_minus
    return math.sqrt((lam * lam + mu * mu) * (zp - zm)) / (2.0 * (mu + zp))


def sqrt_coefficient(params: SymmetricParams, chain_rule: bool = True) -> float:
    """r+ with G(s) = G(zeta+) + r+ sqrt(s - zeta+) + O(s - zeta+).

    Obtained by differentiating the xi+ expression of G in xi+ at the branch
    point. Both xi+ and the argument (s + xi+)/2 of M move like a square root,
    so the dM/dz contribution belongs to the coefficient. ``chain_rule=False``
    drops it (M frozen at its branch-point value), which is only useful for
    comparison.
    """
    lam, mu, rho = params.lam, params.mu, params.rho
    zp = params.zeta_plus
    a = branch_value(params)
    z_plus = 0.5 * (zp + a)
    m = solver.m_series(z_plus, params).value.real
    bracket = zp * (1.0 - rho) / (zp - a) ** 2 - mu * m / (mu + a) ** 2
    if chain_rule:
        bracket += mu * solver.m_derivative(z_plus, params) / (2.0 * (mu + a))
    return lam * branch_sqrt_coefficient(params) / (2.0 * (zp + mu)) * bracket


def g_at_branch_point(params: SymmetricParams) -> float:
    """G(zeta+), the finite value at the square-root singularity."""
    lam, mu, rho = params.lam, params.mu, params.rho
    zp = params.zeta_plus
    a = branch_value(params)
    m = solver.m_series(0.5 * (zp + a), params).value.real
    return lam / (2.0 * (zp + mu)) * (zp * (1.0 - rho) / (zp - a) + mu / (mu + a) * m)


def pole_residue(params: SymmetricParams) -> float:
    """r0 = mu (1 - rho)(2 rho - 1) / 4, the residue of G at sigma0 for rho > 1/2."""
    rho = params.rho
    return params.mu * (1.0 - rho) * (2.0 * rho - 1.0) / 4.0


# ---------------------------------------------------------------------------
# tail laws
# ---------------------------------------------------------------------------

def sqf_tail_law(params: SymmetricParams) -> TailLaw:
    """Tail of the workload of one queue under shortest-queue-first service."""
    rho, mu = params.rho, params.mu
    if params.regime is Regime.SUPERCRITICAL:
        return TailLaw(params.regime, params.sigma0, 0.0, rho - 0.5)
    if params.regime is Regime.CRITICAL:
        return TailLaw(params.regime, -mu / 2.0, -0.5, 1.0 / math.sqrt(2.0 * math.pi * mu))
    zp = params.zeta_plus
    kappa = (zp + mu) * sqrt_coefficient(params) / (zp * params.lam * math.sqrt(math.pi))
    return TailLaw(params.regime, zp, -1.5, kappa)


def hol_tail_law(params: SymmetricParams) -> TailLaw:
    """Tail of the low-priority workload under preemptive head-of-line priority.

    Prefactors follow from the dominant singularity of ``hol_transform``:
    the pole at sigma0 (rho > 1/2) gives 2 rho - 1; the square-root branch
    point gives (1 - rho)(zeta+ + mu) E0 / (lam sqrt(pi) (zeta+ - a+)^2); at
    rho = 1/2 the two merge into an inverse square root with prefactor
    sqrt(2 / (pi mu)).
    """
    rho, mu, lam = params.rho, params.mu, params.lam
    if params.regime is Regime.SUPERCRITICAL:
        return TailLaw(params.regime, params.sigma0, 0.0, 2.0 * rho - 1.0)
    if params.regime is Regime.CRITICAL:
        return TailLaw(params.regime, -mu / 2.0, -0.5, math.sqrt(2.0 / (math.pi * mu)))
    zp = params.zeta_plus
    a = branch_value(params)
    pref = ((1.0 - rho) * (zp + mu) * branch_sqrt_coefficient(params)
            / (lam * math.sqrt(math.pi) * (zp - a) ** 2))
    return TailLaw(params.regime, zp, -1.5, pref)


def g_singularity(params: SymmetricParams) -> SingularityReport:
    """Dominant singularity of G: pole at sigma0 (rho > 1/2) or branch point zeta+ (rho < 1/2)."""
    if params.regime is Regime.CRITICAL:
        raise SQFError("at rho = 1/2 the pole and the branch point merge; use sqf_tail_law")
    if params.regime is Regime.SUPERCRITICAL:
        return SingularityReport(params.sigma0, SingularityKind.SIMPLE_POLE, pole_residue(params))
    return SingularityReport(params.zeta_plus, SingularityKind.ALGEBRAIC_ORDER_HALF,
                             sqrt_coefficient(params))


# ---------------------------------------------------------------------------
# numerical extrapolation of the leading coefficients
# ---------------------------------------------------------------------------

def richardson(values, ratio: float) -> Extrapolation:
    """Richardson table for samples f(t_k), t_{k+1} = t_k / ratio, f = f0 + c1 t + c2 t^2 + ...

    Returns the last diagonal entry and its distance to the previous one.
    """
    row = [float(v) for v in values]
    diag = [row[-1]]
    p = ratio
    while len(row) > 1:
        row = [(p * row[i + 1] - row[i]) / (p - 1.0) for i in range(len(row) - 1)]
        diag.append(row[-1])
        p *= ratio
    spread = abs(diag[-1] - diag[-2]) if len(diag) > 1 else float("inf")
    return Extrapolation(diag[-1], spread, tuple(float(v) for v in values))


def extrapolate_residue(params: SymmetricParams, ks=(2, 3, 4, 5, 6)) -> Extrapolation:
    """Limit of (s - sigma0) G(s) as s decreases to sigma0, sampled at sigma0 + 10^-k."""
    s = np.array([params.sigma0 + 10.0 ** (-k) for k in ks])
    g, ok = solver.g_values(s, params)
    if not ok.all():
        raise SQFError("G could not be evaluated next to sigma0")
    return richardson(((s - params.sigma0) * g).real, 10.0)


def extrapolate_sqrt_coefficient(params: SymmetricParams, ks=(2, 4, 6, 8)) -> Extrapolation:
    """Limit of (G(s) - G(zeta+)) / sqrt(s - zeta+) along s = zeta+ + 10^-k.

    The samples are a power series in sqrt(s - zeta+); with k in steps of two
    the Richardson ratio is 10.
    """
    ks = tuple(ks)
    steps = [ks[i + 1] - ks[i] for i in range(len(ks) - 1)]
    if len(set(steps)) > 1:
        raise ValueError("exponents must be evenly spaced")
    s = np.array([params.zeta_plus + 10.0 ** (-k) for k in ks])
    g, ok = solver.g_values(s, params)
    if not ok.all():
        raise SQFError("G could not be evaluated next to zeta+")
    g0 = g_at_branch_point(params)
    samples = ((g - g0) / np.sqrt(s - params.zeta_plus)).real
    return richardson(samples, 10.0 ** (steps[0] / 2.0) if steps else 10.0)


# ---------------------------------------------------------------------------
# head-of-line baselines and the M/M/1 total workload
# ---------------------------------------------------------------------------

def hol_transform(s, params: SymmetricParams):
    """E[exp(-s U)] for the low-priority workload under head-of-line priority.

    2 (1 - rho)(s + mu) xi+(s) / (lam (s - xi+(s))), with xi+ = c s to keep
    the s -> 0 limit finite. Accepts scalars or arrays.
    """
    scalar = np.isscalar(s)
    sa = np.asarray(s, dtype=complex)
    lam, mu, rho = params.lam, params.mu, params.rho
    with np.errstate(all="ignore"):
        xm, _ = algebra.xi_branches(sa, params)
        c = -lam * mu / (2.0 * (sa + mu) * xm)
        val = 2.0 * (1.0 - rho) * (sa + mu) * c / (lam * (1.0 - c))
    if scalar:
        if algebra.on_xi_cut(complex(s), params):
            raise algebra.CutError(f"s = {s!r} lies on the cut")
        return complex(val)
    return val


def hol_priority_ccdf(u, params: SymmetricParams):
    """CCDF of the high-priority workload: an M/M/1 queue at load rho/2."""
    u = np.asarray(u, dtype=float)
    r = params.rho / 2.0
    return r * np.exp(-params.mu * (1.0 - r) * u)


def mm1_total_ccdf(u, params: SymmetricParams):
    """P(U1 + U2 > u) = rho exp(sigma0 u); the total workload is an M/M/1 workload."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("u must be >= 0")
    out = params.rho * np.exp(params.sigma0 * u)
    return float(out) if out.ndim == 0 else out
