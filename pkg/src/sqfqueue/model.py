"""Rate parameters and the closed-form constants derived from them.

The symmetric system has total arrival rate ``lam`` split evenly between two
queues, each fed with exponential jobs of rate ``mu``. Every constant the
analytic layers need (load, M/M/1 decay rate, branch points of the quadratic
discriminant, the limiting ratio of the series) is computed once here.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .exceptions import ParameterError

#: relative tolerance used to decide that a load sits exactly at one half
CRITICAL_RTOL = 1e-12


class Regime(str, enum.Enum):
    SUPERCRITICAL = "Supercritical"
    CRITICAL = "Critical"
    SUBCRITICAL = "Subcritical"


def _positive_real(name, value):
    if isinstance(value, bool):
        raise ParameterError(f"{name} must be a real number, got {value!r}")
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ParameterError(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(x) or x <= 0.0:
        raise ParameterError(f"{name} must be finite and > 0, got {value!r}")
    return x


def classify_regime(rho: float) -> Regime:
    """Regime of the tail law; loads within 1e-12 (relative) of 1/2 are critical."""
    if abs(rho - 0.5) <= CRITICAL_RTOL * 0.5:
        return Regime.CRITICAL
    return Regime.SUPERCRITICAL if rho > 0.5 else Regime.SUBCRITICAL


@dataclass(frozen=True)
class SymmetricParams:
    """Validated symmetric rates with all derived constants.

    ``lam`` is the *total* arrival rate; each queue receives ``lam/2``.
    """

    lam: float
    mu: float
    rho: float = field(init=False)
    sigma0: float = field(init=False)
    zeta_minus: float = field(init=False)
    zeta_plus: float = field(init=False)
    s_tilde: float = field(init=False)
    r_ratio: float = field(init=False)
    regime: Regime = field(init=False)

    def __post_init__(self):
        lam, mu = self.lam, self.mu
        rho = lam / mu
        half = lam / 2.0
        # closed forms of the two real zeros of the quadratic discriminant
        a_hi = (math.sqrt(mu) + math.sqrt(half)) ** 2
        a_lo = (math.sqrt(mu) - math.sqrt(half)) ** 2
        zeta_minus = -mu * a_hi / (half + a_hi)
        zeta_plus = -mu * a_lo / (half + a_lo)
        root = math.hypot(lam, mu)
        r_ratio = (lam + mu - root) / (lam + mu + root)
        regime = classify_regime(rho)
        sigma0 = -mu * (1.0 - rho)
        s_tilde = sigma0 if regime is not Regime.SUBCRITICAL else zeta_plus
        for name, val in (("rho", rho), ("sigma0", sigma0), ("zeta_minus", zeta_minus),
                          ("zeta_plus", zeta_plus), ("s_tilde", s_tilde),
                          ("r_ratio", r_ratio), ("regime", regime)):
            object.__setattr__(self, name, val)

    @property
    def lam_half(self) -> float:
        return self.lam / 2.0

    def disc(self, s):
        """Discriminant D(s) of the quadratic whose roots are xi+-(s)."""
        lam, mu = self.lam, self.mu
        b = mu * mu - lam * mu / 2.0 + (mu - lam) * s
        return b * b + 2.0 * lam * mu * s * (s + mu)

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam, "mu": self.mu, "rho": self.rho, "sigma0": self.sigma0,
            "zeta_minus": self.zeta_minus, "zeta_plus": self.zeta_plus,
            "s_tilde": self.s_tilde, "r_ratio": self.r_ratio, "regime": self.regime.value,
        }

    def general(self) -> "GeneralParams":
        return validate_general(self.lam_half, self.lam_half, self.mu, self.mu)


@dataclass(frozen=True)
class GeneralParams:
    """Possibly asymmetric rates; only the simulator consumes the asymmetric case."""

    lambda1: float
    lambda2: float
    mu1: float
    mu2: float
    rho1: float = field(init=False)
    rho2: float = field(init=False)
    rho: float = field(init=False)

    def __post_init__(self):
        rho1 = self.lambda1 / self.mu1
        rho2 = self.lambda2 / self.mu2
        object.__setattr__(self, "rho1", rho1)
        object.__setattr__(self, "rho2", rho2)
        object.__setattr__(self, "rho", rho1 + rho2)

    @property
    def lam(self) -> float:
        return self.lambda1 + self.lambda2

    @property
    def is_symmetric(self) -> bool:
        return self.lambda1 == self.lambda2 and self.mu1 == self.mu2


def validate_symmetric(lam, mu) -> SymmetricParams:
    """Check ``0 < lam < mu`` and build the derived constants."""
    lam = _positive_real("lambda", lam)
    mu = _positive_real("mu", mu)
    if lam >= mu:
        raise ParameterError(f"unstable: rho = lambda/mu = {lam / mu:.17g} >= 1")
    return SymmetricParams(lam, mu)


def validate_general(lambda1, lambda2, mu1, mu2) -> GeneralParams:
    """Check non-negative arrival rates, positive service rates and total load < 1."""
    rates = []
    for name, val in (("lambda1", lambda1), ("lambda2", lambda2)):
        if isinstance(val, bool):
            raise ParameterError(f"{name} must be a real number, got {val!r}")
        try:
            x = float(val)
        except (TypeError, ValueError):
            raise ParameterError(f"{name} must be a real number, got {val!r}") from None
        if not math.isfinite(x) or x < 0.0:
            raise ParameterError(f"{name} must be finite and >= 0, got {val!r}")
        rates.append(x)
    if rates[0] + rates[1] <= 0.0:
        raise ParameterError("at least one arrival rate must be positive")
    m1 = _positive_real("mu1", mu1)
    m2 = _positive_real("mu2", mu2)
    gp = GeneralParams(rates[0], rates[1], m1, m2)
    if gp.rho >= 1.0:
        raise ParameterError(f"unstable: rho = rho1 + rho2 = {gp.rho:.17g} >= 1")
    return gp
