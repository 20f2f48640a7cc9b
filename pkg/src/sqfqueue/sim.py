"""Regenerative simulation of the two-queue fluid workload process.

Jobs arrive in one Poisson stream and join queue 1 with probability
``lambda1 / (lambda1 + lambda2)``. A single unit-rate server drains one queue
at a time: the nonempty queue with the smaller workload (shortest queue
first, ties to queue 1) or a fixed priority order. Between arrivals the
dynamics are piecewise linear, so every time average is integrated exactly
over each linear phase.

Cycles start at arrivals to an empty system. Since all policies conserve
work, cycle boundaries do not depend on the policy, and runs sharing a seed
see identical cycles (common random numbers). Each estimate is a ratio of
cycle sums with a 99% normal-approximation half-width.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .exceptions import SimulationError
from .model import GeneralParams, validate_general

Z99 = 2.5758293035489004
BLOCK = 1 << 16

# accumulator layout: fixed metrics first, then the ccdf and transform grids
_E1, _E2, _EB, _S1, _S2, _LE, _MU1, _MU2 = range(8)
_NFIXED = 8


class Policy(str, enum.Enum):
    SQF = "SQF"
    HOL_PRIORITY_1 = "HOL_PRIORITY_1"
    HOL_PRIORITY_2 = "HOL_PRIORITY_2"


_POLICY_CODE = {Policy.SQF: 0, Policy.HOL_PRIORITY_1: 1, Policy.HOL_PRIORITY_2: 2}


@dataclass(frozen=True)
class ServiceLaw:
    """Job-size law. HyperExp2 mixes exponentials with means m1 (prob p) and m2."""

    kind: str = "Exponential"
    p: float = 0.0
    m1: float = 0.0
    m2: float = 0.0

    KINDS = ("Exponential", "Deterministic", "HyperExp2")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise SimulationError(f"unknown service law {self.kind!r}")
        if self.kind == "HyperExp2":
            if not (0.0 < self.p < 1.0) or self.m1 <= 0 or self.m2 <= 0:
                raise SimulationError("HyperExp2 needs 0 < p < 1 and positive means")

    @classmethod
    def parse(cls, text: str) -> "ServiceLaw":
        """'Exponential', 'Deterministic' or 'HyperExp2(p, m1, m2)'."""
        t = str(text).strip()
        if t in ("Exponential", "Deterministic"):
            return cls(t)
        if t.startswith("HyperExp2(") and t.endswith(")"):
            try:
                p, m1, m2 = (float(x) for x in t[len("HyperExp2("):-1].split(","))
            except ValueError:
                raise SimulationError(f"cannot parse service law {text!r}") from None
            return cls("HyperExp2", p, m1, m2)
        raise SimulationError(f"cannot parse service law {text!r}")

    def __str__(self):
        if self.kind == "HyperExp2":
            return f"HyperExp2({self.p!r},{self.m1!r},{self.m2!r})"
        return self.kind

    def mean(self, mu: float) -> float:
        return self.p * self.m1 + (1.0 - self.p) * self.m2 if self.kind == "HyperExp2" else 1.0 / mu

    def sample(self, gen: np.random.Generator, mu: float, n: int) -> np.ndarray:
        if self.kind == "Exponential":
            return gen.exponential(1.0 / mu, n)
        if self.kind == "Deterministic":
            return np.full(n, 1.0 / mu)
        pick = gen.random(n) < self.p
        return gen.exponential(1.0, n) * np.where(pick, self.m1, self.m2)


def _default_grid():
    return tuple(float(x) for x in np.arange(0.0, 40.5, 0.5))


@dataclass(frozen=True)
class SimConfig:
    params: GeneralParams
    policy: Policy = Policy.SQF
    service_law: tuple = (ServiceLaw(), ServiceLaw())
    cycles: int = 100_000
    seed: int = 0
    ccdf_grid: tuple = field(default_factory=_default_grid)
    laplace_grid: tuple = ()
    replications: int = 1
    target_half_width: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "policy", Policy(self.policy))
        laws = self.service_law
        if isinstance(laws, (ServiceLaw, str)):
            laws = (laws, laws)
        laws = tuple(ServiceLaw.parse(x) if isinstance(x, str) else x for x in laws)
        if len(laws) != 2:
            raise SimulationError("service_law needs one law per queue")
        object.__setattr__(self, "service_law", laws)
        p = self.params
        if not isinstance(p, GeneralParams):
            raise SimulationError("params must be GeneralParams")
        for law, mu, name in ((laws[0], p.mu1, "queue 1"), (laws[1], p.mu2, "queue 2")):
            if abs(law.mean(mu) * mu - 1.0) > 1e-9:
                raise SimulationError(f"{name}: service law mean {law.mean(mu)!r} differs from 1/mu")
        if int(self.cycles) != self.cycles or self.cycles < 100:
            raise SimulationError("cycles must be an integer >= 100")
        if int(self.replications) != self.replications or self.replications < 1:
            raise SimulationError("replications must be a positive integer")
        if self.cycles // self.replications < 100:
            raise SimulationError("each replication needs at least 100 cycles")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise SimulationError("seed must be a 64-bit unsigned integer")
        grid = tuple(float(u) for u in self.ccdf_grid)
        if any(not math.isfinite(u) or u < 0 for u in grid):
            raise SimulationError("ccdf_grid values must be finite and >= 0")
        object.__setattr__(self, "ccdf_grid", grid)
        lap = tuple(float(s) for s in self.laplace_grid)
        if any(not math.isfinite(s) or s <= 0 for s in lap):
            raise SimulationError("laplace_grid values must be finite and > 0")
        object.__setattr__(self, "laplace_grid", lap)
        if self.target_half_width is not None and not self.target_half_width > 0:
            raise SimulationError("target_half_width must be > 0")


@dataclass(frozen=True)
class Estimate:
    point: float
    half_width_99: float
    cycles: int

    def contains(self, value: float) -> bool:
        return abs(self.point - value) <= self.half_width_99

    def as_dict(self):
        return {"point": self.point, "half_width_99": self.half_width_99, "cycles": self.cycles}


@dataclass(frozen=True)
class SimOutput:
    p_empty_1: Estimate
    p_empty_2: Estimate
    p_empty_both: Estimate
    frac_serving_1: Estimate
    frac_serving_2: Estimate
    p_le: Estimate
    mean_u1: Estimate
    mean_u2: Estimate
    ccdf_1: tuple
    ccdf_total: tuple
    ccdf_grid: tuple
    laplace_1: tuple = ()
    laplace_grid: tuple = ()
    cycles: int = 0
    arrivals: int = 0
    ties: int = 0
    converged: bool = True
    achieved_half_width: float = float("nan")
    replicates: tuple = field(default=(), repr=False)

    SCALARS = ("p_empty_1", "p_empty_2", "p_empty_both", "frac_serving_1", "frac_serving_2",
               "p_le", "mean_u1", "mean_u2")


# ---------------------------------------------------------------------------
# event kernel
# ---------------------------------------------------------------------------

@numba.njit(cache=True)
def _serve_choice(u1, u2, policy):
    if policy == 0:
        if u1 > 0.0 and (u2 <= 0.0 or u1 <= u2):
            return 1
        return 2
    if policy == 1:
        return 1 if u1 > 0.0 else 2
    return 2 if u2 > 0.0 else 1


@numba.njit(cache=True)
def _advance(state, acc, grid, sgrid, policy, tau, trace, counters):
    """Let the system run for ``tau`` time units without arrivals."""
    ng = grid.shape[0]
    ns = sgrid.shape[0]
    u1 = state[0]
    u2 = state[1]
    rem = tau
    while rem > 0.0:
        if u1 <= 0.0 and u2 <= 0.0:
            acc[_E1] += rem
            acc[_E2] += rem
            acc[_EB] += rem
            acc[_LE] += rem
            for j in range(ns):
                acc[_NFIXED + 2 * ng + j] += rem
            if counters[2] < trace.shape[0]:
                k = counters[2]
                trace[k, 0] = state[3]
                trace[k, 1] = rem
                trace[k, 2] = 0.0
                trace[k, 3] = 0.0
                trace[k, 4] = 0.0
                trace[k, 5] = 0.0
                trace[k, 6] = 0.0
                counters[2] += 1
            state[3] += rem
            break
        serve = _serve_choice(u1, u2, policy)
        a = u1 if serve == 1 else u2
        b = u2 if serve == 1 else u1
        dt = rem if rem < a else a
        tot = u1 + u2
        if serve == 1:
            acc[_S1] += dt
            if b <= 0.0:
                acc[_E2] += dt
            over = u1 - u2
            acc[_LE] += dt - min(max(over, 0.0), dt)
            acc[_MU1] += (u1 - 0.5 * dt) * dt
            acc[_MU2] += u2 * dt
            for j in range(ng):
                acc[_NFIXED + j] += min(max(u1 - grid[j], 0.0), dt)
            for j in range(ns):
                s = sgrid[j]
                acc[_NFIXED + 2 * ng + j] += (math.exp(-s * (u1 - dt)) - math.exp(-s * u1)) / s
        else:
            acc[_S2] += dt
            if b <= 0.0:
                acc[_E1] += dt
            acc[_LE] += min(max(u2 - u1, 0.0), dt)
            acc[_MU1] += u1 * dt
            acc[_MU2] += (u2 - 0.5 * dt) * dt
            for j in range(ng):
                if u1 > grid[j]:
                    acc[_NFIXED + j] += dt
            for j in range(ns):
                acc[_NFIXED + 2 * ng + j] += math.exp(-sgrid[j] * u1) * dt
        for j in range(ng):
            acc[_NFIXED + ng + j] += min(max(tot - grid[j], 0.0), dt)
        n1 = u1
        n2 = u2
        if serve == 1:
            n1 = u1 - dt if dt < u1 else 0.0
        else:
            n2 = u2 - dt if dt < u2 else 0.0
        if counters[2] < trace.shape[0]:
            k = counters[2]
            trace[k, 0] = state[3]
            trace[k, 1] = dt
            trace[k, 2] = serve
            trace[k, 3] = u1
            trace[k, 4] = u2
            trace[k, 5] = n1
            trace[k, 6] = n2
            counters[2] += 1
        state[3] += dt
        u1 = n1
        u2 = n2
        rem -= dt
    state[0] = u1
    state[1] = u2


@numba.njit(cache=True)
def _run_block(inter, to1, size, state, counters, acc, sums, grid, sgrid, policy, max_cycles,
               trace):
    """Consume arrivals until the block ends or ``max_cycles`` cycles are closed.

    state: [u1, u2, cycle_time, absolute_time]
    counters: [cycles, ties, trace_len, arrivals, started]
    sums: rows SY, SY2, SXY over metrics, plus [SX, SX2] in the last row.
    """
    nm = acc.shape[0]
    n = inter.shape[0]
    for i in range(n):
        tau = inter[i]
        if counters[4] == 0:
            # initial idle period before the first arrival is not part of any cycle
            state[3] += tau
            counters[4] = 1
        else:
            _advance(state, acc, grid, sgrid, policy, tau, trace, counters)
            state[2] += tau
            if state[0] <= 0.0 and state[1] <= 0.0:
                x = state[2]
                for j in range(nm):
                    y = acc[j]
                    sums[0, j] += y
                    sums[1, j] += y * y
                    sums[2, j] += x * y
                    acc[j] = 0.0
                sums[3, 0] += x
                sums[3, 1] += x * x
                state[2] = 0.0
                counters[0] += 1
                if counters[0] >= max_cycles:
                    return i
        if to1[i]:
            state[0] += size[i]
        else:
            state[1] += size[i]
        counters[3] += 1
        if counters[2] < trace.shape[0]:
            k = counters[2]
            trace[k, 0] = state[3]
            trace[k, 1] = 0.0
            trace[k, 2] = -1.0
            trace[k, 3] = state[0] - (size[i] if to1[i] else 0.0)
            trace[k, 4] = state[1] - (0.0 if to1[i] else size[i])
            trace[k, 5] = state[0]
            trace[k, 6] = state[1]
            counters[2] += 1
        if state[0] == state[1] and state[0] > 0.0:
            counters[1] += 1
    return n


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------

def _replication_sums(config: SimConfig, seed_seq: np.random.SeedSequence, cycles: int,
                      trace_rows: int = 0):
    p = config.params
    gen = np.random.Generator(np.random.Philox(seed_seq))
    grid = np.asarray(config.ccdf_grid, dtype=float)
    sgrid = np.asarray(config.laplace_grid, dtype=float)
    nm = _NFIXED + 2 * grid.size + sgrid.size
    acc = np.zeros(nm)
    sums = np.zeros((4, max(nm, 2)))
    state = np.zeros(4)
    counters = np.zeros(5, dtype=np.int64)
    trace = np.zeros((trace_rows, 7))
    lam = p.lam
    frac1 = p.lambda1 / lam
    law1, law2 = config.service_law
    policy = _POLICY_CODE[config.policy]
    while counters[0] < cycles:
        inter = gen.exponential(1.0 / lam, BLOCK)
        to1 = gen.random(BLOCK) < frac1
        s1 = law1.sample(gen, p.mu1, BLOCK)
        s2 = law2.sample(gen, p.mu2, BLOCK)
        size = np.where(to1, s1, s2)
        _run_block(inter, to1, size, state, counters, acc, sums, grid, sgrid, policy,
                   cycles, trace)
        if trace_rows and counters[2] >= trace_rows and counters[0] == 0:
            break
    return sums[:, :nm], counters, trace[: counters[2]]


def _estimates(sums, n):
    sy, sy2, sxy = sums[0], sums[1], sums[2]
    sx, sx2 = sums[3, 0], sums[3, 1]
    with np.errstate(all="ignore"):
        r = sy / sx
        var = (sy2 - 2.0 * r * sxy + r * r * sx2) / (n - 1)
        hw = Z99 * np.sqrt(np.maximum(var, 0.0) / n) / (sx / n)
    return r, hw


def _output(config: SimConfig, sums, counters_list, replicates=()):
    n = int(sum(c[0] for c in counters_list))
    r, hw = _estimates(sums, n)
    ng = len(config.ccdf_grid)
    ns = len(config.laplace_grid)
    est = [Estimate(float(r[j]), float(hw[j]), n) for j in range(r.size)]
    probs = [est[j].half_width_99 for j in range(_NFIXED) if j not in (_MU1, _MU2)]
    achieved = float(max(probs))
    converged = bool(np.all(np.isfinite(hw)))
    if config.target_half_width is not None:
        converged = converged and achieved <= config.target_half_width
    return SimOutput(
        est[_E1], est[_E2], est[_EB], est[_S1], est[_S2], est[_LE], est[_MU1], est[_MU2],
        tuple(est[_NFIXED:_NFIXED + ng]), tuple(est[_NFIXED + ng:_NFIXED + 2 * ng]),
        config.ccdf_grid, tuple(est[_NFIXED + 2 * ng:_NFIXED + 2 * ng + ns]), config.laplace_grid,
        n, int(sum(c[3] for c in counters_list)), int(sum(c[1] for c in counters_list)),
        converged, achieved, tuple(replicates),
    )


def simulate(config: SimConfig) -> SimOutput:
    """Run the configured number of cycles, split over independent replications.

    Replication streams are spawned from ``config.seed``; pooled estimates
    use all cycles. With several replications each one's own output is kept
    in ``replicates``.
    """
    seeds = np.random.SeedSequence(int(config.seed)).spawn(config.replications)
    base, extra = divmod(config.cycles, config.replications)
    total = None
    counters_list = []
    reps = []
    for i, ss in enumerate(seeds):
        c = base + (1 if i < extra else 0)
        sums, counters, _ = _replication_sums(config, ss, c)
        total = sums.copy() if total is None else total + sums
        counters_list.append(counters)
        if config.replications > 1:
            reps.append(_output(replace(config, cycles=c, replications=1), sums, [counters]))
    return _output(config, total, counters_list, reps)


@dataclass(frozen=True)
class TraceRecord:
    """Phases of the sample path: arrivals have ``served == -1``, idle phases 0."""

    start: np.ndarray
    duration: np.ndarray
    served: np.ndarray
    u_before: np.ndarray
    u_after: np.ndarray
    ties: int


def trace(config: SimConfig, max_rows: int = 10_000) -> TraceRecord:
    """Record the first ``max_rows`` phases and arrivals of one replication."""
    ss = np.random.SeedSequence(int(config.seed)).spawn(1)[0]
    _, counters, rows = _replication_sums(config, ss, config.cycles, trace_rows=max_rows)
    return TraceRecord(rows[:, 0], rows[:, 1], rows[:, 2].astype(int), rows[:, 3:5], rows[:, 5:7],
                       int(counters[1]))


def symmetric_config(lam: float, mu: float, **kw) -> SimConfig:
    """SimConfig for total arrival rate ``lam`` split evenly, service rate ``mu``."""
    return SimConfig(validate_general(lam / 2.0, lam / 2.0, mu, mu), **kw)


# ---------------------------------------------------------------------------
# post-processing
# ---------------------------------------------------------------------------

def _points(values):
    return np.array([v.point if isinstance(v, Estimate) else float(v) for v in values])


def tail_slope(u, ccdf, window=(1e-5, 1e-2), fit_power: bool = True, min_points: int = 8):
    """Least-squares fit of log CCDF = c + rate u + power log u over the window.

    ``ccdf`` holds Estimate records or plain numbers aligned with ``u``. Only
    points with ``window[0] <= value <= window[1]`` and ``u > 0`` are used.
    Returns (rate, power); power is 0 when ``fit_power`` is False.
    """
    u = np.asarray(u, dtype=float)
    v = _points(ccdf)
    if u.shape != v.shape:
        raise ValueError("u and ccdf must have the same length")
    lo, hi = window
    sel = (v >= lo) & (v <= hi) & (u > 0) & np.isfinite(v)
    if sel.sum() < min_points:
        raise ValueError(f"only {int(sel.sum())} points inside the window {window}; "
                         f"need {min_points}")
    cols = [np.ones(sel.sum()), u[sel]]
    if fit_power:
        cols.append(np.log(u[sel]))
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), np.log(v[sel]), rcond=None)
    return float(coef[1]), float(coef[2]) if fit_power else 0.0


@dataclass(frozen=True)
class SandwichReport:
    ok: bool
    violations: tuple
    max_excess: float
    lower: SimOutput
    middle: SimOutput
    upper: SimOutput


def sandwich_compare(lower: SimOutput, middle: SimOutput, upper: SimOutput) -> SandwichReport:
    """Check CCDF(lower) <= CCDF(middle) <= CCDF(upper) pointwise up to the joint CI."""
    violations = []
    worst = -np.inf
    for k, u in enumerate(middle.ccdf_grid):
        for a, b, tag in ((lower.ccdf_1[k], middle.ccdf_1[k], "lower>middle"),
                          (middle.ccdf_1[k], upper.ccdf_1[k], "middle>upper")):
            excess = (a.point - b.point) - (a.half_width_99 + b.half_width_99)
            worst = max(worst, excess)
            if excess > 0:
                violations.append((u, tag, excess))
    return SandwichReport(not violations, tuple(violations), float(worst), lower, middle, upper)


def sandwich_check(config: SimConfig) -> SandwichReport:
    """Run priority-1, SQF and priority-2 with one seed and compare queue-1 CCDFs.

    Priority to queue 1 minimises its workload and priority to queue 2
    maximises it, so the SQF curve must sit between the two.
    """
    runs = {pol: simulate(replace(config, policy=pol)) for pol in Policy}
    return sandwich_compare(runs[Policy.HOL_PRIORITY_1], runs[Policy.SQF],
                            runs[Policy.HOL_PRIORITY_2])
