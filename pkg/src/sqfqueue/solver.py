"""Iterated-series solution of the symmetric functional equation.

For ``z`` in the half-plane right of ``eta1`` put ``s = z - alpha(z)``, so that
``xi_-(s) = z + alpha(z)`` and ``xi_+(s)`` follows from the product of roots.
With

    q(z) = (mu + xi_-) / (mu + xi_+)
    L(z) = (1 - rho) s (xi_+ - xi_-) / ((s - xi_+)(s - xi_-)) * (mu + xi_-) / mu
    h(z) = (s + xi_+) / 2

the auxiliary function solves ``M(z) = q(z) M(h(z)) + L(z)`` and is the sum
over the orbit ``z, h(z), h(h(z)), ...`` of ``prod_{l<k} q(h^l z) * L(h^k z)``.
Every Laplace transform of the stationary workload pair is built from M.

Array entry points (``m_values``, ``g_values``, ``marginal_values``) return
``(values, ok)`` and never raise on a single bad point; scalar entry points
raise with diagnostics.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from . import algebra
from .exceptions import CutError, PoleError, SeriesError
from .model import SymmetricParams

DEFAULT_TOL = 1e-14
MAX_TERMS = 200
#: radius of the circle used to evaluate through removable singularities
REMOVABLE_RADIUS = 1e-4


@dataclass(frozen=True)
class QLH:
    q: complex
    L: complex
    h: complex
    s: complex


@dataclass(frozen=True)
class SeriesEval:
    value: complex
    terms_used: int
    last_term: float
    remainder_bound: float
    converged: bool = True
    orbit: tuple = field(default=(), repr=False)
    q_products: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class GEval:
    """G(s) with both evaluation routes; a route is None where it does not apply."""

    value: complex
    route_a: complex | None
    route_b: complex | None
    discrepancy: float
    at: complex


# ---------------------------------------------------------------------------
# q, L, h
# ---------------------------------------------------------------------------

def qlh(z, params: SymmetricParams) -> QLH:
    """q, L, h at a single point, from the reference root continuation.

    Deliberately independent of the vectorised series kernel, so that the
    functional-equation residual checks the kernel rather than itself.
    """
    z = complex(z)
    eta1 = algebra.ramification_points(params).eta1
    if z.real <= eta1:
        raise SeriesError(f"z = {z!r} is left of eta1 = {eta1!r}")
    lam, mu, rho = params.lam, params.mu, params.rho
    alpha = algebra.cubic_roots(z, params).alpha
    s = z - alpha
    xm = z + alpha
    if s + mu == 0 or xm == 0:
        raise PoleError(f"xi+ has a pole at the companion point of z = {z!r}")
    c = -lam * mu / (2.0 * (s + mu) * xm)  # xi+ = c s
    xp = c * s
    if mu + xp == 0:
        raise PoleError(f"q has a pole at z = {z!r}")
    if c == 1 or s == xm:
        raise PoleError(f"L has a pole at z = {z!r}")
    q = (mu + xm) / (mu + xp)
    L = (1.0 - rho) / (1.0 - c) * (xp - xm) / (s - xm) * (mu + xm) / mu
    h = 0.5 * s * (1.0 + c)
    return QLH(q, L, h, s)


def _series_factors(z, alpha, params: SymmetricParams):
    """Vectorised (q, L, h) from z and alpha(z).

    Writing xi+ = c s with c = -lam mu / (2 (s + mu) xi-) removes the 0/0 of
    s / (s - xi+) at s = 0.
    """
    lam, mu, rho = params.lam, params.mu, params.rho
    s = z - alpha
    xm = z + alpha
    c = -lam * mu / (2.0 * (s + mu) * xm)
    xp = c * s
    q = (mu + xm) / (mu + xp)
    L = (1.0 - rho) / (1.0 - c) * (xp - xm) / (s - xm) * (mu + xm) / mu
    h = 0.5 * s * (1.0 + c)
    return q, L, h


def iterate_h(z, k_max: int, params: SymmetricParams) -> list:
    """The orbit [z, h(z), ..., h^k_max(z)].

    Raises SeriesError if an iterate leaves the half-plane right of eta1.
    """
    eta1 = algebra.ramification_points(params).eta1
    orbit = [complex(z)]
    for _ in range(k_max):
        cur = orbit[-1]
        if cur.real <= eta1:
            raise SeriesError(f"orbit left the domain at {cur!r}", {"orbit": orbit})
        orbit.append(qlh(cur, params).h)
    return orbit


# ---------------------------------------------------------------------------
# the series for M
# ---------------------------------------------------------------------------

def _advance_alpha(z_from, a_from, z_to, params):
    a, ok = algebra.track_alpha(z_from, a_from, z_to, params, steps=1)
    if not ok.all():
        bad = ~ok
        a2, ok2 = algebra.track_alpha(z_from[bad], a_from[bad], z_to[bad], params, steps=16)
        a[bad] = a2
        if not ok2.all():
            idx = np.flatnonzero(bad)[~ok2]
            a[idx] = algebra.alpha_branch(z_to[idx], params, strict=False)
    return a


def _m_core(z, params: SymmetricParams, tol=DEFAULT_TOL, max_terms=MAX_TERMS,
            fixed_terms=None, record=False):
    """Vectorised series. Returns a dict of flat arrays (and orbit records)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    n = z.size
    eta1 = algebra.ramification_points(params).eta1
    r = params.r_ratio
    total = np.zeros(n, dtype=complex)
    prod = np.ones(n, dtype=complex)
    terms = np.zeros(n, dtype=int)
    last = np.zeros(n)
    prev = np.full(n, np.nan)
    rate = np.full(n, r)
    converged = np.zeros(n, dtype=bool)
    failed = ~(np.isfinite(z) & (z.real > eta1))
    reason = np.where(failed, "domain", "").astype(object)
    active = ~failed
    zk = z.copy()
    ak = np.full(n, np.nan, dtype=complex)
    if active.any():
        ak[active] = algebra.alpha_branch(zk[active], params, strict=False)
    bad = active & ~np.isfinite(ak)
    failed |= bad
    reason[bad] = "continuation"
    active &= ~bad
    orbits = [[zz] for zz in z] if record else None
    qprods = [[1.0] for _ in z] if record else None
    cap = fixed_terms if fixed_terms is not None else max_terms
    with np.errstate(all="ignore"):
        for k in range(cap):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            q, L, h = _series_factors(zk[idx], ak[idx], params)
            term = prod[idx] * L
            total[idx] += term
            terms[idx] = k + 1
            mag = np.abs(term)
            prev[idx] = last[idx]
            last[idx] = mag
            if k >= 1:
                obs = np.where(prev[idx] > 0, mag / prev[idx], 0.0)
                rate[idx] = np.clip(np.maximum(r, obs), 0.0, 0.99)
            new_prod = prod[idx] * q
            finite = np.isfinite(total[idx]) & np.isfinite(new_prod) & np.isfinite(h)
            if fixed_terms is None:
                done = (mag <= tol * np.abs(total[idx])) & (np.abs(new_prod) < r + 0.1)
                # exact zero tail (can happen when L vanishes identically)
                done |= (mag == 0.0) & (np.abs(new_prod) < r + 0.1)
            else:
                done = np.full(idx.size, k + 1 == fixed_terms)
            done &= finite
            converged[idx[done]] = True
            nf = idx[~finite]
            failed[nf] = True
            reason[nf] = "nonfinite"
            cont = idx[~done & finite]
            prod[cont] = new_prod[~done & finite]
            h_cont = h[~done & finite]
            escaped = ~(h_cont.real > eta1)
            if escaped.any():
                e_idx = cont[escaped]
                failed[e_idx] = True
                reason[e_idx] = "domain"
            go = cont[~escaped]
            h_go = h_cont[~escaped]
            if go.size:
                ak[go] = _advance_alpha(zk[go], ak[go], h_go, params)
                zk[go] = h_go
                lost = go[~np.isfinite(ak[go])]
                failed[lost] = True
                reason[lost] = "continuation"
            if record:
                for j in go:
                    orbits[j].append(zk[j])
                    qprods[j].append(abs(prod[j]))
            active = ~(converged | failed)
    cap_hit = ~(converged | failed)
    reason[cap_hit] = "cap"
    bound = last * rate / (1.0 - rate)
    out = {
        "value": total, "terms": terms, "last": last, "bound": bound,
        "ok": converged & ~failed, "reason": reason,
    }
    if record:
        out["orbits"] = orbits
        out["qprods"] = qprods
    return out


def m_series(z, params: SymmetricParams, tol: float = DEFAULT_TOL, max_terms: int = MAX_TERMS,
             fixed_terms: int | None = None) -> SeriesEval:
    """M(z) by the iterated series at a single point.

    Stops once a term is below ``tol`` relative to the partial sum and the
    running q-product is below ``r_ratio + 0.1``. ``fixed_terms`` forces an
    exact truncation index instead. Raises SeriesError on cap or domain escape.
    """
    res = _m_core(complex(z), params, tol, max_terms, fixed_terms, record=True)
    diag = {"orbit": res["orbits"][0], "q_products": res["qprods"][0]}
    if not res["ok"][0]:
        why = res["reason"][0]
        msg = {
            "cap": f"series for M({z!r}) did not converge within {max_terms} terms",
            "domain": f"orbit of {z!r} left the half-plane right of eta1",
        }.get(why, f"series for M({z!r}) failed ({why})")
        raise SeriesError(msg, diag)
    return SeriesEval(
        complex(res["value"][0]), int(res["terms"][0]), float(res["last"][0]),
        float(res["bound"][0]), True, tuple(diag["orbit"]), tuple(diag["q_products"]),
    )


def m_values(z, params: SymmetricParams, tol: float = DEFAULT_TOL, max_terms: int = MAX_TERMS):
    """Vectorised M(z). Returns (values, ok) shaped like ``z``; failures are NaN."""
    z = np.asarray(z, dtype=complex)
    res = _m_core(z, params, tol, max_terms)
    val = np.where(res["ok"], res["value"], np.nan + 0j)
    return val.reshape(z.shape), res["ok"].reshape(z.shape)


@functools.lru_cache(maxsize=256)
def g_zero(params: SymmetricParams) -> float:
    """G(0) = P(U1 > 0, U2 = 0), equal to M at (lam - 2 mu)/4."""
    return m_series((params.lam - 2.0 * params.mu) / 4.0, params).value.real


# ---------------------------------------------------------------------------
# G, H, J, F0, F
# ---------------------------------------------------------------------------

def _g_prefactor(s, params):
    return params.lam / (2.0 * (s + params.mu))


def g_route_b(s, params: SymmetricParams):
    """G through xi+: valid on the whole half-plane right of s_tilde.

    Has the pole at sigma0 when rho > 1/2. Returns (values, ok).
    """
    s = np.asarray(s, dtype=complex)
    lam, mu, rho = params.lam, params.mu, params.rho
    with np.errstate(all="ignore"):
        xm, _ = algebra.xi_branches(s, params)
        c = -lam * mu / (2.0 * (s + mu) * xm)
        xp = c * s
        m, ok = m_values(0.5 * (s + xp), params)
        val = _g_prefactor(s, params) * ((1.0 - rho) / (1.0 - c) + mu / (mu + xp) * m)
    ok = ok & np.isfinite(val) & ~_on_cut_array(s, params)
    return np.where(ok, val, np.nan + 0j), ok


def g_route_a(s, params: SymmetricParams):
    """G through xi-: valid only where s is the companion point of (s + xi-(s))/2.

    Returns (values, ok); ok is False where the route does not apply.
    """
    s = np.asarray(s, dtype=complex)
    lam, mu, rho = params.lam, params.mu, params.rho
    eta1 = algebra.ramification_points(params).eta1
    with np.errstate(all="ignore"):
        xm, _ = algebra.xi_branches(s, params)
        z = 0.5 * (s + xm)
        inside = np.isfinite(z) & (z.real > eta1)
        alpha = np.full(z.shape, np.nan, dtype=complex)
        if inside.any():
            alpha[inside] = algebra.alpha_branch(z[inside], params, strict=False)
        same = np.abs(z - alpha - s) <= 1e-8 * (1.0 + np.abs(s))
        m = np.full(z.shape, np.nan, dtype=complex)
        mok = np.zeros(z.shape, dtype=bool)
        if same.any():
            m[same], mok[same] = m_values(z[same], params)
        val = _g_prefactor(s, params) * (s * (1.0 - rho) / (s - xm) + mu / (mu + xm) * m)
    ok = same & mok & np.isfinite(val) & ~_on_cut_array(s, params)
    return np.where(ok, val, np.nan + 0j), ok


def _on_cut_array(s, params):
    scale = max(1.0, params.mu)
    tol = algebra.CUT_TOL * scale
    return ((np.abs(s.imag) <= tol) & (s.real >= params.zeta_minus - tol)
            & (s.real <= params.zeta_plus + tol))


def g_values(s, params: SymmetricParams):
    """Vectorised G(s) (route through xi+). Returns (values, ok)."""
    return g_route_b(s, params)


def g_transform(s, params: SymmetricParams) -> GEval:
    """G(s) = E[exp(-s U1); U1 > 0 = U2] evaluated by both routes where possible.

    The reported value comes from the xi+ route, falling back to the xi-
    route; ``discrepancy`` is the relative gap when both apply.
    """
    s = complex(s)
    if algebra.on_xi_cut(s, params):
        raise CutError(f"s = {s!r} lies on the cut [{params.zeta_minus!r}, {params.zeta_plus!r}]")
    vb, okb = g_route_b(np.array([s]), params)
    va, oka = g_route_a(np.array([s]), params)
    rb = complex(vb[0]) if okb[0] else None
    ra = complex(va[0]) if oka[0] else None
    if rb is None and ra is None:
        raise SeriesError(f"G({s!r}) could not be evaluated by either route")
    value = rb if rb is not None else ra
    disc = abs(ra - rb) / (1.0 + abs(rb)) if (ra is not None and rb is not None) else float("nan")
    return GEval(value, ra, rb, disc, s)


def j_transform(s, params: SymmetricParams):
    """J(s) = (lam/2)(1 - rho) s / (s + mu)."""
    return 0.5 * params.lam * (1.0 - params.rho) * s / (s + params.mu)


def h_transform(s1, s2, params: SymmetricParams):
    """H(s1, s2) = lam mu (s2 - s1) / (2 (mu + s1)(mu + s2)) * M((s1 + s2)/2).

    Exactly antisymmetric under swapping the arguments. Scalar arguments give
    a complex result and raise on failure; arrays give (values, ok).
    """
    scalar = np.isscalar(s1) and np.isscalar(s2)
    a1 = np.asarray(s1, dtype=complex)
    a2 = np.asarray(s2, dtype=complex)
    mu = params.mu
    if scalar:
        if abs(a1 + mu) <= algebra.CUT_TOL * mu or abs(a2 + mu) <= algebra.CUT_TOL * mu:
            raise PoleError("H has a pole where an argument equals -mu")
        if a1 == a2:
            return 0j
        pre = params.lam * mu * (a2 - a1) / (2.0 * ((mu + a1) * (mu + a2)))
        return complex(pre * m_series(0.5 * (a1 + a2), params).value)
    a1, a2 = np.broadcast_arrays(a1, a2)
    with np.errstate(all="ignore"):
        pre = params.lam * mu * (a2 - a1) / (2.0 * ((mu + a1) * (mu + a2)))
    m, ok = m_values(0.5 * (a1 + a2), params)
    zero = a1 == a2
    val = np.where(zero, 0j, pre * m)
    ok = (ok | zero) & np.isfinite(val)
    return val, ok


def _f0_direct(s1, s2, params, g2):
    k = algebra.kernel_K(s1, s2, params)
    k1 = s1 - k
    k2 = s2 - k
    return (j_transform(s2, params) + h_transform(s1, s2, params) - k2 * g2) / k1, k1


def f0_transform(s1, s2, params: SymmetricParams) -> complex:
    """F0(s1, s2) = E[exp(-s1 U1 - s2 U2); 0 < U1 < U2] from the kernel equation.

    Where K1(s1, s2) vanishes the value is the mean over four points on a
    circle of radius 1e-4 around s1 (exact for cubic polynomials), which
    passes through the removable singularity. Raises PoleError if the
    numerator does not vanish there as well.
    """
    s1 = complex(s1)
    s2 = complex(s2)
    if s2 == 0:
        g2 = g_zero(params)
    else:
        g2 = g_transform(s2, params).value
    k = algebra.kernel_K(s1, s2, params)
    k1 = s1 - k
    if abs(k1) > 1e-6 * (abs(s1) + params.mu):
        return _f0_direct(s1, s2, params, g2)[0]
    num = j_transform(s2, params) + h_transform(s1, s2, params) - (s2 - k) * g2
    scale = abs(j_transform(s2, params)) + abs(g2) * (abs(s2) + abs(k)) + 1.0
    if abs(num) > 1e-6 * scale:
        raise PoleError(f"F0 has a non-removable pole at ({s1!r}, {s2!r})")
    pts = s1 + REMOVABLE_RADIUS * np.exp(0.5j * np.pi * np.arange(4))
    return complex(np.mean([_f0_direct(p, s2, params, g2)[0] for p in pts]))


def f_marginal(s, params: SymmetricParams) -> complex:
    """E[exp(-s U1)] assembled from its five pieces.

    1 - rho + F0(s, 0) + G(s) + F0(0, s) + G(0). At s = 0 each F0 piece is
    taken through its removable singularity.
    """
    s = complex(s)
    g0 = g_zero(params)
    if s == 0:
        return complex(1.0 - params.rho + 2.0 * f0_transform(0.0, 0.0, params) + 2.0 * g0)
    gs = g_transform(s, params).value
    return complex(1.0 - params.rho + f0_transform(s, 0.0, params) + gs
                   + f0_transform(0.0, s, params) + g0)


def marginal_values(s, params: SymmetricParams):
    """Vectorised E[exp(-s U1)] for inversion. Returns (values, ok).

    Uses the simplified form
    G(0) + (lam/2)(G(0) - M(s/2)) / (s + mu - lam/2) + 2 (s + mu)/lam G(s) - M(s/2),
    which is the five-piece sum with the kernel factors cancelled.
    """
    s = np.asarray(s, dtype=complex)
    lam, mu = params.lam, params.mu
    g0 = g_zero(params)
    m_half, ok_m = m_values(0.5 * s, params)
    g, ok_g = g_values(s, params)
    with np.errstate(all="ignore"):
        d = s + mu - 0.5 * lam
        val = g0 + 0.5 * lam * (g0 - m_half) / d + 2.0 * (s + mu) / lam * g - m_half
    near = np.abs(d) < 1e-6 * (np.abs(s) + mu)
    ok = ok_m & ok_g & np.isfinite(val)
    if near.any():
        for i in zip(*np.nonzero(near)):
            try:
                val[i] = f_marginal(s[i], params)
                ok[i] = True
            except (SeriesError, PoleError, CutError):
                ok[i] = False
    return np.where(ok, val, np.nan + 0j), ok


# ---------------------------------------------------------------------------
# residual checks
# ---------------------------------------------------------------------------

def residual_functional_eq(z, params: SymmetricParams, tol: float = DEFAULT_TOL) -> float:
    """|M(z) - q(z) M(h(z)) - L(z)| / (1 + |M(z)|) with q, L, h from ``qlh``."""
    f = qlh(z, params)
    mz = m_series(z, params, tol).value
    mh = m_series(f.h, params, tol).value
    return abs(mz - f.q * mh - f.L) / (1.0 + abs(mz))


def pk_residual(s, params: SymmetricParams) -> float:
    """Gap between 1 - rho + 2 F0(s, s) + 2 G(s) and s(1 - rho)/(s - K(s, s))."""
    s = complex(s)
    g = g_transform(s, params).value
    f = 1.0 - params.rho + 2.0 * f0_transform(s, s, params) + 2.0 * g
    k = algebra.kernel_K(s, s, params)
    pk = s * (1.0 - params.rho) / (s - k)
    return abs(f - pk) / (1.0 + abs(pk))


def kernel_equation_residuals(s1, s2, params: SymmetricParams) -> float:
    """Largest residual of the three kernel identities at (s1, s2).

    With H1 = F0(s1, s2) + G(s1) and H2 = F0(s2, s1) + G(s2):
      K1 H1 + K2 H2 = (1 - rho) K
      K1 F0(s1, s2) + K2 G(s2) = J(s2) + H(s1, s2)
      K2 F0(s2, s1) + K1 G(s1) = J(s1) - H(s1, s2)
    Each residual is scaled by one plus the largest term magnitude.
    """
    s1 = complex(s1)
    s2 = complex(s2)
    k = algebra.kernel_K(s1, s2, params)
    k1 = s1 - k
    k2 = s2 - k
    g1 = g_zero(params) if s1 == 0 else g_transform(s1, params).value
    g2 = g_zero(params) if s2 == 0 else g_transform(s2, params).value
    f12 = f0_transform(s1, s2, params)
    f21 = f0_transform(s2, s1, params)
    h12 = h_transform(s1, s2, params)
    j1 = j_transform(s1, params)
    j2 = j_transform(s2, params)
    rhs0 = (1.0 - params.rho) * k
    lines = (
        (k1 * (f12 + g1) + k2 * (f21 + g2) - rhs0, (k1 * (f12 + g1), k2 * (f21 + g2), rhs0)),
        (k1 * f12 + k2 * g2 - j2 - h12, (k1 * f12, k2 * g2, j2, h12)),
        (k2 * f21 + k1 * g1 - j1 + h12, (k2 * f21, k1 * g1, j1, h12)),
    )
    return max(abs(r) / (1.0 + max(abs(t) for t in terms)) for r, terms in lines)


def route_discrepancy(s, params: SymmetricParams) -> float:
    """Relative gap between the two routes for G at real or complex ``s``."""
    return g_transform(s, params).discrepancy


def m_derivative(z, params: SymmetricParams, h: float = 1e-8) -> complex:
    """dM/dz at real z by complex step; at complex z by a central difference."""
    z = complex(z)
    if z.imag == 0.0:
        return m_series(z + 1j * h, params).value.imag / h
    step = 1e-5 * max(1.0, abs(z))
    return (m_series(z + step, params).value - m_series(z - step, params).value) / (2.0 * step)


__all__ = [
    "QLH", "SeriesEval", "GEval", "qlh", "iterate_h", "m_series", "m_values", "g_zero",
    "g_route_a", "g_route_b", "g_values", "g_transform", "j_transform", "h_transform",
    "f0_transform", "f_marginal", "marginal_values", "residual_functional_eq", "pk_residual",
    "kernel_equation_residuals", "route_discrepancy", "m_derivative", "DEFAULT_TOL",
]
