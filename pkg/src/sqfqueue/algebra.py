"""Kernel, quadratic branches xi+-(s) and the cubic R(w, z) with tracked roots.

The quadratic ``(s+mu) xi^2 + B(s) xi - (lam mu / 2) s = 0`` with
``B(s) = mu^2 - lam mu / 2 + (mu - lam) s`` has discriminant
``D(s) = B(s)^2 + 2 lam mu s (s + mu)`` vanishing at ``zeta_- < zeta_+ < 0``.
Its roots are continued to the plane cut along ``[zeta_-, zeta_+]`` by flipping
the sign of the principal square root across ``Re(s) = (zeta_- + zeta_+)/2``.

The cubic

    R(w, z) = w^3 - (lam - z) w^2 - (z + mu)^2 w - z (z + mu)(z + mu - lam)

has three real roots ``alpha < beta < gamma`` for real ``z > eta1``. Off the
real axis the labels are carried by predictor-corrector continuation from a
real anchor. ``alpha`` is single valued on the plane cut along
``[-mu, eta1]``, which is all the series machinery needs.
"""
from __future__ import annotations

import cmath
import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .exceptions import ContinuationError, CutError, PoleError
from .model import GeneralParams, SymmetricParams

#: default relative tolerance for residual checks
RESIDUAL_TOL = 1e-10
#: relative distance below which a point counts as lying on a cut or a pole
CUT_TOL = 1e-12


# ---------------------------------------------------------------------------
# kernel
# ---------------------------------------------------------------------------

def _rates(params):
    if isinstance(params, SymmetricParams):
        h = params.lam_half
        return h, h, params.mu, params.mu
    if isinstance(params, GeneralParams):
        return params.lambda1, params.lambda2, params.mu1, params.mu2
    raise TypeError(f"expected SymmetricParams or GeneralParams, got {type(params).__name__}")


def _check_lst_pole(s, mu, name):
    if abs(s + mu) <= CUT_TOL * max(1.0, mu):
        raise PoleError(f"{name} = {s!r} is the pole -mu = {-mu!r} of the service transform")


def kernel_K(s1, s2, params) -> complex:
    """K(s1, s2) = lam - lam1 b1(s1) - lam2 b2(s2) with b_i(s) = mu_i / (s + mu_i)."""
    l1, l2, m1, m2 = _rates(params)
    _check_lst_pole(s1, m1, "s1")
    _check_lst_pole(s2, m2, "s2")
    return (l1 + l2) - l1 * m1 / (s1 + m1) - l2 * m2 / (s2 + m2)


def kernel_K1(s1, s2, params) -> complex:
    return s1 - kernel_K(s1, s2, params)


def kernel_K2(s1, s2, params) -> complex:
    return s2 - kernel_K(s1, s2, params)


# ---------------------------------------------------------------------------
# quadratic branches
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class XiPair:
    xi_minus: complex
    xi_plus: complex
    at: complex
    disc: complex


def xi_coefficients(s, params: SymmetricParams):
    """Coefficients (a, b, c) of a xi^2 + b xi + c = 0 at ``s``."""
    lam, mu = params.lam, params.mu
    a = s + mu
    b = mu * mu - lam * mu / 2.0 + (mu - lam) * s
    c = -lam * mu * s / 2.0
    return a, b, c


def branch_sqrt(s, params: SymmetricParams):
    """Continued square root E(s) of D(s).

    Principal root of D for Re(s) right of the midpoint of the cut, its
    negative on the left. The two halves glue into a function analytic off
    ``[zeta_-, zeta_+]``. Exactly on the midline the equivalent product form
    ``sqrt(lam^2+mu^2) sqrt(s - zeta_-) sqrt(s - zeta_+)`` is used.
    """
    s = np.asarray(s, dtype=complex)
    mid = 0.5 * (params.zeta_minus + params.zeta_plus)
    root = np.sqrt(params.disc(s))
    e = np.where(s.real > mid, root, -root)
    on_line = s.real == mid
    if np.any(on_line):
        prod = (math.hypot(params.lam, params.mu)
                * np.sqrt(s - params.zeta_minus) * np.sqrt(s - params.zeta_plus))
        e = np.where(on_line, prod, e)
    return e


def xi_branches(s, params: SymmetricParams):
    """Vectorised (xi_minus, xi_plus) without cut or pole checks.

    The larger-magnitude numerator is used directly and the other root comes
    from the product of roots, so neither branch suffers cancellation (near
    ``s = 0`` for xi+, near ``s = -mu`` for xi-).
    """
    s = np.asarray(s, dtype=complex)
    a, b, c = xi_coefficients(s, params)
    e = branch_sqrt(s, params)
    n_plus = -b + e
    n_minus = -b - e
    use_plus = np.abs(n_plus) >= np.abs(n_minus)
    with np.errstate(all="ignore"):
        xp = np.where(use_plus, n_plus / (2.0 * a), 2.0 * c / n_minus)
        xm = np.where(use_plus, 2.0 * c / n_plus, n_minus / (2.0 * a))
    return xm, xp


def on_xi_cut(s, params: SymmetricParams, tol: float = CUT_TOL) -> bool:
    scale = max(1.0, params.mu)
    return (abs(s.imag) <= tol * scale
            and params.zeta_minus - tol * scale <= s.real <= params.zeta_plus + tol * scale)


def xi_pair(s, params: SymmetricParams) -> XiPair:
    """Both roots of the kernel quadratic at ``s`` on the cut plane."""
    s = complex(s)
    if on_xi_cut(s, params):
        raise CutError(f"s = {s!r} lies on the cut [{params.zeta_minus!r}, {params.zeta_plus!r}]")
    if abs(s + params.mu) <= CUT_TOL * max(1.0, params.mu):
        raise PoleError(f"s = {s!r} is the pole -mu of xi+")
    xm, xp = xi_branches(s, params)
    return XiPair(complex(xm), complex(xp), s, complex(params.disc(s)))


def xi_residual(xi, s, params: SymmetricParams) -> float:
    """Relative residual of the kernel quadratic."""
    a, b, c = xi_coefficients(s, params)
    scale = abs(a * xi * xi) + abs(b * xi) + abs(c)
    return abs(a * xi * xi + b * xi + c) / max(scale, 1e-300)


# ---------------------------------------------------------------------------
# cubic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CubicRoots:
    alpha: complex
    beta: complex
    gamma: complex
    at: complex
    max_residual: float
    steps: int = 0

    def as_tuple(self):
        return self.alpha, self.beta, self.gamma


def cubic_coefficients(z, params: SymmetricParams):
    """(a2, a1, a0) with R(w, z) = w^3 + a2 w^2 + a1 w + a0."""
    lam, mu = params.lam, params.mu
    zm = z + mu
    return z - lam, -zm * zm, -z * zm * (zm - lam)


def cubic_value(w, z, params: SymmetricParams):
    a2, a1, a0 = cubic_coefficients(z, params)
    return ((w + a2) * w + a1) * w + a0


def cubic_residual(w, z, params: SymmetricParams):
    """|R(w, z)| scaled by the sum of the magnitudes of its monomials."""
    a2, a1, a0 = cubic_coefficients(z, params)
    w = np.asarray(w)
    num = np.abs(((w + a2) * w + a1) * w + a0)
    den = np.abs(w) ** 3 + np.abs(a2 * w * w) + np.abs(a1 * w) + np.abs(a0)
    return num / np.maximum(den, 1e-300)


def _dR_dw(w, z, params):
    a2, a1, _ = cubic_coefficients(z, params)
    return (3.0 * w + 2.0 * a2) * w + a1


def _dR_dz(w, z, params):
    lam, mu = params.lam, params.mu
    zm = z + mu
    return w * w - 2.0 * zm * w - (zm * (zm - lam) + z * (zm - lam) + z * zm)


def _real_roots_sorted(z: float, params: SymmetricParams):
    """Three real roots at a real anchor z > eta1, ascending, Newton polished."""
    a2, a1, a0 = cubic_coefficients(z, params)
    # trigonometric form for a depressed cubic with three real roots
    p = a1 - a2 * a2 / 3.0
    q = 2.0 * a2 ** 3 / 27.0 - a2 * a1 / 3.0 + a0
    m = 2.0 * math.sqrt(-p / 3.0)
    arg = max(-1.0, min(1.0, 3.0 * q / (p * m)))
    theta = math.acos(arg) / 3.0
    roots = np.array([m * math.cos(theta - 2.0 * math.pi * k / 3.0) for k in range(3)]) - a2 / 3.0
    roots.sort()
    for _ in range(3):
        roots = roots - cubic_value(roots, z, params) / _dR_dw(roots, z, params)
    return roots


def _newton(w, z, params, iters=30):
    """Newton on R(., z) from ``w`` in scalar complex arithmetic.

    Returns (root, converged).
    """
    a2, a1, a0 = cubic_coefficients(z, params)
    for _ in range(iters):
        d = (3.0 * w + 2.0 * a2) * w + a1
        if d == 0:
            return w, False
        step = (((w + a2) * w + a1) * w + a0) / d
        w = w - step
        if abs(step) <= 1e-14 * (1.0 + abs(w)):
            # one extra step to reach full precision
            d = (3.0 * w + 2.0 * a2) * w + a1
            if d != 0:
                w = w - (((w + a2) * w + a1) * w + a0) / d
            return w, True
    return w, False


def _on_alpha_cut(z: complex, params, tol=CUT_TOL, eta1=None) -> bool:
    if eta1 is None:
        eta1 = ramification_points(params).eta1
    scale = max(1.0, params.mu)
    return abs(z.imag) <= tol * scale and z.real <= eta1 + tol * scale


def track_roots(z0, roots0, z1, params: SymmetricParams, *, min_step=1e-13, max_steps=200000):
    """Continue all three roots along the segment z0 -> z1.

    A step is accepted when the corrector converges, every root moves by less
    than one third of the smallest pairwise gap, and each corrected root is
    closer to its own predictor than to any other predictor. Otherwise the
    step is halved. Returns (roots, number_of_accepted_steps).
    """
    roots = [complex(r) for r in roots0]
    z0 = complex(z0)
    z1 = complex(z1)
    t = 0.0
    h = 1.0
    accepted = 0
    z_cur = z0
    for _ in range(max_steps):
        if t >= 1.0:
            break
        h = min(h, 1.0 - t)
        z_new = z0 + (t + h) * (z1 - z0) if t + h < 1.0 else z1
        dz = z_new - z_cur
        pred = [w - _dR_dz(w, z_cur, params) / _dR_dw(w, z_cur, params) * dz for w in roots]
        new = []
        ok = True
        for w in pred:
            w_new, conv = _newton(w, z_new, params)
            new.append(w_new)
            ok = ok and conv
        if ok:
            gap = min(abs(roots[0] - roots[1]), abs(roots[0] - roots[2]), abs(roots[1] - roots[2]))
            ok = all(abs(new[i] - roots[i]) < gap / 3.0 for i in range(3))
        if ok:
            for i in range(3):
                own = abs(new[i] - pred[i])
                others = min(abs(new[i] - pred[j]) for j in range(3) if j != i)
                if not own < others:
                    ok = False
                    break
        if ok:
            roots = new
            z_cur = z_new
            t = t + h if z_new != z1 else 1.0
            accepted += 1
            h *= 2.0
        else:
            h *= 0.5
            if h * abs(z1 - z0) < min_step * max(1.0, abs(z1)):
                raise ContinuationError(
                    f"root tracking stalled near z = {z_cur!r} on the way to {z1!r}: "
                    f"roots too close (ramification point nearby?)")
    else:
        raise ContinuationError(f"root tracking exceeded {max_steps} steps towards {z1!r}")
    roots = np.array(roots, dtype=complex)
    return roots, accepted


def cubic_roots(z, params: SymmetricParams) -> CubicRoots:
    """Labelled roots (alpha, beta, gamma) of R(., z).

    Labels are fixed by the ordering alpha < beta < gamma at the real anchor
    ``z0 = max(1, |z|)`` and carried to ``z`` along the straight segment.
    For real ``z > eta1`` the anchor ordering persists, since the roots stay
    real and distinct there.
    """
    z = complex(z)
    if _on_alpha_cut(z, params):
        raise CutError(f"z = {z!r} lies on the cut [-mu, eta1] of the alpha branch")
    z0 = max(1.0, abs(z))
    roots = _real_roots_sorted(z0, params).astype(complex)
    steps = 0
    if z != z0:
        if z.imag == 0.0:
            # real path: roots stay real and ordered, no labelling ambiguity
            roots, steps = track_roots(z0, roots, z, params)
            roots = np.sort(roots.real).astype(complex)
        else:
            roots, steps = track_roots(z0, roots, z, params)
    res = float(np.max(cubic_residual(roots, z, params)))
    return CubicRoots(complex(roots[0]), complex(roots[1]), complex(roots[2]), z, res, steps)


def vieta_residuals(roots: CubicRoots, params: SymmetricParams):
    """Relative residuals of the three symmetric-function identities."""
    a, b, g = roots.alpha, roots.beta, roots.gamma
    z = roots.at
    lam, mu = params.lam, params.mu
    zm = z + mu
    pairs = (
        (a + b + g, lam - z, abs(a) + abs(b) + abs(g)),
        (a * b + b * g + g * a, -zm * zm, abs(a * b) + abs(b * g) + abs(g * a)),
        (a * b * g, z * zm * (zm - lam), abs(a * b * g)),
    )
    return tuple(abs(lhs - rhs) / max(scale, abs(rhs), 1e-300) for lhs, rhs, scale in pairs)


# ---------------------------------------------------------------------------
# fast vectorised alpha branch
# ---------------------------------------------------------------------------

def _alpha_gap(alpha, z, params):
    """Distance from alpha to the two other roots (via deflation)."""
    a2, a1, _ = cubic_coefficients(z, params)
    b = a2 + alpha
    c = a1 + alpha * b
    d = np.sqrt(b * b - 4.0 * c)
    r1 = (-b + d) / 2.0
    r2 = (-b - d) / 2.0
    return np.minimum(np.abs(alpha - r1), np.abs(alpha - r2))


def _alpha_real_anchor(x, params):
    """Smallest real root at real anchors ``x >= 1`` (vectorised)."""
    a2, a1, a0 = cubic_coefficients(x, params)
    p = a1 - a2 * a2 / 3.0
    q = 2.0 * a2 ** 3 / 27.0 - a2 * a1 / 3.0 + a0
    m = 2.0 * np.sqrt(-p / 3.0)
    arg = np.clip(3.0 * q / (p * m), -1.0, 1.0)
    theta = np.arccos(arg) / 3.0
    w = m * np.cos(theta - 4.0 * np.pi / 3.0) - a2 / 3.0
    for _ in range(3):
        w = w - cubic_value(w, x, params) / _dR_dw(w, x, params)
    return w


def track_alpha(z_from, alpha_from, z_to, params: SymmetricParams, steps: int = 1,
                newton_iters: int = 3):
    """Continue alpha along straight segments (vectorised, fixed step count).

    Returns (alpha, ok). ``ok`` is False where the corrector displacement is
    not small against the distance to the other two roots, or the final
    residual is poor; callers refine those entries.
    """
    z_from = np.asarray(z_from, dtype=complex)
    z_to = np.asarray(z_to, dtype=complex)
    w = np.array(alpha_from, dtype=complex)
    ok = np.ones(w.shape, dtype=bool)
    dz = (z_to - z_from) / steps
    z = z_from
    with np.errstate(all="ignore"):
        for k in range(steps):
            z_next = z_to if k == steps - 1 else z_from + (k + 1) * dz
            pred = w - _dR_dz(w, z, params) / _dR_dw(w, z, params) * (z_next - z)
            w = pred
            for _ in range(newton_iters):
                w = w - cubic_value(w, z_next, params) / _dR_dw(w, z_next, params)
            gap = _alpha_gap(w, z_next, params)
            ok &= np.abs(w - pred) < gap / 3.0
            z = z_next
        ok &= cubic_residual(w, z_to, params) < 1e-12
        ok &= np.isfinite(w)
    return w, ok


def alpha_branch(z, params: SymmetricParams, steps: int = 16, max_refine: int = 3,
                 strict: bool = True):
    """alpha(z) for an array of points off the cut ``[-mu, eta1]``.

    Tracks from the real anchor ``max(1, |z|)``. Entries whose tracking fails
    validation are retried with four times as many steps, then handed to the
    adaptive scalar tracker. If that fails too, ContinuationError is raised
    (``strict``) or the entry is set to NaN.
    """
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    zf = z.ravel()
    anchor = np.maximum(1.0, np.abs(zf))
    a0 = _alpha_real_anchor(anchor, params).astype(complex)
    out, ok = track_alpha(anchor, a0, zf, params, steps=steps)
    n = steps
    for _ in range(max_refine):
        if ok.all():
            break
        bad = ~ok
        n *= 4
        redo, ok_b = track_alpha(anchor[bad], a0[bad], zf[bad], params, steps=n)
        out[bad] = redo
        ok[bad] = ok_b
    for i in np.flatnonzero(~ok):
        try:
            out[i] = cubic_roots(zf[i], params).alpha
        except (ContinuationError, CutError):
            if strict:
                raise
            out[i] = complex("nan+nanj")
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# discriminant and ramification points
# ---------------------------------------------------------------------------

def small_delta(z, params: SymmetricParams):
    """The cubic factor delta(z) of the discriminant Delta(z) = (z + mu) delta(z)."""
    lam, mu = params.lam, params.mu
    c3 = 16.0 * (lam * lam + mu * mu)
    c2 = -(16.0 * lam ** 3 - 24.0 * lam ** 2 * mu + 24.0 * lam * mu ** 2 - 32.0 * mu ** 3)
    c1 = (4.0 * lam ** 4 - 4.0 * lam ** 3 * mu + 21.0 * lam ** 2 * mu ** 2
          - 20.0 * lam * mu ** 3 + 20.0 * mu ** 4)
    c0 = lam ** 2 * mu ** 3 + 4.0 * mu ** 5
    return ((c3 * z + c2) * z + c1) * z + c0


def _delta_coefficients(params):
    lam, mu = params.lam, params.mu
    return np.array([
        16.0 * (lam * lam + mu * mu),
        -(16.0 * lam ** 3 - 24.0 * lam ** 2 * mu + 24.0 * lam * mu ** 2 - 32.0 * mu ** 3),
        4.0 * lam ** 4 - 4.0 * lam ** 3 * mu + 21.0 * lam ** 2 * mu ** 2
        - 20.0 * lam * mu ** 3 + 20.0 * mu ** 4,
        lam ** 2 * mu ** 3 + 4.0 * mu ** 5,
    ])


def discriminant(z, params: SymmetricParams):
    """Delta(z) = (z + mu) delta(z), the discriminant of R(., z)."""
    return (z + params.mu) * small_delta(z, params)


def cardano_discriminant(z, params: SymmetricParams):
    """-4 P^3 - 27 Q^2 from the depressed form of R(., z) (for cross-checks)."""
    a2, a1, a0 = cubic_coefficients(z, params)
    p = a1 - a2 * a2 / 3.0
    q = a0 - a2 * a1 / 3.0 + 2.0 * a2 ** 3 / 27.0
    return -4.0 * p ** 3 - 27.0 * q ** 2


@dataclass(frozen=True)
class Ramification:
    eta1: float
    eta2: float
    eta3: complex
    eta4: complex


@functools.lru_cache(maxsize=256)
def ramification_points(params: SymmetricParams) -> Ramification:
    """Zeros of Delta: eta1 in (-mu, 0), eta2 = -mu and a conjugate pair.

    eta1 is bracketed on (-mu, 0) where delta changes sign; the conjugate
    pair solves the quadratic left after deflating delta by (z - eta1).
    """
    mu = params.mu
    f = lambda x: small_delta(x, params)  # noqa: E731
    eta1 = optimize.brentq(f, -mu, 0.0, xtol=1e-16, rtol=1e-15, maxiter=500)
    c3, c2, c1, _ = _delta_coefficients(params)
    b2 = c2 + c3 * eta1
    b1 = c1 + b2 * eta1
    d = cmath.sqrt(b2 * b2 - 4.0 * c3 * b1)
    e3 = (-b2 + d) / (2.0 * c3)
    if e3.imag < 0:
        e3 = e3.conjugate()
    # polish the complex pair on the full cubic
    for _ in range(3):
        e3 = e3 - small_delta(e3, params) / _delta_prime(e3, params)
    e3 = complex(e3.real, abs(e3.imag))
    return Ramification(float(eta1), -mu, e3, e3.conjugate())


def _delta_prime(z, params):
    c3, c2, c1, _ = _delta_coefficients(params)
    return (3.0 * c3 * z + 2.0 * c2) * z + c1
