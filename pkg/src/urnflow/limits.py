"""Closed-form limit quantities for the two-urn model.

Conventions: row vectors are 1-D arrays multiplied from the left, ``spec`` is a
:class:`CharacteristicSpec` ``a Phi^t_x + b Phi^j_x`` with 0-based ``j``, and
for a threshold ``x`` in [0, 1] the characteristic has mean ``x c`` at k = 0
and ``c = a 1 + b e_j^T A`` at every k >= 1.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .embedding import CharacteristicSpec
from .errors import DegenerateVariance, GammaNotSimple, SingularResolvent, TailNotConvergent
from .spectral import EPS_SPEC, regime_of

EPS_TAIL = 1e-12
DEFAULT_GRID = 16
MAX_TERMS = 20000


# ---------------------------------------------------------------- first order


def w_vector(sd, j):
    """w_j = e_j^T A - rho u_j 1."""
    return sd.A[j, :] - sd.rho * sd.u[j]


def lln_limit(sd, j=None):
    """rho * u_j (the whole vector when ``j`` is None)."""
    lim = sd.rho * np.asarray(sd.u, dtype=float)
    return lim if j is None else float(lim[j])


def mean_row(sd, spec):
    """c = E[Phi(k)] for k >= 1."""
    return spec.a * np.ones(sd.dim) + spec.b * sd.A[spec.j, :]


def centered_spec(sd, j, x=0.0):
    return CharacteristicSpec.centered(j, sd.rho * sd.u[j], x)


def _pi(sd, i):
    return {1: sd.pi1, 2: sd.pi2, 3: sd.pi3}[i]


def resolvent(sd, i):
    """(A - I)^{-1} on the range of pi^(i), extended by zero.

    This equals sum_{k>=1} A_i^{-k} pi^(i). ``A_i - I`` itself vanishes off
    that range, so the inverse is taken of ``(A - I) pi^(i) + (I - pi^(i))``.
    """
    key = ("R", i)
    if key not in sd._cache:
        P = _pi(sd, i)
        I = np.eye(sd.dim)
        M = (sd.A - I) @ P + (I - P)
        if abs(np.linalg.det(M)) < EPS_SPEC:
            raise SingularResolvent(f"1 is an eigenvalue of A in class {i}")
        sd._cache[key] = P @ np.linalg.inv(M)
    return sd._cache[key]


def x_vectors(sd, spec, i):
    """x_i(Phi) = sum_{k>=0} E[Phi(k)] pi^(i) A_i^{-k}, in closed form.

    With E[Phi(0)] = x c and E[Phi(k)] = c otherwise this is
    c pi^(i) (x I + (A - I)^{-1}) restricted to the range of pi^(i).
    """
    if not 0.0 <= spec.x <= 1.0:
        raise ValueError("x_vectors takes thresholds in [0, 1]")
    c = mean_row(sd, spec).astype(complex)
    P = _pi(sd, i)
    if not np.any(P):
        return np.zeros(sd.dim, dtype=complex)
    return c @ (spec.x * P + resolvent(sd, i))


def x_vectors_series(sd, spec, i, K):
    """The defining series truncated after k = K (used as an oracle)."""
    c = mean_row(sd, spec).astype(complex)
    P = _pi(sd, i)
    Ainv = sd.A1_inv if i == 1 else sd.A2_inv
    term = P.copy()
    out = spec.x * (c @ term)
    for _ in range(K):
        term = term @ Ainv
        out = out + c @ term
    return out


def series_terms_needed(sd, i, tol):
    """Smallest K whose geometric tail bound for the x_i series is below ``tol``."""
    lams = [abs(e.lam) for e in sd.sigma(i)]
    if not lams:
        return 0
    d = max(e.d for e in sd.sigma(i))
    r = 1.0 / min(lams)
    # polynomial factors from Jordan blocks are absorbed by working with sqrt(r)
    r_eff = r ** (1.0 / (1 + d)) if d > 0 else r
    scale = max(1.0, np.abs(sd.A).max())
    K = 1
    while scale * r_eff**K / (1 - r_eff) > tol and K < 100000:
        K += 1
    return K + 10 * d


# ------------------------------------------------------------------ centering


def martingale_estimates(sd, Z, m):
    """Martingale estimates from generation-``m`` counts ``Z`` (shape (..., J)).

    Returns ``(W, W1, W_lambda)``: W = rho^-m v.Z, W1 = A_1^-m pi^(1) Z (column
    vectors, trailing dim J) and W_lambda[idx] = lambda^-m v^lambda.Z for each
    simple eigenvalue of class 1 other than rho.
    """
    Z = np.asarray(Z, dtype=float)
    W = sd.rho ** (-m) * (Z @ sd.v)
    M = np.linalg.matrix_power(sd.A1_inv, m) @ sd.pi1
    W1 = Z @ M.T
    Wl = {}
    for idx, e in enumerate(sd.eigs):
        if idx == sd.perron_index or e.sigma != 1 or not e.simple:
            continue
        Wl[idx] = e.lam ** (-m) * (Z @ e.v)
    return W, W1, Wl


def F_n(sd, spec, n, W1, Z0):
    """F_n = x_1 A_1^n W1 + x_2 A_2^n Z0 (real part; ``W1`` may be batched)."""
    x1 = x_vectors(sd, spec, 1)
    x2 = x_vectors(sd, spec, 2)
    W1 = np.asarray(W1, dtype=complex)
    t1 = (x1 @ np.linalg.matrix_power(sd.A1, n)) @ W1.T
    t2 = x2 @ np.linalg.matrix_power(sd.A2, n) @ np.asarray(Z0, dtype=complex)
    return np.real(t1 + t2)


def _F_rows(sd, spec, M):
    """Row vectors r1[m] = x_1(Phi_0) A_1^m and r2[m] = x_2(Phi_0) A_2^m for m <= M+1."""
    s0 = spec.at(0.0)
    x1 = x_vectors(sd, s0, 1)
    x2 = x_vectors(sd, s0, 2)
    r1 = [x1]
    r2 = [x2]
    for _ in range(M + 1):
        r1.append(r1[-1] @ sd.A1)
        r2.append(r2[-1] @ sd.A2)
    return np.array(r1), np.array(r2)


def F_curve(sd, spec, y, W1, Z0):
    """The curve y -> F_{floor y}^{Phi_{frac y}}, linear between integers.

    ``y`` and ``W1`` may be batched together (shapes (R,) and (R, J)).
    """
    y = np.asarray(y, dtype=float)
    W1 = np.atleast_2d(np.asarray(W1, dtype=complex))
    m = np.floor(y).astype(int)
    frac = y - m
    r1, r2 = _F_rows(sd, spec, int(m.max()))
    Z0 = np.asarray(Z0, dtype=complex)
    lo = np.real(np.einsum("rj,rj->r", r1[m], W1) + r2[m] @ Z0)
    hi = np.real(np.einsum("rj,rj->r", r1[m + 1], W1) + r2[m + 1] @ Z0)
    out = (1 - frac) * lo + frac * hi
    return out if out.size > 1 or y.ndim else float(out[0])


def F_inv(sd, t, W1, Z0, max_gen=None):
    """Largest y with F^t(y) = t, per replicate (F^t is piecewise linear)."""
    W1 = np.atleast_2d(np.asarray(W1, dtype=complex))
    R = W1.shape[0]
    t = np.broadcast_to(np.asarray(t, dtype=float), (R,))
    if max_gen is None:
        max_gen = int(math.ceil(math.log(max(t.max(), 2.0)) / math.log(sd.rho))) + 40
    r1, r2 = _F_rows(sd, CharacteristicSpec.total(), max_gen)
    vals = np.real(W1 @ r1.T + (r2 @ np.asarray(Z0, dtype=complex))[None, :])
    below = vals <= t[:, None]
    # last integer grid point at or below t
    m = np.where(below.any(axis=1), below.shape[1] - 1 - np.argmax(below[:, ::-1], axis=1), 0)
    m = np.minimum(m, max_gen)
    lo = vals[np.arange(R), m]
    hi = vals[np.arange(R), m + 1]
    frac = np.clip((t - lo) / (hi - lo), 0.0, 1.0)
    return m + frac


def full_centering(sd, j, n, W1, Z0):
    """F^j(F^inv(n)) per replicate, the centering of the general CLT."""
    y = F_inv(sd, n, W1, Z0)
    return F_curve(sd, CharacteristicSpec.type_count(j), y, W1, Z0)


# ------------------------------------------------------------------ variances


def _column_moments(law, i, q):
    vals = law.offspring[i] @ q
    p = law.probs[i]
    mu = p @ vals
    return float(p @ np.abs(vals - mu) ** 2)


def sigma_l_sq(sd, law, spec, ell):
    """Boundary-class variance constant sigma_ell^2(Phi)."""
    comps = sd.sigma(2)
    if not comps:
        return 0.0
    x2 = x_vectors(sd, spec, 2)
    total = 0.0
    for e in comps:
        q = x2 @ e.pi @ np.linalg.matrix_power(e.N, ell)
        total += sum(sd.u[i] * _column_moments(law, i, q) for i in range(sd.dim))
    return float(sd.rho ** (-ell) / ((2 * ell + 1) * math.factorial(ell) ** 2) * total)


def _var_term(sd, law, g, k, spec):
    """sum_i u_i Var[Phi(k) e_i + g (L - A) e_i] by exact enumeration."""
    a, b, j, x = spec.a, spec.b, spec.j, spec.x
    out = 0.0
    for i in range(sd.dim):
        off = law.offspring[i].astype(float)
        p = law.probs[i]
        psi = (off - sd.A[:, i]) @ g
        phi = a + b * off[:, j]
        if k < 0:
            vals, probs = psi, p
        elif k == 0:
            vals = np.concatenate([phi + psi, psi])
            probs = np.concatenate([x * p, (1 - x) * p])
        else:
            vals, probs = phi + psi, p
        mu = probs @ vals
        out += sd.u[i] * float(probs @ np.abs(vals - mu) ** 2)
    return out


@dataclass
class SeriesDiagnostics:
    k_min: int
    k_max: int
    ratio_neg: float
    ratio_pos: float
    tail_bound: float

    def to_dict(self):
        return dict(self.__dict__)


def tail_ratios(sd):
    """Geometric decay ratios of the sigma^2 series as k -> -inf and k -> +inf."""
    s1 = [abs(e.lam) for e in sd.sigma(1)]
    r_neg = sd.rho / min(s1) ** 2 if s1 else 1.0 / sd.rho
    s3 = [abs(e.lam) for e in sd.sigma(3)]
    r_pos = max([1.0] + [s**2 for s in s3]) / sd.rho
    return r_neg, r_pos


def _psi_rows(sd, spec):
    """Generators of g_k, the row vector with Psi(k) = g_k (L - A)."""
    c = mean_row(sd, spec).astype(complex)
    x1 = x_vectors(sd, spec, 1)
    const = -c @ (resolvent(sd, 1) + (resolvent(sd, 2) if np.any(sd.pi2) else 0))
    return c, x1, const


def sigma_sq(sd, law, spec, eps_tail=EPS_TAIL, diagnostics=False, extra_terms=0):
    """sigma^2(Phi) = sum_k rho^-k Var[Phi(k) + Psi(k)] u.

    Psi(k) = g_k (L - A) with
      g_k = -x_1(Phi) A_1^(k-1)                        for k <= 0,
      g_k = -c (R_1 + R_2) + c S_(k-1) pi3 + x c A^(k-1) pi3   for k >= 1,
    where R_i is the restricted resolvent and S_m = sum_{l<m-1}... is the
    partial geometric sum sum_{l=0}^{k-2} A^l. Both tails are geometric;
    summation stops once the tail bound falls below ``eps_tail`` times the
    partial sum (``extra_terms`` extends each side, for re-truncation checks).
    """
    r_neg, r_pos = tail_ratios(sd)
    for r in (r_neg, r_pos):
        if r >= 1:
            raise TailNotConvergent(f"tail ratio {r:.6g} >= 1")
    d = max(e.d for e in sd.eigs)
    # absorb polynomial (Jordan) growth into a slower effective ratio
    rn = r_neg ** (1.0 / (1 + d))
    rp = r_pos ** (1.0 / (1 + d))
    c, x1, const = _psi_rows(sd, spec)
    x = spec.x
    total = 0.0
    # k <= 0
    g = -x1 @ sd.A1_inv
    k = 0
    bound = 0.0
    while True:
        t = sd.rho ** (-k) * _var_term(sd, law, np.real(g), k, spec)
        total += t
        bound = t * rn / (1 - rn)
        if k <= -2 and bound <= eps_tail * max(total, 1e-300):
            break
        if -k > MAX_TERMS:
            raise TailNotConvergent("negative-k series did not settle")
        k -= 1
        g = g @ sd.A1_inv
    k_min = k - extra_terms
    for kk in range(k - 1, k_min - 1, -1):
        g = g @ sd.A1_inv
        total += sd.rho ** (-kk) * _var_term(sd, law, np.real(g), kk, spec)
    # k >= 1
    P3 = sd.pi3
    Apow = np.eye(sd.dim, dtype=complex)  # A^(k-1)
    S = np.zeros((sd.dim, sd.dim), dtype=complex)  # sum_{l=0}^{k-2} A^l
    k = 1
    extra_left = None
    bound_pos = 0.0
    while True:
        g = const + c @ S @ P3 + x * (c @ Apow @ P3)
        t = sd.rho ** (-k) * _var_term(sd, law, np.real(g), k, spec)
        total += t
        bound_pos = t * rp / (1 - rp)
        if extra_left is None:
            if k >= 3 and bound_pos <= eps_tail * max(total, 1e-300):
                extra_left = extra_terms
        if extra_left is not None:
            if extra_left == 0:
                break
            extra_left -= 1
        if k > MAX_TERMS:
            raise TailNotConvergent("positive-k series did not settle")
        S = S + Apow
        Apow = Apow @ sd.A
        k += 1
    value = max(float(total), 0.0)
    if diagnostics:
        return value, SeriesDiagnostics(k_min, k, r_neg, r_pos, bound + bound_pos)
    return value


# -------------------------------------------------------------- profiles


def class_variance_sums(sd, law, j):
    """Per-class sums of ||Var(w_j N^l pi_lambda L)|| over l = 0..J-1."""
    w = w_vector(sd, j)
    out = {1: 0.0, 2: 0.0, 3: 0.0}
    for e in sd.eigs:
        for ell in range(sd.dim):
            q = w @ np.linalg.matrix_power(e.N, ell) @ e.pi
            v = np.array([_column_moments(law, i, q) for i in range(sd.dim)])
            out[e.sigma] += float(np.linalg.norm(v))
    return out


@dataclass
class RegimeReport:
    case: str
    gamma: float
    Gamma: tuple
    hypotheses: dict

    def to_dict(self):
        return {"regime": self.case, "gamma": self.gamma, "Gamma": list(self.Gamma), "hypotheses": self.hypotheses}


def regime(sd, law=None, j=0, tol=1e-12):
    """Trichotomy case plus the nondegeneracy hypotheses for observed type ``j``.

    Hypotheses are evaluated when ``law`` is given: some eigenvalue of the
    relevant class (boundary in case ii, below in case iii, every non-Perron
    eigenvalue otherwise) must have w_j u^lambda != 0 and Var[v^lambda L e_i] > 0
    for some i; the variance-bound condition sums Var(w_j N^l pi_lambda L) over the
    whole spectrum.
    """
    case = regime_of(sd)
    hyp = {}
    if law is not None:
        w = w_vector(sd, j)
        cls = {"case_ii_boundary": (2,), "case_iii_below": (3,)}.get(case, (1, 2, 3))
        scale = max(1.0, np.abs(sd.A).max())
        wu = False
        varpos = False
        both = False
        for idx, e in enumerate(sd.eigs):
            if idx == sd.perron_index or e.sigma not in cls:
                continue
            if e.simple:
                a_ok = abs(w @ e.u) > tol * scale
                vrow = e.v
            else:
                a_ok = np.abs(w @ e.pi).max() > tol * scale
                vrow = None
            if vrow is None:
                v_ok = any(
                    _column_moments(law, i, e.pi[r]) > tol for i in range(sd.dim) for r in range(sd.dim)
                )
            else:
                v_ok = any(_column_moments(law, i, vrow) > tol for i in range(sd.dim))
            wu |= bool(a_ok)
            varpos |= bool(v_ok)
            both |= bool(a_ok and v_ok)
        q = class_variance_sums(sd, law, j)
        hyp = {
            "wj_ulambda_nonzero": bool(wu),
            "var_vlambda_L_positive": bool(varpos),
            "lambda_condition": bool(both),
            "variance_bound_condition": bool(sum(q.values()) > tol),
            "boundary_variance_condition": bool(q[2] > tol),
            "wj_nonzero": bool(np.abs(w).max() > tol * max(1.0, np.abs(sd.A).max())),
            "real_boundary_eigenvalue": any(abs(e.lam.imag) == 0 for e in sd.sigma(2)),
        }
    return RegimeReport(case, float(sd.gamma), tuple(complex(sd.eigs[i].lam) for i in sd.Gamma), hyp)


class EllStar:
    """Maximal l with sigma_l > 0, or the 'none' sentinel (written -1/2)."""

    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value

    @property
    def is_none(self):
        return self.value is None

    @property
    def log_exponent(self):
        """Exponent of log_rho n in the CLT scale: l + 1/2, or 0 for the sentinel."""
        return 0.0 if self.value is None else self.value + 0.5

    def __float__(self):
        return -0.5 if self.value is None else float(self.value)

    def __eq__(self, other):
        if isinstance(other, EllStar):
            return self.value == other.value
        return float(self) == other

    def __hash__(self):
        return hash(self.value)

    def __repr__(self):
        return f"EllStar({float(self)})"


@dataclass
class VarianceProfile:
    spec: CharacteristicSpec
    x_grid: np.ndarray
    sigma_l: np.ndarray  # (J, len(x_grid) + 1); last column is x = 1
    sigma: np.ndarray  # (len(x_grid) + 1,)
    ell_star: EllStar
    regime: str
    hypotheses: dict
    rho: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def var_values(self):
        """Var[G(y)] on the grid closed by y = 1.

        Boundary noise entering at generation m + 1 reaches generation n through
        x_2 A_2^(n-m-1), one power of A fewer than the sigma_l display assumes,
        so the boundary-class variance carries one more factor 1/rho:
        rho^-(l+1) / ((2l+1) (l!)^2) sum Var[...] u.
        """
        if self.ell_star.is_none:
            return self.sigma
        return self.sigma_l[self.ell_star.value] / self.rho

    @property
    def var_poly(self):
        """Quadratic in y through the grid values (Var[G(y)] is exactly quadratic in y)."""
        ys = np.append(self.x_grid, 1.0)
        return np.polyfit(ys, self.var_values, 2)

    def var_G(self, y):
        """Var[G(y)] for real y, using G(y + 1) = sqrt(rho) G(y) in law."""
        y = np.asarray(y, dtype=float)
        fl = np.floor(y)
        return self.rho**fl * np.polyval(self.var_poly, y - fl)

    def to_dict(self):
        return {
            "x_grid": [float(x) for x in self.x_grid],
            "sigma_l": [[float(s) for s in row[:-1]] for row in self.sigma_l],
            "sigma": [float(s) for s in self.sigma[:-1]],
            "sigma_at_1": float(self.sigma[-1]),
            "ell_star": float(self.ell_star),
            "regime": self.regime,
            "hypotheses": self.hypotheses,
            "diagnostics": self.diagnostics,
        }


def variance_profile(sd, law, j, grid=DEFAULT_GRID, spec=None, eps_tail=EPS_TAIL):
    """sigma_l^2 and sigma^2 of ``spec`` (default Phi^j - rho u_j Phi^t) over x in [0, 1]."""
    if spec is None:
        spec = centered_spec(sd, j)
    xs = np.arange(grid) / grid
    ys = np.append(xs, 1.0)
    J = sd.dim
    sl = np.array([[sigma_l_sq(sd, law, spec.at(y), ell) for y in ys] for ell in range(J)])
    sig = []
    diag = None
    for y in ys:
        s, dg = sigma_sq(sd, law, spec.at(y), eps_tail=eps_tail, diagnostics=True)
        sig.append(s)
        diag = dg if diag is None or dg.tail_bound > diag.tail_bound else diag
    sig = np.array(sig)
    scale = max(1.0, float(np.abs(sig).max()), float(np.abs(sl).max()))
    positive = [ell for ell in range(J) if sl[ell].max() > 1e-12 * scale]
    ell_star = EllStar(max(positive) if positive else None)
    rep = regime(sd, law, j)
    prof = VarianceProfile(spec, xs, sl, sig, ell_star, rep.case, rep.hypotheses, sd.rho)
    resid = np.abs(np.polyval(prof.var_poly, ys) - prof.var_values).max()
    prof.diagnostics = {
        "series": diag.to_dict(),
        "quadratic_fit_residual": float(resid),
        "x_independent_ell_star": all(
            (sl[ell, :-1] > 1e-12 * scale).all() == (sl[ell, :-1] > 1e-12 * scale).any() for ell in range(J)
        ),
    }
    return prof


# ----------------------------------------------------- periodic scaling functions


def _frac(x):
    x = np.asarray(x, dtype=float)
    return x - np.floor(x)


def l_fun(lam, x):
    """l_lambda(x) = (1 + (lambda - 1){x}) lambda^{-{x}} (principal power)."""
    f = _frac(x)
    lam = complex(lam)
    out = (1 + (lam - 1) * f) * np.exp(-f * np.log(lam))
    return out.real if lam.imag == 0 and lam.real > 0 else out


def h_fun(rho, x):
    x = np.asarray(x, dtype=float)
    fl = np.floor(x)
    return fl + (rho ** (x - fl) - 1) / (rho - 1)


def h_inv(rho, x):
    x = np.asarray(x, dtype=float)
    fl = np.floor(x)
    return fl + np.log1p((rho - 1) * (x - fl)) / math.log(rho)


def log_rho(rho, z):
    return np.log(complex(z)) / math.log(rho)


@dataclass
class ScalingFunctions:
    rho: float
    profile: VarianceProfile
    Gamma: tuple

    def l(self, lam, x):
        return l_fun(lam, x)

    def h(self, x):
        return h_fun(self.rho, x)

    def h_inv(self, x):
        return h_inv(self.rho, x)

    def Uppsi(self, x):
        """((rho - 1) rho^{-{x}} Var[G(h({x}))])^{1/2}."""
        f = _frac(x)
        v = self.profile.var_G(h_fun(self.rho, f))
        return np.sqrt((self.rho - 1) * self.rho ** (-f) * v)

    def f(self, lam, x):
        """f_lambda(x) = l_lambda(h(x)) / l_rho(h(x))^{log_rho lambda}."""
        hx = h_fun(self.rho, _frac(x))
        e = log_rho(self.rho, lam)
        return l_fun(complex(lam), hx) / np.exp(e * np.log(l_fun(self.rho, hx)))


def scaling_functions(sd, profile):
    vals = profile.var_values
    if (vals <= 0).any():
        raise DegenerateVariance("the limiting variance vanishes on the x-grid")
    return ScalingFunctions(sd.rho, profile, tuple(sd.eigs[i].lam for i in sd.Gamma))


def T_n(rho, n, W):
    """log_rho(n (rho - 1) / W)."""
    return np.log(n * (rho - 1) / np.asarray(W, dtype=float)) / math.log(rho)


def clt_scale(sf, n, W):
    """sqrt(n) (log_rho n)^{l + 1/2} Uppsi(T_n)."""
    ex = sf.profile.ell_star.log_exponent
    return math.sqrt(n) * (math.log(n) / math.log(sf.rho)) ** ex * sf.Uppsi(T_n(sf.rho, n, W))


# ------------------------------------------------------------ case i expansion


def X_lambda(sd, j, idx, W, W_lam):
    e = sd.eigs[idx]
    lam = complex(e.lam)
    uj = e.u[j]
    coef = lam * uj - sd.rho * sd.u[j] * e.u.sum()
    return coef * ((sd.rho - 1) / np.asarray(W, dtype=float)) ** log_rho(sd.rho, lam) * np.asarray(W_lam) / (lam - 1)


def case_i_expansion(sd, j, n, W_hat, W_lambda_hats, sf=None):
    """sum over Gamma of n^{log_rho lambda} f_lambda(T_n) X_lambda (real).

    ``W_lambda_hats`` maps eigen-component indices in Gamma to estimates.
    """
    if not sd.all_Gamma_simple:
        raise GammaNotSimple("every eigenvalue in Gamma must be simple")
    rho = sd.rho
    T = T_n(rho, n, W_hat)
    total = 0.0
    for idx in sd.Gamma:
        lam = complex(sd.eigs[idx].lam)
        e = log_rho(rho, lam)
        hx = h_fun(rho, _frac(T))
        f = l_fun(lam, hx) / np.exp(e * np.log(l_fun(rho, hx)))
        total = total + np.exp(e * math.log(n)) * f * X_lambda(sd, j, idx, W_hat, W_lambda_hats[idx])
    # conjugate pairs in Gamma cancel the imaginary parts
    return np.real(total)


# ------------------------------------------------------------------ exports


def write_profile_json(profile, path):
    with open(path, "w") as fh:
        json.dump(profile.to_dict(), fh, indent=2)
        fh.write("\n")


def write_scaling_csv(sf, path, points=256):
    xs = np.arange(points) / points
    cols = {"x": xs, "Uppsi": sf.Uppsi(xs)}
    for k, lam in enumerate(sf.Gamma):
        if abs(lam) > math.sqrt(sf.rho):
            fv = sf.f(lam, xs)
            cols[f"f{k}_re"] = np.real(fv)
            cols[f"f{k}_im"] = np.imag(fv)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(cols))
        for r in range(points):
            w.writerow([f"{float(cols[c][r]):.12g}" for c in cols])
