r"""Spectral analysis of the mean replacement matrix.

Eigenvalues are located as roots of the characteristic polynomial, which is
built exactly over the rationals (every double is a rational number) and split
into square-free factors, so algebraic multiplicities are exact for integer and
rational inputs. Spectral projections are evaluated as Hermite interpolation
polynomials in ``A``; this treats defective matrices (nonzero nilpotent parts)
the same way as diagonalizable ones.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np
import sympy

from .errors import ClusterAmbiguity, Degenerate, NotPrimitiveWarning, OnSqrtRhoAmbiguity

EPS_SPEC = 1e-9
CLUSTER_REL = 1e-8
CLASS_REL = 1e-9
# moduli in [CLASS_REL, GRAY_REL) * sqrt(rho) away from sqrt(rho) are refused
GRAY_REL = 1e-6
EXACT_MAX_DIM = 12

ABOVE = "above_sqrt_rho"
ON = "on_sqrt_rho"
BELOW = "below_sqrt_rho"
PERRON = "perron"

REGIME_NAMES = {"case_i_above": "above", "case_ii_boundary": "boundary", "case_iii_below": "below"}


class Perron(NamedTuple):
    rho: float
    u: np.ndarray
    v: np.ndarray
    primitive: bool


@dataclass(frozen=True, eq=False)
class EigenComponent:
    """One eigenvalue with its spectral projection and nilpotent part."""

    lam: complex
    multiplicity: int
    pi: np.ndarray
    N: np.ndarray
    d: int
    class_label: str
    simple: bool
    u: np.ndarray | None = None
    v: np.ndarray | None = None
    # sigma class by modulus (1, 2 or 3); the Perron root carries class 1 when rho > 1
    sigma: int = 3


@dataclass(frozen=True, eq=False)
class SpectralData:
    A: np.ndarray
    dim: int
    rho: float
    u: np.ndarray
    v: np.ndarray
    eigs: tuple
    gamma: float
    Gamma: tuple
    pi1: np.ndarray
    pi2: np.ndarray
    pi3: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    primitive: bool
    perron_index: int
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def A1_inv(self):
        if "A1_inv" not in self._cache:
            self._cache["A1_inv"] = np.linalg.inv(self.A1)
        return self._cache["A1_inv"]

    @property
    def A2_inv(self):
        if "A2_inv" not in self._cache:
            self._cache["A2_inv"] = np.linalg.inv(self.A2)
        return self._cache["A2_inv"]

    def sigma(self, cls):
        """Eigen-components whose modulus class is ``cls`` (1, 2 or 3)."""
        return [e for e in self.eigs if e.sigma == cls]

    @property
    def perron_component(self):
        return self.eigs[self.perron_index]

    @property
    def all_Gamma_simple(self):
        return all(self.eigs[i].simple for i in self.Gamma)

    @property
    def regime(self):
        return regime_of(self)

    def to_json(self):
        return {
            "rho": float(self.rho),
            "u": [float(x) for x in self.u],
            "v": [float(x) for x in self.v],
            "eigenvalues": [
                {
                    "re": float(e.lam.real),
                    "im": float(e.lam.imag),
                    "multiplicity": e.multiplicity,
                    "d": e.d,
                    "class": e.class_label,
                    "simple": e.simple,
                }
                for e in self.eigs
            ],
            "gamma": float(self.gamma),
            "Gamma": list(self.Gamma),
            "regime": REGIME_NAMES[self.regime],
        }


def _as_matrix(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError("mean matrix must be square with J >= 1")
    return A


def is_primitive(A):
    """Wielandt test: some power A^m, m <= J^2 - 2J + 2, is entrywise positive."""
    A = _as_matrix(A)
    J = A.shape[0]
    pattern = (A > 0).astype(np.int64)
    power = pattern.copy()
    for _ in range(max(1, J * J - 2 * J + 2)):
        if power.all():
            return True
        power = ((power @ pattern) > 0).astype(np.int64)
    return bool(power.all())


def _exact_roots(A):
    """Roots with algebraic multiplicities from the exact characteristic polynomial."""
    J = A.shape[0]
    M = sympy.Matrix(J, J, [sympy.Rational(Fraction(float(a))) for a in A.ravel()])
    lam = sympy.Symbol("lam")
    poly = sympy.Poly(M.charpoly(lam).as_expr(), lam)
    _, factors = sympy.sqf_list(poly)
    roots = []
    for factor, mult in factors:
        factor = sympy.Poly(factor, lam)
        if factor.degree() == 0:
            continue
        for r in factor.nroots(n=30, maxsteps=200):
            z = complex(r)
            roots.append((z, int(mult)))
    return roots


def _numeric_roots(A):
    return [(complex(z), 1) for z in np.linalg.eigvals(A)]


def _cluster(roots, tol):
    """Merge roots closer than ``tol`` (single linkage), summing multiplicities."""
    groups = []
    for z, m in sorted(roots, key=lambda t: (t[0].real, t[0].imag)):
        for g in groups:
            if any(abs(z - w) < tol for w, _ in g):
                g.append((z, m))
                break
        else:
            groups.append([(z, m)])
    merged = []
    for g in groups:
        mult = sum(m for _, m in g)
        centre = sum(z * m for z, m in g) / mult
        merged.append((centre, mult))
    for a in range(len(merged)):
        for b in range(a + 1, len(merged)):
            if abs(merged[a][0] - merged[b][0]) < 10 * tol:
                raise ClusterAmbiguity(
                    f"eigenvalues {merged[a][0]} and {merged[b][0]} are within 10*eps_cluster"
                )
    return merged


def _symmetrize_conjugates(eigs, tol):
    """Snap near-real roots to the real axis and pair complex roots exactly."""
    out = []
    for z, m in eigs:
        if abs(z.imag) < tol:
            z = complex(z.real, 0.0)
        out.append((z, m))
    upper = [(z, m) for z, m in out if z.imag > 0]
    real = [(z, m) for z, m in out if z.imag == 0]
    paired = []
    for z, m in upper:
        paired.append((z, m))
        paired.append((z.conjugate(), m))
    return real + paired


def eigenvalues(A):
    """Distinct eigenvalues of ``A`` with algebraic multiplicities."""
    A = _as_matrix(A)
    scale = max(np.abs(A).max(), 1e-300)
    tol = CLUSTER_REL * max(np.linalg.norm(A), 1e-300)
    roots = _exact_roots(A) if A.shape[0] <= EXACT_MAX_DIM else _numeric_roots(A)
    merged = _cluster(roots, tol)
    merged = _symmetrize_conjugates(merged, 1e-12 * scale)
    return merged


def hermite_projection(A, eigs, target):
    r"""Evaluate the spectral projection onto ``eigs[target]`` as a polynomial in ``A``.

    The polynomial equals 1 at the target eigenvalue, 0 at every other one, and
    its derivatives up to the algebraic multiplicity minus one vanish everywhere.
    """
    A = _as_matrix(A)
    J = A.shape[0]
    lams = np.array([z for z, _ in eigs], dtype=complex)
    centre = lams.mean()
    scale = max(np.abs(lams - centre).max(), 1.0)
    # interpolate in the shifted and scaled variable for conditioning
    nodes = (lams - centre) / scale
    V = np.zeros((J, J), dtype=complex)
    rhs = np.zeros(J, dtype=complex)
    row = 0
    for s, (_, mult) in enumerate(eigs):
        for r in range(mult):
            for k in range(r, J):
                V[row, k] = math.perm(k, r) * nodes[s] ** (k - r)
            rhs[row] = 1.0 if (s == target and r == 0) else 0.0
            row += 1
    coef = np.linalg.solve(V, rhs)
    B = (A - centre * np.eye(J)) / scale
    # Horner evaluation of the matrix polynomial
    P = coef[-1] * np.eye(J, dtype=complex)
    for c in coef[-2::-1]:
        P = P @ B + c * np.eye(J, dtype=complex)
    return P


def _nilpotency_index(N, norm_A):
    J = N.shape[0]
    power = np.eye(J, dtype=complex)
    d = 0
    for k in range(1, J + 1):
        power = power @ N
        if np.abs(power).max() <= EPS_SPEC * max(1.0, norm_A) ** k:
            return d
        d = k
    return d


def perron(A):
    """Perron root with right eigenvector summing to one and left eigenvector with v.u = 1.

    Warns with :class:`NotPrimitiveWarning` when ``A`` is not primitive and
    raises :class:`Degenerate` when the spectral radius vanishes.
    """
    A = _as_matrix(A)
    if (A < 0).any():
        raise ValueError("mean matrix must be entrywise nonnegative")
    eigs = eigenvalues(A)
    rho = max(abs(z) for z, _ in eigs)
    if rho <= 1e-14 * max(1.0, np.abs(A).max()):
        raise Degenerate("spectral radius is zero")
    rho = float(rho)
    u = _null_vector(A - rho * np.eye(A.shape[0]))
    v = _null_vector((A - rho * np.eye(A.shape[0])).T)
    u = u / u.sum()
    v = v / (v @ u)
    primitive = is_primitive(A)
    if not primitive:
        warnings.warn("mean matrix is not primitive", NotPrimitiveWarning, stacklevel=2)
    if primitive:
        u, v = np.abs(u), np.abs(v)
    return Perron(rho, u, v, primitive)


def _null_vector(M):
    _, _, vh = np.linalg.svd(M)
    x = vh[-1].real
    if x.sum() < 0:
        x = -x
    # reducible matrices can carry exact zeros; clear round-off noise
    x[np.abs(x) < 1e-14 * np.abs(x).max()] = 0.0
    return x


def _modulus_class(lam, rho, assert_on_boundary):
    root = math.sqrt(rho)
    gap = abs(abs(lam) - root)
    if gap < CLASS_REL * root:
        return 2
    if assert_on_boundary and abs(abs(lam) ** 2 - rho) < 1e-6:
        return 2
    if gap < GRAY_REL * root:
        raise OnSqrtRhoAmbiguity(
            f"|{lam}| is within {gap:.3g} of sqrt(rho)={root}; pass assert_on_boundary to force"
        )
    return 1 if abs(lam) > root else 3


def decompose(A, assert_on_boundary=False):
    """Full spectral data of a nonnegative mean matrix."""
    A = _as_matrix(A)
    J = A.shape[0]
    pf = perron(A) if is_primitive(A) else _quiet_perron(A)
    eigs = eigenvalues(A)
    rho = pf.rho
    perron_index = int(np.argmin([abs(z - rho) for z, _ in eigs]))
    norm_A = np.linalg.norm(A)
    comps = []
    for idx, (lam, mult) in enumerate(eigs):
        if lam.imag < 0:
            # conjugate of the previous component, exactly
            twin = comps[-1]
            comps.append(
                EigenComponent(
                    lam=lam,
                    multiplicity=mult,
                    pi=twin.pi.conj(),
                    N=twin.N.conj(),
                    d=twin.d,
                    class_label=twin.class_label,
                    simple=twin.simple,
                    u=None if twin.u is None else twin.u.conj(),
                    v=None if twin.v is None else twin.v.conj(),
                    sigma=twin.sigma,
                )
            )
            continue
        pi = hermite_projection(A, eigs, idx)
        if lam.imag == 0:
            pi = pi.real.astype(complex)
        N = (A - lam * np.eye(J)) @ pi
        d = _nilpotency_index(N, norm_A)
        sigma = _modulus_class(lam, rho, assert_on_boundary)
        if idx == perron_index:
            label = PERRON
        else:
            label = {1: ABOVE, 2: ON, 3: BELOW}[sigma]
        simple = mult == 1
        u = v = None
        if idx == perron_index:
            u = pf.u.astype(complex)
            v = pf.v.astype(complex)
        elif simple:
            col = int(np.argmax(np.linalg.norm(pi, axis=0)))
            u = pi[:, col] / np.linalg.norm(pi[:, col])
            v = (u.conj() @ pi) / (u.conj() @ u)
        comps.append(EigenComponent(lam, mult, pi, N, d, label, simple, u, v, sigma))
    others = [i for i in range(len(comps)) if i != perron_index]
    if others:
        gamma = max(abs(comps[i].lam) for i in others)
        tol = CLUSTER_REL * max(norm_A, 1.0)
        Gamma = tuple(i for i in others if abs(abs(comps[i].lam) - gamma) < tol)
    else:
        gamma, Gamma = 0.0, ()
    I = np.eye(J, dtype=complex)
    pis = {c: sum((e.pi for e in comps if e.sigma == c), np.zeros((J, J), complex)) for c in (1, 2, 3)}
    A1 = A @ pis[1] + (I - pis[1])
    A2 = A @ pis[2] + (I - pis[2])
    return SpectralData(
        A=A,
        dim=J,
        rho=rho,
        u=pf.u,
        v=pf.v,
        eigs=tuple(comps),
        gamma=float(gamma),
        Gamma=Gamma,
        pi1=pis[1],
        pi2=pis[2],
        pi3=pis[3],
        A1=A1,
        A2=A2,
        primitive=pf.primitive,
        perron_index=perron_index,
    )


def _quiet_perron(A):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotPrimitiveWarning)
        return perron(A)


class Classification(NamedTuple):
    sigma1: list
    sigma2: list
    sigma3: list
    gamma: float
    Gamma: tuple
    all_Gamma_simple: bool


def classify(sd):
    """Partition of the spectrum by modulus relative to sqrt(rho), plus (gamma, Gamma)."""
    return Classification(
        [e.lam for e in sd.sigma(1)],
        [e.lam for e in sd.sigma(2)],
        [e.lam for e in sd.sigma(3)],
        sd.gamma,
        tuple(sd.eigs[i].lam for i in sd.Gamma),
        sd.all_Gamma_simple,
    )


def regime_of(sd):
    """Trichotomy case decided by the class of the eigenvalues attaining gamma."""
    if not sd.Gamma:
        return "case_iii_below"
    cls = sd.eigs[sd.Gamma[0]].sigma
    return {1: "case_i_above", 2: "case_ii_boundary", 3: "case_iii_below"}[cls]


def check_identities(sd):
    """Residuals of the defining matrix identities (all should be <= EPS_SPEC scale)."""
    A = sd.A
    J = sd.dim
    I = np.eye(J)
    pis = [e.pi for e in sd.eigs]
    out = {}
    out["partition"] = np.abs(sum(pis) - I).max()
    recon = sum(e.lam * e.pi + e.N for e in sd.eigs)
    out["reconstruction"] = np.abs(A - recon).max() / max(np.abs(A).max(), 1.0)
    out["idempotence"] = max(np.abs(p @ p - p).max() for p in pis)
    out["orthogonality"] = max(
        (np.abs(pis[a] @ pis[b]).max() for a in range(len(pis)) for b in range(len(pis)) if a != b),
        default=0.0,
    )
    out["commute"] = max(np.abs(A @ p - p @ A).max() for p in pis)
    nil = 0.0
    for e in sd.eigs:
        P = np.linalg.matrix_power(e.N, e.d + 1)
        nil = max(nil, np.abs(P).max() / max(1.0, np.linalg.norm(A)) ** (e.d + 1))
    out["nilpotency"] = nil
    out["perron"] = np.abs(sd.perron_component.pi - np.outer(sd.u, sd.v)).max()
    out["A1_inverse"] = np.abs(sd.A1 @ sd.A1_inv - I).max()
    out["A2_inverse"] = np.abs(sd.A2 @ sd.A2_inv - I).max()
    return out
