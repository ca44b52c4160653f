"""Replacement laws: validation, moments, assumption checks, sampling and exact enumeration."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import spectral
from .errors import BudgetExceeded, Degenerate, InvalidLaw

MAX_DENOMINATOR = 2**32
DEFAULT_LEAF_BUDGET = 10**6


def _exact_prob(p):
    """Return a Fraction when ``p`` is a rational with denominator <= 2**32, else None."""
    if isinstance(p, Fraction):
        return p if p.denominator <= MAX_DENOMINATOR else None
    if isinstance(p, str):
        f = Fraction(p)
        return f if f.denominator <= MAX_DENOMINATOR else None
    if isinstance(p, int):
        return Fraction(p)
    f = Fraction(p).limit_denominator(MAX_DENOMINATOR)
    return f if abs(float(f) - float(p)) <= 1e-15 * max(1.0, abs(float(p))) else None


@dataclass(frozen=True, eq=False)
class ReplacementLaw:
    """Law of a random J x J replacement matrix with independent columns.

    ``offspring[j]`` is a (K_j, J) integer array whose rows are the possible
    values of column ``j`` (the children a type-``j`` ball adds), and
    ``probs[j]`` holds their probabilities.
    """

    J: int
    offspring: tuple
    probs: tuple
    exact_probs: tuple | None = None
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_columns(cls, columns, name=""):
        """Build from ``columns[j] = [(offspring_vector, prob), ...]``."""
        J = len(columns)
        if J < 1:
            raise InvalidLaw("a law needs at least one type")
        offspring, probs, exact = [], [], []
        all_exact = True
        for j, col in enumerate(columns):
            if len(col) == 0:
                raise InvalidLaw(f"column {j} has no outcomes")
            rows, ps, fs = [], [], []
            for vec, p in col:
                vec = list(vec)
                if len(vec) != J:
                    raise InvalidLaw(f"column {j}: offspring vector of length {len(vec)}, expected {J}")
                if any((not float(x).is_integer()) or x < 0 for x in vec):
                    raise InvalidLaw(f"column {j}: offspring entries must be nonnegative integers")
                pf = float(Fraction(p)) if isinstance(p, str) else float(p)
                if not (0.0 < pf <= 1.0):
                    raise InvalidLaw(f"column {j}: probability {p} outside (0, 1]")
                rows.append([int(x) for x in vec])
                ps.append(pf)
                f = _exact_prob(p)
                if f is None:
                    all_exact = False
                fs.append(f)
            if abs(sum(ps) - 1.0) > 1e-12:
                raise InvalidLaw(f"column {j}: probabilities sum to {sum(ps)!r}")
            if all_exact and sum(fs) != 1:
                all_exact = False
            offspring.append(np.array(rows, dtype=np.int64))
            probs.append(np.array(ps, dtype=float))
            exact.append(tuple(fs))
        return cls(J, tuple(offspring), tuple(probs), tuple(exact) if all_exact else None, name)

    @classmethod
    def from_dict(cls, data, name=""):
        J = int(data["J"])
        cols = [[(o["offspring"], o["prob"]) for o in col] for col in data["columns"]]
        if len(cols) != J:
            raise InvalidLaw(f"J={J} but {len(cols)} columns given")
        return cls.from_columns(cols, name=name or data.get("name", ""))

    @classmethod
    def deterministic(cls, L, name=""):
        """Law with the single outcome ``L`` (columns are the offspring vectors)."""
        L = np.asarray(L)
        return cls.from_columns([[(L[:, j].tolist(), 1)] for j in range(L.shape[1])], name=name)

    def to_dict(self):
        cols = []
        for j in range(self.J):
            col = []
            for k, row in enumerate(self.offspring[j]):
                if self.exact_probs is not None:
                    f = self.exact_probs[j][k]
                    p = int(f) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"
                else:
                    p = float(self.probs[j][k])
                col.append({"offspring": [int(x) for x in row], "prob": p})
            cols.append(col)
        out = {"J": self.J, "columns": cols}
        if self.name:
            out["name"] = self.name
        return out

    @property
    def is_deterministic(self):
        return all(len(p) == 1 for p in self.probs)

    @property
    def max_offspring(self):
        return max(int(o.sum(axis=1).max()) for o in self.offspring)


def load_law(path):
    path = Path(path)
    with open(path) as fh:
        return ReplacementLaw.from_dict(json.load(fh), name=path.stem)


def save_law(law, path):
    with open(path, "w") as fh:
        json.dump(law.to_dict(), fh, indent=2)


def mean_matrix(law):
    """A with A[i, j] = E[number of type-i children of a type-j ball]."""
    if "A" not in law._cache:
        A = np.empty((law.J, law.J))
        for j in range(law.J):
            A[:, j] = law.probs[j] @ law.offspring[j]
        law._cache["A"] = A
    return law._cache["A"].copy()


def covariance(law, j):
    """Covariance matrix of column ``j``."""
    X = law.offspring[j].astype(float)
    p = law.probs[j]
    mu = p @ X
    D = X - mu
    return (D * p[:, None]).T @ D


@dataclass(frozen=True)
class AssumptionReport:
    gw1: bool
    gw2: bool
    gw3: bool
    gw4: bool
    moment_2_plus_delta: bool
    notes: tuple = ()

    def to_dict(self):
        return {
            "gw1": self.gw1,
            "gw2": self.gw2,
            "gw3": self.gw3,
            "gw4": self.gw4,
            "moment_2_plus_delta": self.moment_2_plus_delta,
            "notes": list(self.notes),
        }


def check_assumptions(law):
    A = mean_matrix(law)
    notes = []
    try:
        rho = spectral._quiet_perron(A).rho
    except Degenerate:
        rho = 0.0
        notes.append("spectral radius is zero")
    gw1 = rho > 1.0
    if not gw1:
        notes.append(f"rho={rho:.6g} <= 1: not supercritical")
    gw2 = spectral.is_primitive(A)
    if not gw2:
        notes.append("mean matrix is not positively regular")
    cov = sum(covariance(law, j) for j in range(law.J))
    gw3 = bool(np.abs(cov).max() > 0)
    if not gw3:
        notes.append("sum of column covariances vanishes")
    # finite support makes every moment finite
    return AssumptionReport(gw1, gw2, gw3, True, True, tuple(notes))


def sample_column(law, j, rng):
    """One draw of column ``j``."""
    k = rng.choice(len(law.probs[j]), p=law.probs[j])
    return law.offspring[j][k].copy()


def sample_offspring(law, types, rng):
    """Offspring vectors for an array of parent types, shape (len(types), J)."""
    types = np.asarray(types, dtype=np.int64)
    out = np.zeros((types.size, law.J), dtype=np.int64)
    for j in range(law.J):
        idx = np.flatnonzero(types == j)
        if idx.size == 0:
            continue
        if len(law.probs[j]) == 1:
            out[idx] = law.offspring[j][0]
        else:
            cdf = np.cumsum(law.probs[j])
            cdf[-1] = 1.0
            k = np.searchsorted(cdf, rng.random(idx.size), side="right")
            out[idx] = law.offspring[j][k]
    return out


def total_offspring(law, counts, rng):
    """Summed offspring of ``counts[..., j]`` independent type-j parents.

    ``counts`` has trailing dimension J; the result has the same shape. Each
    column law is finite, so the sum is a multinomial mixture of its outcomes.
    """
    counts = np.asarray(counts, dtype=np.int64)
    out = np.zeros(counts.shape, dtype=np.int64)
    for j in range(law.J):
        m = counts[..., j]
        if len(law.probs[j]) == 1:
            out += m[..., None] * law.offspring[j][0]
            continue
        if not m.any():
            continue
        k = rng.multinomial(m, law.probs[j])
        out += k @ law.offspring[j]
    return out


def _urn_step_outcomes(law, state, exact):
    """Successor states of one draw, with their transition probabilities."""
    active, passive, B = state
    total = sum(active)
    J = law.J
    for i in range(J):
        if active[i] == 0:
            continue
        p_draw = Fraction(active[i], total) if exact else active[i] / total
        act = list(active)
        act[i] -= 1
        for k, row in enumerate(law.offspring[i]):
            q = law.exact_probs[i][k] if exact else law.probs[i][k]
            pas = [passive[t] + int(row[t]) for t in range(J)]
            newB = tuple(B[t] + int(row[t]) for t in range(J))
            a, b = act, pas
            if sum(a) == 0:
                a, b = b, [0] * J
            yield (tuple(a), tuple(b), newB), p_draw * q


def exact_distribution(law, j0, n, budget=DEFAULT_LEAF_BUDGET):
    """Exact law of B(n) started from one type-``j0`` ball (0-based type index).

    Urn configurations are merged whenever they coincide, so the work is bounded
    by the number of distinct (urn contents, B) states. Probabilities are
    Fractions when every input probability is rational with denominator <= 2**32.

    Returns a list of ``(B tuple, probability)`` sorted by ``B``.
    """
    if not 0 <= j0 < law.J:
        raise ValueError(f"j0={j0} outside [0, {law.J})")
    exact = law.exact_probs is not None
    one = Fraction(1) if exact else 1.0
    e = tuple(1 if t == j0 else 0 for t in range(law.J))
    states = {(e, (0,) * law.J, e): one}
    for _ in range(n):
        nxt = {}
        for state, p in states.items():
            if sum(state[0]) == 0:
                # extinct: B(n) = B(n0) from now on
                nxt[state] = nxt.get(state, 0) + p
                continue
            for s2, q in _urn_step_outcomes(law, state, exact):
                nxt[s2] = nxt.get(s2, 0) + p * q
            if len(nxt) > budget:
                raise BudgetExceeded(f"more than {budget} urn states", reached=len(nxt))
        states = nxt
    dist = {}
    for (_, _, B), p in states.items():
        dist[B] = dist.get(B, 0) + p
    return sorted(dist.items())


def exact_state_distribution(law, j0, n, budget=DEFAULT_LEAF_BUDGET):
    """Like :func:`exact_distribution` but keeps the full urn state ``(active, passive, B)``."""
    exact = law.exact_probs is not None
    one = Fraction(1) if exact else 1.0
    e = tuple(1 if t == j0 else 0 for t in range(law.J))
    states = {(e, (0,) * law.J, e): one}
    for _ in range(n):
        nxt = {}
        for state, p in states.items():
            if sum(state[0]) == 0:
                nxt[state] = nxt.get(state, 0) + p
                continue
            for s2, q in _urn_step_outcomes(law, state, exact):
                nxt[s2] = nxt.get(s2, 0) + p * q
        if len(nxt) > budget:
            raise BudgetExceeded(f"more than {budget} urn states", reached=len(nxt))
        states = nxt
    return states


def write_distribution_csv(dist, path, J):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"B_{i + 1}" for i in range(J)] + ["prob"])
        for B, p in dist:
            w.writerow(list(B) + [str(p)])
