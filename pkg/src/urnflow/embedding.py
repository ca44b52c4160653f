"""Branching-process view of the urn.

Every ball is an individual of a multitype Galton-Watson tree; the children of
an individual are the balls added when it is drawn. Each individual ``u`` of
generation ``g`` carries an independent uniform mark ``U_u`` and is counted at
the "time" ``g + U_u``. Drawing the balls of one urn in uniformly random order
is the same as drawing them in increasing order of their marks, so

    B_j(k) = Z^j(tau_k) + 1{j = j0},

where ``tau_k`` is the k-th counting time and ``Z^j(x)`` counts the type-j
children of the individuals counted by time ``x``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import streams
from .errors import BudgetExceeded, InsufficientDepth, NotReached
from .model import mean_matrix, sample_offspring, total_offspring
from .urn_sim import _draw_subset

DEFAULT_BUDGET = 10**7


@dataclass(frozen=True)
class CharacteristicSpec:
    """The characteristic ``a * Phi^t_x + b * Phi^j_x``.

    ``j`` is a 0-based type index and ``x >= 0`` the threshold; thresholds
    above 1 shift the count by whole generations.
    """

    a: float = 0.0
    b: float = 1.0
    j: int = 0
    x: float = 0.0

    def __post_init__(self):
        if self.a == 0 and self.b == 0:
            raise ValueError("characteristic needs (a, b) != (0, 0)")
        if self.x < 0:
            raise ValueError("threshold x must be >= 0")

    @classmethod
    def total(cls, x=0.0):
        return cls(1.0, 0.0, 0, x)

    @classmethod
    def type_count(cls, j, x=0.0):
        return cls(0.0, 1.0, j, x)

    @classmethod
    def centered(cls, j, rho_uj, x=0.0):
        """``Phi^j - rho u_j Phi^t``, the characteristic behind the CLT for B_j."""
        return cls(-float(rho_uj), 1.0, j, x)

    def at(self, x):
        return CharacteristicSpec(self.a, self.b, self.j, float(x))


@dataclass
class GenerationRecord:
    depth: int
    Z: np.ndarray
    types: np.ndarray
    marks: np.ndarray
    offspring: np.ndarray

    @property
    def size(self):
        return int(self.types.size)


@dataclass
class Tree:
    J: int
    j0: int
    generations: list
    rho: float
    v: np.ndarray
    seed: int | None = None
    _cum: np.ndarray | None = field(default=None, repr=False)

    @property
    def depth(self):
        return len(self.generations) - 1

    @property
    def survived(self):
        return self.generations[-1].size > 0

    @property
    def next_Z(self):
        """Z at depth + 1, known from the offspring of the last generation."""
        return self.generations[-1].offspring.sum(axis=0)

    def cumulative(self):
        """cum[g] = number of individuals in generations 0..g-1."""
        if self._cum is None:
            sizes = [g.size for g in self.generations]
            self._cum = np.concatenate([[0], np.cumsum(sizes)])
        return self._cum

    def W_hat(self):
        n = self.depth + 1
        return float(self.rho ** (-n) * (self.v @ self.next_Z))

    def summary(self):
        return {
            "J": self.J,
            "j0": self.j0 + 1,
            "seed": self.seed,
            "Z": [[int(z) for z in g.Z] for g in self.generations] + [[int(z) for z in self.next_Z]],
            "W_hat": self.W_hat(),
            "survived": bool(self.next_Z.sum() > 0),
        }

    def to_json(self, path=None):
        text = json.dumps(self.summary(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _perron_rho_v(law):
    from .spectral import _quiet_perron

    if "perron" not in law._cache:
        p = _quiet_perron(mean_matrix(law))
        law._cache["perron"] = (p.rho, p.v)
    return law._cache["perron"]


def grow_tree(law, j0, depth, rng, budget=DEFAULT_BUDGET, seed=None):
    """Generations ``0..depth`` with explicit types, marks and offspring."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if not 0 <= j0 < law.J:
        raise ValueError(f"j0={j0} outside [0, {law.J})")
    rho, v = _perron_rho_v(law)
    types = np.array([j0], dtype=np.int64)
    gens = []
    total = 0
    for k in range(depth + 1):
        total += types.size
        if total > budget:
            raise BudgetExceeded(f"tree exceeds {budget} individuals at depth {k}", reached=total)
        marks = rng.random(types.size)
        off = sample_offspring(law, types, rng)
        Z = np.bincount(types, minlength=law.J).astype(np.int64)
        gens.append(GenerationRecord(k, Z, types, marks, off))
        n_kids = off.sum(axis=0)
        if n_kids.sum() + total > budget and k < depth:
            raise BudgetExceeded(f"tree exceeds {budget} individuals at depth {k + 1}", reached=int(n_kids.sum() + total))
        # children listed parent by parent, type by type
        types = np.repeat(np.tile(np.arange(law.J), types.size), off.ravel())
    return Tree(law.J, j0, gens, rho, v, seed)


def simulate_tree(law, j0, depth, seed, budget=DEFAULT_BUDGET):
    """Seeded tree of depth ``depth`` (0-based root type ``j0``)."""
    return grow_tree(law, j0, depth, streams.rng(seed, streams.TREE), budget=budget, seed=seed)


def cmj_count(tree, spec):
    """a * Zt(x) + b * Zj(x) for ``spec``'s threshold x.

    Zt(x) counts the individuals u with |u| + U_u <= x; Zj(x) counts the type-j
    children of those same individuals.
    """
    n = math.floor(spec.x)
    if n > tree.depth:
        raise InsufficientDepth(f"threshold {spec.x} needs depth >= {n}, tree has {tree.depth}")
    zt = 0.0
    zj = 0.0
    for g in tree.generations[:n]:
        zt += g.size
        zj += g.offspring[:, spec.j].sum() if g.size else 0
    g = tree.generations[n]
    # compare n + U with x itself so that x = tau_k (computed as n + U) counts exactly
    sel = (n + g.marks) <= spec.x
    zt += sel.sum()
    zj += g.offspring[sel, spec.j].sum() if g.size else 0
    return spec.a * zt + spec.b * zj


def _order(gen):
    # stable sort: equal marks are broken by position within the generation
    return np.argsort(gen.marks, kind="stable")


def tau(tree, k):
    """Smallest x with Zt(x) = k."""
    if k == 0:
        return 0.0
    cum = tree.cumulative()
    if k > cum[-1]:
        raise NotReached(f"tree holds {cum[-1]} individuals, fewer than k={k}")
    g = int(np.searchsorted(cum, k, side="left")) - 1
    gen = tree.generations[g]
    r = k - cum[g]
    return g + float(gen.marks[_order(gen)[r - 1]])


def B_via_embedding(tree, k, j=None):
    """B(k) read off the tree; ``j=None`` returns the full vector."""
    B = np.zeros(tree.J, dtype=np.int64)
    B[tree.j0] = 1
    if k > 0:
        cum = tree.cumulative()
        if k > cum[-1]:
            raise NotReached(f"tree holds {cum[-1]} individuals, fewer than k={k}")
        g = int(np.searchsorted(cum, k, side="left")) - 1
        for gen in tree.generations[:g]:
            B += gen.offspring.sum(axis=0)
        gen = tree.generations[g]
        r = k - cum[g]
        B += gen.offspring[_order(gen)[:r]].sum(axis=0)
    return B if j is None else int(B[j])


def embedding_batch(law, j0, k, R, rng):
    """B(k) from ``R`` independent marked trees, grown only as far as needed.

    Returns ``(B, extinct)``; ``B`` has shape (R, J). A tree that dies out
    before holding ``k`` individuals is flagged and reports its final B.
    """
    J = law.J
    B = np.zeros((R, J), dtype=np.int64)
    B[:, j0] = 1
    need = np.full(R, k, dtype=np.int64)
    extinct = np.zeros(R, dtype=bool)
    rep = np.arange(R)
    types = np.full(R, j0, dtype=np.int64)
    while rep.size:
        marks = rng.random(rep.size)
        off = sample_offspring(law, types, rng)
        order = np.lexsort((marks, rep))
        rep_s, off_s = rep[order], off[order]
        starts = np.searchsorted(rep_s, rep_s, side="left")
        rank = np.arange(rep_s.size) - starts
        take = rank < need[rep_s]
        np.add.at(B, rep_s[take], off_s[take])
        size = np.bincount(rep_s, minlength=R)
        need = np.maximum(need - size, 0)
        # the next generation is needed only by trees still short of k
        keep = need[rep_s] > 0
        n_kids = off_s[keep]
        kid_rep = np.repeat(rep_s[keep], n_kids.sum(axis=1))
        kid_types = np.repeat(np.tile(np.arange(J), n_kids.shape[0]), n_kids.ravel())
        alive = np.zeros(R, dtype=bool)
        alive[kid_rep] = True
        extinct |= (need > 0) & ~alive
        rep, types = kid_rep, kid_types
    return B, extinct


@dataclass
class DeepSample:
    """Per-replicate output of :func:`deep_sample` (arrays over replicates)."""

    n: int
    B: np.ndarray
    tau: np.ndarray
    gen: np.ndarray
    Z_final: np.ndarray
    depth: int
    survived: np.ndarray
    rho: float
    v: np.ndarray

    @property
    def W_hat(self):
        return self.rho ** (-self.depth) * (self.Z_final @ self.v)


def default_depth(rho, n, pop_cap=1e12):
    """Depth for the W estimate: log_rho(n) + 10 generations, limited by ``pop_cap``."""
    want = math.ceil(math.log(max(n, 2)) / math.log(rho)) + 10
    cap = int(math.log(pop_cap) / math.log(rho))
    return max(min(want, cap), math.ceil(math.log(max(n, 2)) / math.log(rho)) + 1)


def deep_sample(law, j0, n, R, rng, depth=None):
    """B(n), tau_n and Z at a deep generation for ``R`` replicates, by counts only.

    Within a generation the marks are i.i.d., so the ``r`` individuals counted
    first form a uniform subset (a multivariate hypergeometric draw of the
    generation's type counts), and the r-th smallest of ``s`` uniforms is
    Beta(r, s - r + 1). This gives the exact joint law of (B(n), tau_n, Z_depth)
    without storing individuals.
    """
    rho, v = _perron_rho_v(law)
    J = law.J
    if depth is None:
        depth = default_depth(rho, n)
    Z = np.zeros((R, J), dtype=np.int64)
    Z[:, j0] = 1
    Bacc = Z.copy()
    B = np.zeros((R, J), dtype=np.int64)
    tau_n = np.full(R, np.nan)
    gen_n = np.full(R, -1, dtype=np.int64)
    C = np.zeros(R, dtype=np.int64)
    done = np.zeros(R, dtype=bool)
    g = 0
    while True:
        size = Z.sum(axis=1)
        hit = ~done & (C + size >= n)
        if n == 0:
            hit = ~done
        r = np.where(hit, n - C, 0)
        chosen = np.zeros_like(Z)
        if hit.any():
            # only generations that contain the n-th count are split; these hold
            # at most a few multiples of n individuals
            chosen[hit] = _draw_subset(Z[hit], r[hit], rng)
        kids_c = total_offspring(law, chosen, rng)
        kids_r = total_offspring(law, Z - chosen, rng)
        if hit.any():
            idx = np.flatnonzero(hit)
            B[idx] = Bacc[idx] + kids_c[idx]
            rr = r[idx]
            tau_n[idx] = g + np.where(rr > 0, rng.beta(np.maximum(rr, 1), size[idx] - rr + 1), 0.0)
            gen_n[idx] = g
            done |= hit
        Z = kids_c + kids_r
        Bacc[~done] += Z[~done]
        C += size
        g += 1
        dead = ~done & (Z.sum(axis=1) == 0)
        if dead.any():
            B[dead] = Bacc[dead]
            done |= dead
        if done.all() and g >= depth:
            break
        if Z.sum(axis=1).max() > 2**62 // max(law.max_offspring, 1):
            raise BudgetExceeded("population counts would overflow int64", reached=int(Z.sum(axis=1).max()))
    survived = (gen_n >= 0) & (Z.sum(axis=1) > 0)
    return DeepSample(n, B, tau_n, gen_n, Z, g, survived, rho, v)
