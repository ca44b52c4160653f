"""Direct simulation of the two alternating urns.

Balls are drawn without replacement from the active urn; every drawn type-i
ball deposits an independent copy of column ``L^(i)`` into the other urn, and
the urns swap once the active one is empty. Only per-type counts are stored:
balls of one type inside an urn are exchangeable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import streams
from .errors import AlreadyExtinct
from .model import mean_matrix, sample_column, total_offspring


@dataclass
class UrnState:
    counts_active: np.ndarray
    counts_passive: np.ndarray
    B: np.ndarray
    active_is_u1: bool = True
    draws: int = 0
    extinct_at: int | None = None

    @property
    def remaining(self):
        return int(self.counts_active.sum() + self.counts_passive.sum())

    def copy(self):
        return UrnState(
            self.counts_active.copy(),
            self.counts_passive.copy(),
            self.B.copy(),
            self.active_is_u1,
            self.draws,
            self.extinct_at,
        )


def init(J, j0):
    """One type-``j0`` ball in urn U1 (types are 0-based)."""
    if not 0 <= j0 < J:
        raise ValueError(f"j0={j0} outside [0, {J})")
    e = np.zeros(J, dtype=np.int64)
    e[j0] = 1
    return UrnState(e.copy(), np.zeros(J, dtype=np.int64), e.copy())


def conserved(state):
    """Every ball ever added is either still in an urn or has been drawn."""
    return state.remaining == int(state.B.sum()) - state.draws


def _after_draws(state):
    assert conserved(state), "ball count out of balance"
    if state.counts_active.sum() == 0:
        if state.counts_passive.sum() == 0:
            state.extinct_at = state.draws
        else:
            state.counts_active, state.counts_passive = state.counts_passive, state.counts_active
            state.active_is_u1 = not state.active_is_u1


def step(state, law, rng):
    """Draw one ball; updates ``state`` in place and returns it."""
    if state.extinct_at is not None:
        raise AlreadyExtinct(f"urn died out at draw {state.extinct_at}")
    c = state.counts_active
    i = int(np.searchsorted(np.cumsum(c), rng.integers(c.sum()), side="right"))
    c[i] -= 1
    kids = sample_column(law, i, rng)
    state.counts_passive += kids
    state.B += kids
    state.draws += 1
    _after_draws(state)
    return state


def advance(state, law, m, rng):
    """Perform ``m`` draws (fewer if the urns die out).

    Within one urn the first ``r`` draws form a uniform random subset of its
    balls, so whole stretches are drawn at once with a multivariate
    hypergeometric sample; the resulting law of B is exactly that of ``m``
    calls to :func:`step`.
    """
    while m > 0 and state.extinct_at is None:
        avail = int(state.counts_active.sum())
        r = min(m, avail)
        if r == 1:
            step(state, law, rng)
            m -= 1
            continue
        drawn = rng.multivariate_hypergeometric(state.counts_active, r)
        state.counts_active -= drawn
        kids = total_offspring(law, drawn, rng)
        state.counts_passive += kids
        state.B += kids
        state.draws += r
        m -= r
        _after_draws(state)
    return state


def geometric_checkpoints(rho, n_steps):
    """n = ceil(rho^(k/2)) for k = 0, 1, ... up to ``n_steps`` (always includes 0 and n_steps)."""
    pts = {0, n_steps}
    if rho > 1:
        k = 0
        while True:
            n = math.ceil(rho ** (k / 2))
            if n > n_steps:
                break
            pts.add(n)
            k += 1
    return sorted(pts)


@dataclass
class Trajectory:
    law: str
    j0: int
    seed: int
    records: list = field(default_factory=list)
    final: UrnState | None = None
    survived: bool = True

    def write_csv(self, path):
        J = len(self.final.B)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n"] + [f"B_{i + 1}" for i in range(J)] + ["survived"])
            for n, B in self.records:
                w.writerow([n] + [int(b) for b in B] + [int(self.survived)])


def _resolve_checkpoints(law, n_steps, checkpoints):
    if checkpoints in (None, "geom"):
        from .spectral import _quiet_perron

        return geometric_checkpoints(_quiet_perron(mean_matrix(law)).rho, n_steps)
    if checkpoints == "all":
        return list(range(n_steps + 1))
    pts = sorted({int(c) for c in checkpoints if 0 <= int(c) <= n_steps} | {0})
    return pts


def run(law, j0, n_steps, checkpoints="geom", seed=0):
    """Simulate ``n_steps`` draws and record B at the checkpoints.

    After extinction the frozen B is recorded at the remaining checkpoints.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    pts = _resolve_checkpoints(law, n_steps, checkpoints)
    g = streams.rng(seed, streams.URN)
    state = init(law.J, j0)
    traj = Trajectory(law.name, j0, seed)
    for n in pts:
        if state.extinct_at is None:
            if checkpoints == "all":
                while state.draws < n and state.extinct_at is None:
                    step(state, law, g)
            else:
                advance(state, law, n - state.draws, g)
        traj.records.append((n, state.B.copy()))
    traj.final = state
    traj.survived = state.extinct_at is None
    return traj


def _draw_subset(counts, r, rng):
    """Row-wise multivariate hypergeometric: ``r[k]`` balls from urn ``counts[k]``."""
    R, J = counts.shape
    out = np.zeros_like(counts)
    left = counts.sum(axis=1)
    need = r.copy()
    for t in range(J - 1):
        left = left - counts[:, t]
        x = rng.hypergeometric(counts[:, t], left, need)
        out[:, t] = x
        need = need - x
    out[:, J - 1] = need
    return out


def simulate_batch(law, j0, checkpoints, R, rng):
    """Vectorized urn runs for ``R`` replicates.

    Returns ``(B, extinct)`` where ``B`` has shape (len(checkpoints), R, J) and
    ``extinct`` flags the replicates whose urns died before the last checkpoint.
    """
    checkpoints = sorted(int(c) for c in checkpoints)
    J = law.J
    active = np.zeros((R, J), dtype=np.int64)
    active[:, j0] = 1
    passive = np.zeros((R, J), dtype=np.int64)
    B = active.copy()
    draws = np.zeros(R, dtype=np.int64)
    dead = np.zeros(R, dtype=bool)
    out = np.empty((len(checkpoints), R, J), dtype=np.int64)
    for c_idx, target in enumerate(checkpoints):
        while True:
            todo = (draws < target) & ~dead
            if not todo.any():
                break
            avail = active.sum(axis=1)
            r = np.where(todo, np.minimum(target - draws, avail), 0)
            drawn = _draw_subset(active, r, rng)
            active -= drawn
            kids = total_offspring(law, drawn, rng)
            passive += kids
            B += kids
            draws += r
            empty = active.sum(axis=1) == 0
            swap = empty & (passive.sum(axis=1) > 0)
            active[swap], passive[swap] = passive[swap], active[swap]
            dead |= empty & ~swap
        out[c_idx] = B
    return out, dead
