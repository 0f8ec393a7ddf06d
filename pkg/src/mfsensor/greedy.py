"""Budgeted multifidelity greedy selection.

Two implementations of the same selection rule: pick the (fidelity, location)
pair with the largest objective gain per unit cost until the budget no longer
covers a cheap sensor or every location is occupied.

* :func:`greedy_naive` re-evaluates ``phi_d`` from scratch for every candidate.
* :func:`greedy_sm` keeps ``D_j = B^{-1} A_j`` for each fidelity and refreshes
  it with a rank-one Sherman-Morrison update after every pick, so each gain
  costs one column dot product.

Ties are resolved deterministically: candidates are scanned cheap-first, then
by ascending location, and the first one within ``TIE_RTOL`` of the best
ratio wins.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidInputError, NumericalBreakdownError
from .model import (CHEAP, EXPENSIVE, FIDELITIES, QUAD_TOL, DesignResult, ProblemInstance,
                    Selection, fits, phi_d)

TIE_RTOL = 1e-12
# smallest acceptable Sherman-Morrison denominator 1 + u^T v
SM_DENOM_MIN = 1e-12


def _pick(candidates):
    """First ``(fidelity, location, value)`` within tolerance of the maximum.

    ``candidates`` is an ordered list of ``(fidelity, locations, values)``.
    """
    best = max(float(np.max(v)) for _, _, v in candidates if len(v))
    cutoff = best - TIE_RTOL * abs(best)
    for fid, locs, vals in candidates:
        hits = np.flatnonzero(vals >= cutoff)
        if hits.size:
            k = hits[0]
            return fid, int(locs[k]), float(vals[k])
    raise AssertionError("no candidate reached the maximum")  # pragma: no cover


class RankOneState:
    """``D_j = B^{-1} A_j`` for a set of fidelities, updated in place.

    ``B`` itself is never formed; it starts at the identity and every
    :meth:`add` appends the outer product of the chosen ``A`` column.
    """

    def __init__(self, inst: ProblemInstance, fidelities=FIDELITIES):
        self.inst = inst
        self.d = {f: np.array(inst.matrix(f), dtype=float) for f in fidelities}
        self.logdet = 0.0

    def quad_forms(self, fidelity: str, locs) -> np.ndarray:
        a = self.inst.matrix(fidelity)[:, locs]
        q = np.einsum("ij,ij->j", a, self.d[fidelity][:, locs])
        if q.size and q.min() < -QUAD_TOL:
            raise NumericalBreakdownError(
                f"negative quadratic form {q.min():.3e}: B is no longer positive definite")
        return np.maximum(q, 0.0)

    def gains(self, fidelity: str, locs) -> np.ndarray:
        return np.log1p(self.quad_forms(fidelity, locs))

    def add(self, fidelity: str, i: int, update=None) -> float:
        """Append sensor ``(fidelity, i)``; returns its objective gain.

        ``update`` limits which ``D`` matrices are refreshed (default: all).
        """
        u = self.inst.matrix(fidelity)[:, i]
        v = self.d[fidelity][:, i].copy()
        denom = 1.0 + float(u @ v)
        if denom <= SM_DENOM_MIN:
            raise NumericalBreakdownError(
                f"Sherman-Morrison denominator {denom:.3e} is not positive")
        for f in (self.d if update is None else update):
            d = self.d[f]
            d -= np.outer(v / denom, u @ d)
        gain = math.log(denom)
        self.logdet += gain
        return gain


def _finish(name, inst, sel, spend, trace, value):
    return DesignResult(algorithm=name, selection=sel, phi_d=value, spend=spend,
                        budget=inst.budget, trace=trace)


def greedy_naive(inst: ProblemInstance) -> DesignResult:
    """Reference greedy: every candidate gain is a fresh log-determinant."""
    sel = Selection()
    spend = 0.0
    current = 0.0
    free = list(range(inst.n_locations))
    trace = []
    step = 0
    while free and fits(spend, inst.cheap.cost, inst.budget):
        admissible = [f for f in FIDELITIES if fits(spend, inst.cost(f), inst.budget)]
        cands = []
        for f in admissible:
            c = inst.cost(f)
            vals = np.array([(phi_d(inst, sel.add(f, i)) - current) / c for i in free])
            cands.append((f, free, vals))
        fid, loc, ratio = _pick(cands)
        sel = sel.add(fid, loc)
        free.remove(loc)
        spend += inst.cost(fid)
        current = phi_d(inst, sel)
        step += 1
        trace.append((step, fid, loc, ratio, current))
    return _finish("greedy-naive", inst, sel, spend, trace, current)


def greedy_sm(inst: ProblemInstance) -> DesignResult:
    """Greedy with Sherman-Morrison maintained ``D`` matrices."""
    state = RankOneState(inst)
    sel = Selection()
    spend = 0.0
    free = np.ones(inst.n_locations, dtype=bool)
    admissible = list(FIDELITIES)
    trace = []
    step = 0
    while free.any() and fits(spend, inst.cheap.cost, inst.budget):
        admissible = [f for f in admissible if fits(spend, inst.cost(f), inst.budget)]
        locs = np.flatnonzero(free)
        cands = [(f, locs, state.gains(f, locs) / inst.cost(f)) for f in admissible]
        fid, loc, ratio = _pick(cands)
        # D is refreshed only for fidelities still affordable next round
        spend += inst.cost(fid)
        admissible = [f for f in admissible if fits(spend, inst.cost(f), inst.budget)]
        state.add(fid, loc, update=admissible)
        sel = sel.add(fid, loc)
        free[loc] = False
        step += 1
        trace.append((step, fid, loc, ratio, state.logdet))
    return _finish("greedy", inst, sel, spend, trace, state.logdet)


def greedy_select(inst: ProblemInstance, fidelity: str, k: int, prev=()) -> tuple:
    """Pick ``k`` locations of one fidelity given fixed sensors of the other.

    ``prev`` holds the locations of the *other* fidelity; they condition the
    gains and are excluded from the result. Returns locations in pick order.
    """
    other = EXPENSIVE if fidelity == CHEAP else CHEAP
    prev = [int(i) for i in prev]
    if k < 0:
        raise InvalidInputError("k must be non-negative")
    if k + len(prev) > inst.n_locations:
        raise InvalidInputError(
            f"cannot place {k} sensors beside {len(prev)} existing ones at "
            f"{inst.n_locations} locations")
    if k == 0:
        return ()
    state = RankOneState(inst, (fidelity, other) if prev else (fidelity,))
    for p in prev:
        state.add(other, p)
    free = np.ones(inst.n_locations, dtype=bool)
    free[prev] = False
    picked = []
    for _ in range(k):
        locs = np.flatnonzero(free)
        _, loc, _ = _pick([(fidelity, locs, state.gains(fidelity, locs))])
        state.add(fidelity, loc, update=(fidelity,))
        free[loc] = False
        picked.append(loc)
    return tuple(picked)
