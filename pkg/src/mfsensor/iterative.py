"""Allocation pruning plus alternating per-fidelity greedy refinement.

Phase I keeps, for each affordable expensive count, only the largest cheap
count, and drops it if the leftover budget would still pay for upgrading one
cheap sensor to an expensive one. Phase II fills each surviving allocation:
expensive sensors first, then alternating cheap/expensive re-selections that
stop as soon as a re-selection fails to raise the objective.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import InvalidInputError
from .greedy import greedy_select
from .model import (BUDGET_RTOL, CHEAP, EXPENSIVE, DesignResult, ProblemInstance, Selection,
                    floor_count, phi_d)

log = logging.getLogger(__name__)

DEFAULT_MAX_ITERS = 20


@dataclass(frozen=True)
class Allocation:
    k_cheap: int
    k_exp: int

    def spend(self, c_ch: float, c_exp: float) -> float:
        return c_ch * self.k_cheap + c_exp * self.k_exp


@dataclass
class CandidateSet:
    allocations: list
    feasible_count: int
    bound: int

    def triple(self) -> tuple:
        return self.feasible_count, len(self.allocations), self.bound


def _check_costs(c_ch, c_exp, b):
    if not (c_ch > 0 and c_exp > 0 and b > 0):
        raise InvalidInputError("costs and budget must be positive")
    if not c_ch < c_exp:
        raise InvalidInputError(f"cheap cost {c_ch} must be below expensive cost {c_exp}")


def prune_allocations(c_ch: float, c_exp: float, b: float) -> CandidateSet:
    """Undominated ``(k_cheap, k_exp)`` allocations for costs ``c_ch < c_exp``."""
    _check_costs(c_ch, c_exp, b)
    max_exp = floor_count(b, c_exp)
    feasible = sum(1 + floor_count(b - c_exp * k, c_ch) for k in range(max_exp + 1))
    bound = 1 + max_exp
    if c_ch > b:
        return CandidateSet([], feasible, bound)
    upgrade_slack = b - (c_exp - c_ch) + BUDGET_RTOL * b
    kept = []
    for k_exp in range(max_exp + 1):
        k_ch = floor_count(b - c_exp * k_exp, c_ch)
        if k_ch == 0 or c_ch * k_ch + c_exp * k_exp > upgrade_slack:
            kept.append(Allocation(k_ch, k_exp))
    return CandidateSet(kept, feasible, bound)


def discard_reason(alloc: Allocation, c_ch: float, c_exp: float, b: float):
    """Why a feasible allocation is dominated, or ``None`` if it is not.

    ``"add"``: another cheap sensor still fits. ``"upgrade"``: a cheap sensor
    could be swapped for an expensive one.
    """
    spend = alloc.spend(c_ch, c_exp)
    if spend <= b - c_ch:
        return "add"
    if alloc.k_cheap > 0 and spend <= b - (c_exp - c_ch):
        return "upgrade"
    return None


@dataclass
class CandidateResult:
    allocation: Allocation
    selection: Selection
    phi_d: float
    refinements: int
    requested: Allocation | None = None


@dataclass
class IterativeReport:
    candidates: CandidateSet
    per_candidate: list
    total_refinements: int
    winner: DesignResult
    skipped: list = field(default_factory=list)


def clamp_allocation(alloc: Allocation, n_locations: int):
    """Fit an allocation into ``n_locations`` by dropping cheap sensors first.

    Returns ``None`` if the expensive count alone exceeds the location count.
    """
    if alloc.k_exp > n_locations:
        return None
    k_ch = min(alloc.k_cheap, n_locations - alloc.k_exp)
    return Allocation(k_ch, alloc.k_exp)


def refine_allocation(inst: ProblemInstance, alloc: Allocation,
                      max_iters: int = DEFAULT_MAX_ITERS) -> CandidateResult:
    s_ch: tuple = ()
    s_exp = greedy_select(inst, EXPENSIVE, alloc.k_exp, ())
    value = phi_d(inst, Selection(s_ch, s_exp))
    best_sel, best_val = Selection(s_ch, s_exp), value
    refinements = 0

    def consider(sel, val):
        nonlocal best_sel, best_val
        if val > best_val:
            best_sel, best_val = sel, val

    for _ in range(max_iters):
        ch_plus = greedy_select(inst, CHEAP, alloc.k_cheap, s_exp)
        trial = Selection(ch_plus, s_exp)
        v = phi_d(inst, trial)
        consider(trial, v)
        if v <= value:
            break
        s_ch, value = ch_plus, v

        exp_plus = greedy_select(inst, EXPENSIVE, alloc.k_exp, s_ch)
        trial = Selection(s_ch, exp_plus)
        v = phi_d(inst, trial)
        consider(trial, v)
        if v <= value:
            break
        s_exp, value = exp_plus, v
        refinements += 1
    return CandidateResult(alloc, best_sel, best_val, refinements)


def iterative_select(inst: ProblemInstance, max_iters: int = DEFAULT_MAX_ITERS,
                     workers: int | None = None) -> IterativeReport:
    """Run both phases and return the best configuration over all allocations.

    ``workers > 1`` evaluates allocations on a thread pool; the result does
    not depend on completion order.
    """
    if max_iters < 1:
        raise InvalidInputError("max_iters must be at least 1")
    cands = prune_allocations(inst.cheap.cost, inst.exp.cost, inst.budget)
    jobs, skipped = [], []
    for alloc in cands.allocations:
        fitted = clamp_allocation(alloc, inst.n_locations)
        if fitted is None:
            msg = (f"allocation {alloc} needs more than {inst.n_locations} "
                   f"locations; skipped")
            log.warning(msg)
            skipped.append((alloc, msg))
            continue
        jobs.append((alloc, fitted))

    def run(job):
        requested, fitted = job
        res = refine_allocation(inst, fitted, max_iters)
        if fitted != requested:
            res.requested = requested
        return res

    if workers and workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    # ascending k_exp order, so strict '>' keeps the fewer-expensive allocation on ties
    win = None
    for res in results:
        if win is None or res.phi_d > win.phi_d:
            win = res
    sel = win.selection if win is not None else Selection()
    total = sum(r.refinements for r in results)
    winner = DesignResult(
        algorithm="iterative",
        selection=sel,
        phi_d=win.phi_d if win is not None else 0.0,
        spend=inst.spend(sel),
        budget=inst.budget,
        meta={"n_candidates": len(cands.allocations),
              "feasible_count": cands.feasible_count,
              "total_refinements": total},
    )
    return IterativeReport(cands, results, total, winner, skipped)
