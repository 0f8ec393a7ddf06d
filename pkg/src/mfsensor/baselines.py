"""Random designs, brute-force optimum, worst-case instance, fidelity regime."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import InvalidInputError
from .model import (BUDGET_RTOL, DesignResult, FidelityClass, ProblemInstance, Selection)

MAX_EXHAUSTIVE_LOCATIONS = 12

CHEAP_FAVORED = "cheap-favored"
EXPENSIVE_FAVORED = "expensive-favored"
CRITICAL = "critical"


def substream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Named, reproducible random stream derived from one integer seed."""
    key = [int(seed), zlib.crc32(name.encode())] + [int(e) for e in extra]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def random_design(k_cheap: int, k_exp: int, n_locations: int, seed=0) -> Selection:
    """Uniformly random disjoint placement of the given sensor counts.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if k_cheap < 0 or k_exp < 0 or k_cheap + k_exp > n_locations:
        raise InvalidInputError(
            f"allocation ({k_cheap}, {k_exp}) does not fit {n_locations} locations")
    rng = seed if isinstance(seed, np.random.Generator) else substream(seed, "random-design")
    perm = rng.permutation(n_locations)
    return Selection(perm[:k_cheap], perm[k_cheap:k_cheap + k_exp])


def exhaustive_search(inst: ProblemInstance, order=None,
                      max_locations: int = MAX_EXHAUSTIVE_LOCATIONS) -> DesignResult:
    """Best budget-feasible assignment of {none, cheap, expensive} per location.

    Depth-first over locations (in ``order`` if given) with the information
    matrix carried down the recursion; the first maximizer found is kept.
    """
    m = inst.n_locations
    if m > max_locations:
        raise InvalidInputError(
            f"exhaustive search refused: M={m} exceeds the guard of {max_locations} "
            f"(3^M enumeration)")
    order = list(range(m)) if order is None else [int(i) for i in order]
    if sorted(order) != list(range(m)):
        raise InvalidInputError("order must be a permutation of the locations")
    c_ch, c_exp, b = inst.cheap.cost, inst.exp.cost, inst.budget
    limit = b * (1.0 + BUDGET_RTOL)
    cols = {"c": inst.a_cheap, "e": inst.a_exp}
    best = {"val": -math.inf, "ch": (), "ex": ()}
    n_evals = 0

    def visit(pos, mat, spend, ch, ex):
        nonlocal n_evals
        if pos == m:
            n_evals += 1
            if ch or ex:
                c = la.cholesky(mat, lower=True, check_finite=False)
                val = 2.0 * float(np.sum(np.log(np.diag(c))))
            else:
                val = 0.0
            if val > best["val"]:
                best.update(val=val, ch=ch, ex=ex)
            return
        i = order[pos]
        visit(pos + 1, mat, spend, ch, ex)
        if spend + c_ch <= limit:
            a = cols["c"][:, i]
            visit(pos + 1, mat + np.outer(a, a), spend + c_ch, ch + (i,), ex)
        if spend + c_exp <= limit:
            a = cols["e"][:, i]
            visit(pos + 1, mat + np.outer(a, a), spend + c_exp, ch, ex + (i,))

    visit(0, np.eye(inst.n_modes), 0.0, (), ())
    sel = Selection(best["ch"], best["ex"])
    return DesignResult(algorithm="exhaustive", selection=sel, phi_d=best["val"],
                        spend=inst.spend(sel), budget=b, meta={"n_evaluated": n_evals})


def counterexample_instance(eps: float, a) -> ProblemInstance:
    """Single-location instance on which greedy reaches only ``eps`` of the optimum.

    A cheap sensor there is worth ``eps`` at cost ``eps/2``; an expensive one
    is worth 1 at cost 1, and the budget of 1 allows only one of them.
    """
    if not 0 < eps < 1:
        raise InvalidInputError(f"eps must lie in (0, 1), got {eps}")
    a = np.asarray(a, dtype=float).reshape(-1)
    x = float(a @ a)
    if not x > 0:
        raise InvalidInputError("direction vector must be non-zero")
    cheap = FidelityClass(eps / 2, math.sqrt(x / math.expm1(eps)))
    exp = FidelityClass(1.0, math.sqrt(x / math.expm1(1.0)))
    return ProblemInstance.from_base(a[:, None], cheap, exp, 1.0)


@dataclass(frozen=True)
class RegimeVerdict:
    ratio_cost: float
    ratio_noise: float
    regime: str


def predict_regime(cheap: FidelityClass, exp: FidelityClass) -> RegimeVerdict:
    """First-order guess of which fidelity greedy favours.

    Compares ``c_ch / c_exp`` with ``sigma_exp^2 / sigma_ch^2``; only exact
    when every quadratic form ``a^T B^{-1} a`` is small. Advisory only.
    """
    rc = cheap.cost / exp.cost
    rn = exp.sigma ** 2 / cheap.sigma ** 2
    if abs(rc - rn) <= 1e-12 * max(abs(rc), abs(rn)):
        regime = CRITICAL
    elif rc < rn:
        regime = CHEAP_FAVORED
    else:
        regime = EXPENSIVE_FAVORED
    return RegimeVerdict(rc, rn, regime)
