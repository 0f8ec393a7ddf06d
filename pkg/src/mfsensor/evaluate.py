"""Measurement simulation, MAP reconstruction and design comparison."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .baselines import random_design, substream
from .basis import ReducedModel
from .errors import InvalidInputError
from .iterative import clamp_allocation, prune_allocations
from .model import FidelityClass, ProblemInstance, Selection, phi_d, posterior

log = logging.getLogger(__name__)

HIST_BINS = 40


@dataclass
class Measurement:
    values: np.ndarray
    sel: Selection
    noise_seed: int | None = None


@dataclass
class EvalSummary:
    per_snapshot_rel_err: np.ndarray
    mean_rel_err: float
    phi_d: float
    allocation: tuple
    skipped: list = field(default_factory=list)


def simulate_measurement(u, sel: Selection, cand_idx, noise=(0.0, 0.0), seed=0,
                         rng: np.random.Generator | None = None) -> Measurement:
    """Sample the field at the selected candidates and add Gaussian noise.

    ``noise`` is ``(sigma_cheap, sigma_exp)``; zeros give exact samples.
    Values follow the cheap-then-expensive ordering of ``sel.locations()``.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    cand_idx = np.asarray(cand_idx)
    sel.check(len(cand_idx))
    locs = list(sel.locations())
    if not locs:
        return Measurement(np.zeros(0), sel, seed)
    sd = np.array([noise[0]] * sel.k_cheap + [noise[1]] * sel.k_exp, dtype=float)
    if np.any(sd < 0):
        raise InvalidInputError("noise standard deviations must be non-negative")
    if rng is None:
        rng = substream(seed, "noise")
    values = u[cand_idx[locs]] + sd * rng.standard_normal(len(locs))
    return Measurement(values, sel, seed)


def reconstruct(model: ReducedModel, sel: Selection, y, cheap: FidelityClass,
                exp: FidelityClass) -> tuple:
    """Full-state MAP estimate ``phi m_post + mean`` and the reduced posterior."""
    values = y.values if isinstance(y, Measurement) else y
    post = posterior(model.psi, model.prior_var, cheap, exp, sel, values)
    return model.phi @ post.mean + model.offset(), post


def relative_error(u, u_hat) -> float:
    return float(np.linalg.norm(u - u_hat) / np.linalg.norm(u))


def evaluate(model: ReducedModel, sel: Selection, test, cheap: FidelityClass,
             exp: FidelityClass, seed=0, noise_free: bool = False) -> EvalSummary:
    """Average relative reconstruction error over the columns of ``test``.

    Each snapshot draws its own noise from a stream keyed by its column
    index, so results do not depend on evaluation order.
    """
    test = np.asarray(test, dtype=float)
    if test.ndim == 1:
        test = test[:, None]
    if test.shape[1] == 0:
        raise InvalidInputError("test set is empty")
    if test.shape[0] != model.n_points:
        raise InvalidInputError(
            f"test snapshots have {test.shape[0]} points, model has {model.n_points}")
    noise = (0.0, 0.0) if noise_free else (cheap.sigma, exp.sigma)
    errs, skipped = [], []
    for k in range(test.shape[1]):
        u = test[:, k]
        if not np.linalg.norm(u) > 0:
            log.warning("test snapshot %d has zero norm; skipped", k)
            skipped.append(k)
            continue
        meas = simulate_measurement(u, sel, model.cand_idx, noise,
                                    rng=substream(seed, "noise", k))
        u_hat, _ = reconstruct(model, sel, meas, cheap, exp)
        errs.append(relative_error(u, u_hat))
    errs = np.array(errs)
    mean = float(np.mean(errs)) if errs.size else float("nan")
    # the budget plays no part in the objective value
    inst = ProblemInstance.from_base(model.base_matrix(), cheap, exp, budget=exp.cost)
    return EvalSummary(errs, mean, phi_d(inst, sel), (sel.k_cheap, sel.k_exp), skipped)


@dataclass
class ComparisonRow:
    name: str
    k_cheap: int
    k_exp: int
    spend: float
    phi_d: float
    mean_rel_err: float | None = None


@dataclass
class Comparison:
    rows: list
    random_phi: np.ndarray
    random_alloc: list
    histogram: list
    markers: dict


def histogram(values, bins: int = HIST_BINS) -> list:
    """Equal-width bins over the sample range as ``(lo, hi, count)``."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return []
    counts, edges = np.histogram(values, bins=bins)
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)]


def compare_designs(inst: ProblemInstance, designs, samples: int = 1000, seed=0,
                    names=None, rel_errs=None, bins: int = HIST_BINS) -> Comparison:
    """Objective values of ``designs`` against random placements.

    Random placements use every pruned allocation (clamped to the location
    count), ``samples`` each. ``rel_errs`` optionally maps design name to a
    mean reconstruction error for the table.
    """
    rows = []
    markers = {}
    names = names or [d.algorithm for d in designs]
    for name, d in zip(names, designs):
        val = phi_d(inst, d.selection)
        rows.append(ComparisonRow(name, d.selection.k_cheap, d.selection.k_exp,
                                  inst.spend(d.selection), val,
                                  None if rel_errs is None else rel_errs.get(name)))
        markers[name] = val
    vals, allocs = [], []
    if samples > 0:
        rng = substream(seed, "random-design")
        cands = prune_allocations(inst.cheap.cost, inst.exp.cost, inst.budget)
        for alloc in cands.allocations:
            fitted = clamp_allocation(alloc, inst.n_locations)
            if fitted is None:
                continue
            for _ in range(samples):
                sel = random_design(fitted.k_cheap, fitted.k_exp, inst.n_locations, rng)
                vals.append(phi_d(inst, sel))
                allocs.append((fitted.k_cheap, fitted.k_exp))
    vals = np.array(vals)
    return Comparison(rows, vals, allocs, histogram(vals, bins), markers)
