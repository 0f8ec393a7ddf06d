import itertools

import numpy as np
import pytest

from conftest import random_instance
from mfsensor import (FidelityClass, InvalidInputError, counterexample_instance,
                      exhaustive_search, greedy_sm, phi_d, predict_regime, random_design)
from mfsensor.baselines import CHEAP_FAVORED, CRITICAL, EXPENSIVE_FAVORED, substream
from mfsensor.model import Selection


def test_random_design_shapes():
    sel = random_design(3, 2, 10, seed=1)
    assert sel.k_cheap == 3 and sel.k_exp == 2
    assert len(set(sel.locations())) == 5
    assert random_design(0, 0, 4) == Selection()
    full = random_design(2, 2, 4, seed=3)
    assert sorted(full.locations()) == [0, 1, 2, 3]
    with pytest.raises(InvalidInputError):
        random_design(3, 2, 4)


def test_random_design_deterministic():
    assert random_design(2, 3, 20, seed=42) == random_design(2, 3, 20, seed=42)
    draws = {random_design(2, 3, 20, seed=s) for s in range(10)}
    assert len(draws) > 1


def test_random_design_roughly_uniform():
    rng = np.random.default_rng(0)
    counts = np.zeros(5)
    for _ in range(5000):
        sel = random_design(1, 0, 5, seed=rng)
        counts[sel.cheap_idx[0]] += 1
    assert np.all(np.abs(counts / 5000 - 0.2) < 0.03)


def test_substreams_are_independent():
    a = substream(1, "noise", 0).random(4)
    b = substream(1, "noise", 1).random(4)
    c = substream(1, "random-design").random(4)
    assert not np.allclose(a, b) and not np.allclose(a, c)
    np.testing.assert_array_equal(a, substream(1, "noise", 0).random(4))


def _brute_force(inst):
    best = 0.0
    m = inst.n_locations
    for labels in itertools.product((0, 1, 2), repeat=m):
        ch = [i for i in range(m) if labels[i] == 1]
        ex = [i for i in range(m) if labels[i] == 2]
        if len(ch) * inst.cheap.cost + len(ex) * inst.exp.cost > inst.budget * (1 + 1e-12):
            continue
        best = max(best, phi_d(inst, Selection(ch, ex)))
    return best


def test_exhaustive_matches_flat_enumeration():
    rng = np.random.default_rng(10)
    for _ in range(10):
        inst = random_instance(rng, m=int(rng.integers(2, 6)))
        res = exhaustive_search(inst)
        assert res.phi_d == pytest.approx(_brute_force(inst), rel=1e-10, abs=1e-12)
        assert res.meta["n_evaluated"] <= 3 ** inst.n_locations
        assert res.phi_d == pytest.approx(phi_d(inst, res.selection), rel=1e-10, abs=1e-12)


def test_exhaustive_order_invariant():
    rng = np.random.default_rng(12)
    inst = random_instance(rng, m=6)
    ref = exhaustive_search(inst).phi_d
    for _ in range(3):
        got = exhaustive_search(inst, order=rng.permutation(6)).phi_d
        assert got == pytest.approx(ref, rel=1e-10, abs=1e-12)


def test_exhaustive_guard(rng):
    inst = random_instance(rng, m=13)
    with pytest.raises(InvalidInputError):
        exhaustive_search(inst)
    with pytest.raises(InvalidInputError):
        exhaustive_search(random_instance(rng, m=4), order=[0, 1, 1, 3])


@pytest.mark.parametrize("eps", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("a", [[1.0, 0.0], [0.0, 7.0], [0.3, -0.4, 2.0]])
def test_counterexample_ratio(eps, a):
    inst = counterexample_instance(eps, a)
    g = greedy_sm(inst)
    opt = exhaustive_search(inst)
    assert g.phi_d == pytest.approx(eps, abs=1e-10)
    assert opt.phi_d == pytest.approx(1.0, abs=1e-10)
    assert g.phi_d / opt.phi_d == pytest.approx(eps, abs=1e-10)


def test_counterexample_rejects_bad_eps():
    for eps in (0.0, 1.0, -0.5):
        with pytest.raises(InvalidInputError):
            counterexample_instance(eps, [1.0])
    with pytest.raises(InvalidInputError):
        counterexample_instance(0.5, [0.0, 0.0])


@pytest.mark.parametrize("costs,sigmas,regime", [
    ((1, 6), (0.02, 0.01), CHEAP_FAVORED),
    ((1, 5), (0.05, 0.01), EXPENSIVE_FAVORED),
    ((1, 4), (0.02, 0.01), CRITICAL),
])
def test_regime_table(costs, sigmas, regime):
    v = predict_regime(FidelityClass(costs[0], sigmas[0]), FidelityClass(costs[1], sigmas[1]))
    assert v.regime == regime
    assert v.ratio_cost == pytest.approx(costs[0] / costs[1])
