import numpy as np
import pytest

from mfsensor import FidelityClass, ProblemInstance


def random_setup(rng, ell=None, m=None):
    """Random (psi, prior_var, cheap, exp) tuple; psi is M x ell."""
    ell = int(rng.integers(1, 6)) if ell is None else ell
    m = int(rng.integers(2, 9)) if m is None else m
    psi = rng.standard_normal((m, ell))
    prior_var = rng.uniform(0.2, 3.0, ell)
    s_exp = rng.uniform(0.3, 1.5)
    cheap = FidelityClass(1.0, s_exp * rng.uniform(1.1, 4.0))
    exp = FidelityClass(rng.uniform(1.2, 4.0), s_exp)
    return psi, prior_var, cheap, exp


def instance_from(psi, prior_var, cheap, exp, budget):
    base = np.sqrt(prior_var)[:, None] * psi.T
    return ProblemInstance.from_base(base, cheap, exp, budget)


def random_instance(rng, ell=None, m=None, n_sensors=None):
    psi, prior_var, cheap, exp = random_setup(rng, ell, m)
    if n_sensors is None:
        budget = rng.uniform(exp.cost, 5 * cheap.cost)
    else:
        budget = n_sensors * cheap.cost + 0.5 * cheap.cost
    return instance_from(psi, prior_var, cheap, exp, budget)


def orthogonal_instance(n, col_norm, cheap, exp, budget):
    """``n`` equal-norm orthogonal columns; ``col_norm`` is the expensive-column norm."""
    base = np.eye(n) * col_norm * exp.sigma
    return ProblemInstance.from_base(base, cheap, exp, budget)


def dense_phi_d(psi, prior_var, cheap, exp, cheap_idx, exp_idx):
    """log det(Sigma_pr^{1/2} Sigma_post^{-1} Sigma_pr^{1/2}) by explicit assembly."""
    m, ell = psi.shape
    locs = list(cheap_idx) + list(exp_idx)
    s = np.zeros((m, len(locs)))
    for c, i in enumerate(locs):
        s[i, c] = 1.0
    noise = np.diag([cheap.sigma ** 2] * len(cheap_idx) + [exp.sigma ** 2] * len(exp_idx))
    prior = np.diag(prior_var)
    post_inv = psi.T @ s @ np.linalg.inv(noise) @ s.T @ psi + np.linalg.inv(prior) \
        if locs else np.linalg.inv(prior)
    half = np.diag(np.sqrt(prior_var))
    sign, logdet = np.linalg.slogdet(half @ post_inv @ half)
    assert sign > 0
    return logdet


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line per criterion; printed in the terminal summary."""
    def report(number, title, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        ACCEPTANCE_LINES.append(f"criterion {number}: {status} {title}" +
                                (f" ({detail})" if detail else ""))
        assert ok, f"criterion {number} failed: {detail}"
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
