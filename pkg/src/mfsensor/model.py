"""Problem data model and D-optimality evaluation.

All location indices are 0-based. For a selection ``[S_ch, S_exp]`` the
objective is

    phi_d(S) = log det(I + A_ch[:, S_ch] A_ch[:, S_ch]^T + A_exp[:, S_exp] A_exp[:, S_exp]^T)

with ``A_j = sigma_j^{-1} Sigma_pr^{1/2} Psi^T``. Logs are natural logs.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import InvalidInputError, NumericalBreakdownError

CHEAP = "cheap"
EXPENSIVE = "exp"
FIDELITIES = (CHEAP, EXPENSIVE)

# quadratic forms in [-QUAD_TOL, 0) are roundoff and get clamped to 0
QUAD_TOL = 1e-12
# relative slack on budget comparisons
BUDGET_RTOL = 1e-12


@dataclass(frozen=True)
class FidelityClass:
    """Sensor type: unit cost and noise standard deviation."""

    cost: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.cost) and self.cost > 0):
            raise InvalidInputError(f"fidelity cost must be positive, got {self.cost}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidInputError(f"fidelity sigma must be positive, got {self.sigma}")


def check_fidelity_order(cheap: FidelityClass, exp: FidelityClass) -> None:
    if not cheap.cost < exp.cost:
        raise InvalidInputError(
            f"cheap cost ({cheap.cost}) must be below expensive cost ({exp.cost})")
    if not cheap.sigma > exp.sigma:
        raise InvalidInputError(
            f"cheap sigma ({cheap.sigma}) must exceed expensive sigma ({exp.sigma})")


@dataclass(frozen=True)
class Selection:
    """Disjoint cheap/expensive location index sets, stored sorted."""

    cheap_idx: tuple = ()
    exp_idx: tuple = ()

    def __post_init__(self):
        ch = tuple(sorted(int(i) for i in self.cheap_idx))
        ex = tuple(sorted(int(i) for i in self.exp_idx))
        if len(set(ch)) != len(ch) or len(set(ex)) != len(ex):
            raise InvalidInputError("duplicate location within a fidelity set")
        if set(ch) & set(ex):
            raise InvalidInputError(
                f"cheap and expensive sets overlap at {sorted(set(ch) & set(ex))}")
        if any(i < 0 for i in ch + ex):
            raise InvalidInputError("negative location index")
        object.__setattr__(self, "cheap_idx", ch)
        object.__setattr__(self, "exp_idx", ex)

    @property
    def k_cheap(self) -> int:
        return len(self.cheap_idx)

    @property
    def k_exp(self) -> int:
        return len(self.exp_idx)

    def __len__(self):
        return self.k_cheap + self.k_exp

    def locations(self) -> tuple:
        """Measurement ordering: cheap ascending, then expensive ascending."""
        return self.cheap_idx + self.exp_idx

    def check(self, n_locations: int) -> None:
        bad = [i for i in self.locations() if i >= n_locations]
        if bad:
            raise InvalidInputError(
                f"location indices {bad} out of range for {n_locations} candidates")

    def add(self, fidelity: str, i: int) -> "Selection":
        if fidelity == CHEAP:
            return Selection(self.cheap_idx + (i,), self.exp_idx)
        if fidelity == EXPENSIVE:
            return Selection(self.cheap_idx, self.exp_idx + (i,))
        raise InvalidInputError(f"unknown fidelity {fidelity!r}")


class ProblemInstance:
    """Complete input of the budgeted multifidelity design problem.

    ``a_cheap`` and ``a_exp`` are ``ell x M``; both are noise-scaled copies of
    the same matrix ``Sigma_pr^{1/2} Psi^T``. Arrays are stored read-only.
    """

    def __init__(self, a_cheap, a_exp, cheap: FidelityClass, exp: FidelityClass,
                 budget: float):
        a_cheap = np.array(a_cheap, dtype=float, ndmin=2)
        a_exp = np.array(a_exp, dtype=float, ndmin=2)
        if a_cheap.ndim != 2 or a_cheap.shape != a_exp.shape:
            raise InvalidInputError(
                f"A matrices must share a 2-D shape, got {a_cheap.shape} and {a_exp.shape}")
        if a_cheap.shape[0] < 1 or a_cheap.shape[1] < 1:
            raise InvalidInputError("A matrices must have ell >= 1 and M >= 1")
        if not (np.all(np.isfinite(a_cheap)) and np.all(np.isfinite(a_exp))):
            raise InvalidInputError("A matrices contain non-finite entries")
        check_fidelity_order(cheap, exp)
        budget = float(budget)
        if not (math.isfinite(budget) and budget > 0):
            raise InvalidInputError(f"budget must be positive, got {budget}")
        lhs = a_cheap * cheap.sigma
        rhs = a_exp * exp.sigma
        scale = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), np.finfo(float).tiny)
        if np.max(np.abs(lhs - rhs)) > 1e-12 * scale:
            raise InvalidInputError(
                "a_cheap * sigma_cheap must equal a_exp * sigma_exp (shared prior-scaled basis)")
        a_cheap.flags.writeable = False
        a_exp.flags.writeable = False
        self.a_cheap = a_cheap
        self.a_exp = a_exp
        self.cheap = cheap
        self.exp = exp
        self.budget = budget

    @classmethod
    def from_base(cls, base, cheap: FidelityClass, exp: FidelityClass, budget: float):
        """Build from ``base = Sigma_pr^{1/2} Psi^T`` (``ell x M``)."""
        base = np.array(base, dtype=float, ndmin=2)
        return cls(base / cheap.sigma, base / exp.sigma, cheap, exp, budget)

    @property
    def n_modes(self) -> int:
        return self.a_cheap.shape[0]

    @property
    def n_locations(self) -> int:
        return self.a_cheap.shape[1]

    def matrix(self, fidelity: str) -> np.ndarray:
        if fidelity == CHEAP:
            return self.a_cheap
        if fidelity == EXPENSIVE:
            return self.a_exp
        raise InvalidInputError(f"unknown fidelity {fidelity!r}")

    def fidelity(self, fidelity: str) -> FidelityClass:
        return self.cheap if fidelity == CHEAP else self.exp

    def cost(self, fidelity: str) -> float:
        return self.fidelity(fidelity).cost

    def spend(self, sel: Selection) -> float:
        return self.cheap.cost * sel.k_cheap + self.exp.cost * sel.k_exp

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for arr in (self.a_cheap, self.a_exp):
            h.update(np.asarray(arr.shape, dtype="<u8").tobytes())
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        params = np.array([self.cheap.cost, self.cheap.sigma, self.exp.cost,
                           self.exp.sigma, self.budget], dtype="<f8")
        h.update(params.tobytes())
        return h.hexdigest()

    def __repr__(self):
        return (f"ProblemInstance(ell={self.n_modes}, M={self.n_locations}, "
                f"cheap={self.cheap}, exp={self.exp}, budget={self.budget})")


@dataclass(frozen=True)
class PosteriorSummary:
    mean: np.ndarray
    cov: np.ndarray


@dataclass
class DesignResult:
    """Output of any design algorithm.

    ``trace`` rows are ``(step, fidelity, location, gain_per_cost, phi_d)``.
    """

    algorithm: str
    selection: Selection
    phi_d: float
    spend: float
    budget: float
    trace: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def allocation(self) -> tuple:
        return (self.selection.k_cheap, self.selection.k_exp)


def _chol_logdet(mat: np.ndarray) -> float:
    try:
        c = la.cholesky(mat, lower=True, check_finite=False)
    except la.LinAlgError as exc:
        raise NumericalBreakdownError(f"Cholesky factorization failed: {exc}") from exc
    return 2.0 * float(np.sum(np.log(np.diag(c))))


def information_matrix(inst: ProblemInstance, sel: Selection) -> np.ndarray:
    """``B(S) = I + sum of outer products of the selected A columns``."""
    sel.check(inst.n_locations)
    cols = np.hstack([inst.a_cheap[:, list(sel.cheap_idx)],
                      inst.a_exp[:, list(sel.exp_idx)]])
    return np.eye(inst.n_modes) + cols @ cols.T


def phi_d(inst: ProblemInstance, sel: Selection) -> float:
    """D-optimality value of ``sel``; exactly 0.0 for the empty selection."""
    if len(sel) == 0:
        sel.check(inst.n_locations)
        return 0.0
    return _chol_logdet(information_matrix(inst, sel))


def marginal_gain(b_inv_col, a_col) -> float:
    """``log(1 + a^T B^{-1} a)`` given ``b_inv_col = B^{-1} a``."""
    q = float(np.dot(a_col, b_inv_col))
    if q < 0:
        if q < -QUAD_TOL:
            raise NumericalBreakdownError(
                f"negative quadratic form {q:.3e}: B is no longer positive definite")
        q = 0.0
    return math.log1p(q)


def posterior(psi, prior_var, cheap: FidelityClass, exp: FidelityClass,
              sel: Selection, y) -> PosteriorSummary:
    """Gaussian posterior of the reduced coordinates given measurements ``y``.

    ``y`` follows the cheap-then-expensive, ascending-index ordering of
    ``Selection.locations``. The covariance is assembled as
    ``D^{1/2} (I + D^{1/2} Psi_S^T N^{-1} Psi_S D^{1/2})^{-1} D^{1/2}`` with
    ``D = diag(prior_var)``, which avoids inverting the prior.
    """
    psi = np.asarray(psi, dtype=float)
    prior_var = np.asarray(prior_var, dtype=float)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if psi.ndim != 2 or prior_var.shape != (psi.shape[1],):
        raise InvalidInputError(
            f"psi {psi.shape} and prior_var {prior_var.shape} are inconsistent")
    if np.any(prior_var <= 0):
        raise InvalidInputError("prior variances must be positive")
    sel.check(psi.shape[0])
    locs = list(sel.locations())
    if y.shape != (len(locs),):
        raise InvalidInputError(f"expected {len(locs)} measurements, got {y.shape[0]}")
    ell = psi.shape[1]
    if not locs:
        return PosteriorSummary(np.zeros(ell), np.diag(prior_var))
    sd = np.sqrt(prior_var)
    noise_sd = np.array([cheap.sigma] * sel.k_cheap + [exp.sigma] * sel.k_exp)
    # rows of the whitened forward operator N^{-1/2} Psi_S D^{1/2}
    g = psi[locs, :] * sd[None, :] / noise_sd[:, None]
    b = np.eye(ell) + g.T @ g
    try:
        cf = la.cho_factor(b, lower=True, check_finite=False)
    except la.LinAlgError as exc:
        raise NumericalBreakdownError(f"posterior factorization failed: {exc}") from exc
    inner = la.cho_solve(cf, np.eye(ell), check_finite=False)
    cov = sd[:, None] * inner * sd[None, :]
    cov = 0.5 * (cov + cov.T)
    mean = sd * la.cho_solve(cf, g.T @ (y / noise_sd), check_finite=False)
    return PosteriorSummary(mean, cov)


def fits(spend: float, cost: float, budget: float) -> bool:
    """Whether ``cost`` more can be spent; forgives accumulated float roundoff."""
    return spend + cost <= budget * (1.0 + BUDGET_RTOL)


def floor_count(amount: float, cost: float) -> int:
    """``floor(amount / cost)`` robust to ``3 * 0.1 / 0.1 = 2.9999...``."""
    if amount < 0:
        return -1
    return int(math.floor(amount / cost * (1.0 + BUDGET_RTOL)))
