"""Reduced POD basis, prior covariance and candidate restriction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, InvalidInputError
from .model import FidelityClass, ProblemInstance, check_fidelity_order

ENERGY_SQUARED = "squared"
ENERGY_PLAIN = "plain"


@dataclass
class SnapshotMatrix:
    """``N x p`` snapshot data, one column per snapshot.

    ``mean`` is the column mean removed by :meth:`centered`, or ``None``.
    """

    data: np.ndarray
    mean: np.ndarray | None = None

    def __post_init__(self):
        self.data = np.array(self.data, dtype=float, ndmin=2)
        if self.data.ndim != 2:
            raise InvalidInputError("snapshot data must be a 2-D matrix")
        if self.data.shape[1] < 2:
            raise InvalidInputError(
                f"need at least 2 snapshots, got {self.data.shape[1]}")
        if not np.all(np.isfinite(self.data)):
            raise InvalidInputError("snapshot data contains non-finite values")

    @property
    def n_points(self) -> int:
        return self.data.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.data.shape[1]

    def centered(self) -> "SnapshotMatrix":
        mean = self.data.mean(axis=1)
        return SnapshotMatrix(self.data - mean[:, None], mean)

    def restored(self) -> np.ndarray:
        """Undo centering."""
        if self.mean is None:
            return self.data.copy()
        return self.data + self.mean[:, None]

    def split(self, train_frac: float = 0.70) -> tuple:
        """Chronological (column-order) train/test split."""
        if not 0 < train_frac < 1:
            raise InvalidInputError(f"train_frac must lie in (0, 1), got {train_frac}")
        n_train = int(round(train_frac * self.n_snapshots))
        n_train = min(max(n_train, 2), self.n_snapshots - 1)
        return self.data[:, :n_train], self.data[:, n_train:]


@dataclass
class ReducedModel:
    phi: np.ndarray
    sing_vals: np.ndarray
    prior_var: np.ndarray
    psi: np.ndarray
    cand_idx: np.ndarray
    lam: float
    n_snapshots: int
    energy: float = 0.99
    energy_mode: str = ENERGY_SQUARED
    mean: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_modes(self) -> int:
        return self.phi.shape[1]

    @property
    def n_points(self) -> int:
        return self.phi.shape[0]

    @property
    def n_candidates(self) -> int:
        return self.psi.shape[0]

    @property
    def centered(self) -> bool:
        return self.mean is not None

    def base_matrix(self) -> np.ndarray:
        """``Sigma_pr^{1/2} Psi^T`` (``ell x M``)."""
        return np.sqrt(self.prior_var)[:, None] * self.psi.T

    def offset(self) -> np.ndarray:
        return np.zeros(self.n_points) if self.mean is None else self.mean


def truncation_rank(sing_vals, energy: float, mode: str = ENERGY_SQUARED) -> int:
    """Smallest ``k`` whose cumulative energy fraction reaches ``energy``."""
    s = np.asarray(sing_vals, dtype=float)
    if mode == ENERGY_SQUARED:
        w = s ** 2
    elif mode == ENERGY_PLAIN:
        w = s.copy()
    else:
        raise InvalidInputError(f"unknown energy mode {mode!r}")
    frac = np.cumsum(w) / np.sum(w)
    # guard against cumsum roundoff leaving the last entry at 1 - eps
    frac[-1] = 1.0
    return int(np.searchsorted(frac, energy - 1e-15) + 1)


def build_reduced_basis(snapshots: SnapshotMatrix, energy: float = 0.99,
                        center: bool = True, max_modes: int | None = None,
                        mode: str = ENERGY_SQUARED):
    """Thin SVD of the (optionally centered) snapshots, truncated by energy.

    Returns ``(phi, sing_vals, mean)``; ``mean`` is ``None`` when ``center``
    is false.
    """
    if not 0 < energy <= 1:
        raise InvalidInputError(f"energy must lie in (0, 1], got {energy}")
    if max_modes is not None and max_modes < 1:
        raise InvalidInputError("max_modes must be at least 1")
    snaps = snapshots.centered() if center else snapshots
    u, s, _ = np.linalg.svd(snaps.data, full_matrices=False)
    tol = s[0] * max(snaps.data.shape) * np.finfo(float).eps if s.size else 0.0
    rank = int(np.sum(s > tol))
    if rank == 0:
        raise DegenerateInputError("snapshot matrix is identically zero")
    s = s[:rank]
    ell = truncation_rank(s, energy, mode)
    if max_modes is not None:
        ell = min(ell, max_modes)
    return u[:, :ell].copy(), s[:ell].copy(), snaps.mean


def prior_covariance(sing_vals, lam: float, p: int) -> np.ndarray:
    """Diagonal of the prior covariance, ``lam^2 s_i^2 / (p - 1)``."""
    if p < 2:
        raise InvalidInputError(f"need p >= 2 snapshots, got {p}")
    if not lam > 0:
        raise InvalidInputError(f"lambda must be positive, got {lam}")
    s = np.asarray(sing_vals, dtype=float)
    return lam ** 2 * s ** 2 / (p - 1)


def restrict_to_candidates(phi, cand_idx) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    idx = np.asarray(cand_idx, dtype=np.int64)
    if idx.ndim != 1 or idx.size == 0:
        raise InvalidInputError("candidate index set must be a non-empty 1-D list")
    if idx[0] < 0 or idx[-1] >= phi.shape[0]:
        raise InvalidInputError(
            f"candidate indices must lie in [0, {phi.shape[0]})")
    if np.any(np.diff(idx) <= 0):
        raise InvalidInputError("candidate indices must be strictly increasing")
    return phi[idx, :].copy()


def fit_reduced_model(snapshots: SnapshotMatrix, lam: float = 0.01, energy: float = 0.99,
                      center: bool = True, max_modes: int | None = None,
                      cand_idx=None, mode: str = ENERGY_SQUARED) -> ReducedModel:
    """Run the whole basis pipeline on training snapshots."""
    phi, s, mean = build_reduced_basis(snapshots, energy, center, max_modes, mode)
    if cand_idx is None:
        cand_idx = np.arange(phi.shape[0])
    cand_idx = np.asarray(cand_idx, dtype=np.int64)
    return ReducedModel(
        phi=phi,
        sing_vals=s,
        prior_var=prior_covariance(s, lam, snapshots.n_snapshots),
        psi=restrict_to_candidates(phi, cand_idx),
        cand_idx=cand_idx,
        lam=float(lam),
        n_snapshots=snapshots.n_snapshots,
        energy=float(energy),
        energy_mode=mode,
        mean=mean,
    )


def assemble_instance(model: ReducedModel, cheap: FidelityClass, exp: FidelityClass,
                      budget: float) -> ProblemInstance:
    check_fidelity_order(cheap, exp)
    return ProblemInstance.from_base(model.base_matrix(), cheap, exp, budget)
