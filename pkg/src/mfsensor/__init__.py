"""Budgeted multifidelity D-optimal sensor placement.

Greedy (plain and Sherman-Morrison accelerated) and iterative allocation-based
selection of cheap and expensive sensors for Bayesian linear state estimation
on a reduced POD basis, with random and exhaustive baselines and MAP
reconstruction.
"""

from .baselines import (RegimeVerdict, counterexample_instance, exhaustive_search,
                        predict_regime, random_design)
from .basis import (ReducedModel, SnapshotMatrix, assemble_instance, build_reduced_basis,
                    fit_reduced_model, prior_covariance, restrict_to_candidates)
from .errors import (DataFormatError, DegenerateInputError, InvalidInputError, MFSensorError,
                     NumericalBreakdownError)
from .evaluate import (compare_designs, evaluate, reconstruct, simulate_measurement)
from .greedy import greedy_naive, greedy_select, greedy_sm
from .iterative import Allocation, CandidateSet, IterativeReport, iterative_select, prune_allocations
from .model import (CHEAP, EXPENSIVE, DesignResult, FidelityClass, PosteriorSummary,
                    ProblemInstance, Selection, marginal_gain, phi_d, posterior)

__version__ = "0.1.0"
