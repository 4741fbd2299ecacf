"""Markov branching fragmentation trees: Poisson-Dirichlet split laws, spinal
decompositions, re-rooting invariance and kernel reconstruction."""
from .errors import (CapacityError, DomainError, KernelInconsistencyError, NumericError, SpinalError,
                     ValidationError)
from .pdlaws import LevyKernel, PdParams, eppf_pd, eprf_pdstar, laplace_exponent, total_rate
from .splitlaw import BrownianLaw, PDStarLaw, SplitLaw, TableLaw, make_law
from .trees import FragTree, reroot, shape_distribution

__version__ = "0.1.0"
