"""Sparse Bayesian probit regression with a binary-mask spike-and-slab prior.

Two inference engines over one model: closed-form coordinate-ascent
variational Bayes and a collapsed blocked Gibbs sampler, plus the
simulation/evaluation harness and a CLI front end.
"""

from .data import Dataset, GramCache, Hyperparameters, TruthParams, derive_nu2, validate_and_cache
from .cavi import CaviConfig, CaviResult, ConvergenceRule, VariationalState, fit
from .gibbs import GibbsConfig, GibbsDraws, posterior_summaries, predictive_probs, run_chain
from .evaluation import (
    CvConfig,
    SimulationScenario,
    generate_dataset,
    predict_vb,
    run_scenario,
    selection_metrics,
    stratified_folds,
    test_deviance,
    tune_rho,
)
from .errors import DomainError, NumericalError, SparseProbitError, ValidationError

__version__ = "0.1.0"
