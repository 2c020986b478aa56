"""Differentially private query answering and learning on databases that grow over time."""
from ._kernels import BACKEND
from .accountant import PrivacyBudget, PrivacyLedger, basic_compose, cdp_compose
from .blackbox import BlackBoxContract, ErmProblem, GridERM, LaplaceRelease, SmallDB
from .core import DatabaseStream, Histogram, LinearQuery, QueryEvent, Universe, add_entry, evaluate
from .noise import NoiseFunction, NoiselessSource, RandomSource, xi_pmwg
from .pmwg import PMWG, PMWGConfig
from .schedulers import run_ermg, run_fixed, run_improver, schedule_fixed, schedule_improver
from .sparse import AboveThreshold, NumericAboveThreshold, NumericSparse, SparseConfig

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "AboveThreshold", "BlackBoxContract", "DatabaseStream", "ErmProblem", "GridERM", "Histogram",
    "LaplaceRelease", "LinearQuery", "NoiseFunction", "NoiselessSource", "NumericAboveThreshold", "NumericSparse",
    "PMWG", "PMWGConfig", "PrivacyBudget", "PrivacyLedger", "QueryEvent", "RandomSource", "SmallDB",
    "SparseConfig", "Universe", "add_entry", "basic_compose", "cdp_compose", "evaluate", "run_ermg", "run_fixed",
    "run_improver", "schedule_fixed", "schedule_improver", "xi_pmwg",
]
