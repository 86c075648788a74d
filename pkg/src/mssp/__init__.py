"""Multiagent stochastic shortest path: coordinated and autonomous strategy synthesis."""

from .autohit import Hyperparams, InitScheme, autohit
from .coorhit import build_product, coord_value, solve_coordinated
from .mdp import (
    FiniteMemoryStrategy,
    InvalidModel,
    Mdp,
    MemorylessStrategy,
    MsspInstance,
    Profile,
)
from .profile_eval import evaluate, exact_mhit_product, truncated_mhit
from .ssp import eval_strategy, solve_ssp

__version__ = "0.1.0"

__all__ = [
    "FiniteMemoryStrategy",
    "Hyperparams",
    "InitScheme",
    "InvalidModel",
    "Mdp",
    "MemorylessStrategy",
    "MsspInstance",
    "Profile",
    "autohit",
    "build_product",
    "coord_value",
    "eval_strategy",
    "evaluate",
    "exact_mhit_product",
    "solve_coordinated",
    "solve_ssp",
    "truncated_mhit",
]
