"""Desk-scale experiments: densities, tails, conditional laws, the revelation
strategy, rod structure and return patterns."""

from .conditional import segment_law_check, stop_prob_check, symmetry_tv
from .density import cut_and_rod_density, empty_effect_family, estimate_kappa
from .patterns import ReturnPattern, necessary_condition_check, realizes
from .rods import RodConfig, Window, rod_structure_check
from .strategy import StrategyParams, StrategyRun, strategy_run, strategy_sweep
from .sweeps import necessary_sweep, rod_structure_sweep
from .tails import excursion_bound_check, pruned_local_time_tail, tail_dominance

__all__ = [
    "RodConfig",
    "ReturnPattern",
    "StrategyParams",
    "StrategyRun",
    "Window",
    "cut_and_rod_density",
    "empty_effect_family",
    "estimate_kappa",
    "excursion_bound_check",
    "necessary_condition_check",
    "necessary_sweep",
    "pruned_local_time_tail",
    "realizes",
    "rod_structure_check",
    "rod_structure_sweep",
    "segment_law_check",
    "stop_prob_check",
    "strategy_run",
    "strategy_sweep",
    "symmetry_tv",
    "tail_dominance",
]
