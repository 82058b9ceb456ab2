"""Window sweeps for the rod structure checks and the necessary-condition
search, over planted and sampled windows."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels as K
from ..lattice import LoopFamily
from ..parallel import map_indexed, rng_for, thread_count
from ..segments import BudgetExceeded
from ..srw import ConfigError
from .patterns import necessary_condition_check
from .rods import RodConfig, Window, planted_codes, random_planted_window, rod_structure_check

WINDOW_KINDS = ("planted", "sampled")
WAVE = 16  # windows per wave; fixed so stopping does not depend on threads


def sampled_window(rc: RodConfig, d: int, n_blocks: int, rng: np.random.Generator, rod_rate: float = 0.3) -> Window:
    """Uniform walk steps on the block grid, with each 2L-block replaced by a
    straight rod independently with probability rod_rate."""
    n = 2 * rc.L
    codes = K.step_codes(rng, n * n_blocks, d).reshape(n_blocks, n)
    codes[rng.random(n_blocks) < rod_rate] = rc.x0
    return Window(np.ascontiguousarray(codes.reshape(-1)), 0, d)


def make_window(kind: str, rc: RodConfig, d: int, n_blocks: int, rng: np.random.Generator) -> Window:
    if kind == "planted":
        return random_planted_window(rc, d, n_blocks, rng)
    if kind == "sampled":
        return sampled_window(rc, d, n_blocks, rng)
    raise ConfigError(f"unknown window kind {kind!r}; expected one of {WINDOW_KINDS}")


@dataclass
class RodSweep:
    kind: str
    windows: int
    rods: int
    checked: int
    violations: list
    counts: dict
    k_values: dict
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "windows": self.windows,
            "rods": self.rods,
            "checked": self.checked,
            "violations": self.violations[:50],
            "violation_count": len(self.violations),
            "counts": dict(sorted(self.counts.items())),
            "k_values": {str(k): v for k, v in sorted(self.k_values.items())},
            "config": self.config,
        }


def rod_structure_sweep(E: LoopFamily, rc: RodConfig, target: int, kind: str = "planted", n_blocks: int = 24,
                        seed: int = 0, max_windows: int = 100_000, threads: int | None = None) -> RodSweep:
    """Check windows in index order until at least `target` rod points were checked."""
    if target < 1:
        raise ConfigError("target must be positive")

    def one(i):
        win = make_window(kind, rc, E.d, n_blocks, rng_for(seed, "rod", i))
        return rod_structure_check(win, E, rc)

    k = thread_count(threads)
    reps, i = [], 0
    while sum(r.checked for r in reps) < target:
        if i >= max_windows:
            raise BudgetExceeded(f"{i} windows gave fewer than {target} rod points")
        reps += map_indexed(lambda j: one(i + j), WAVE, k)
        i += WAVE
    counts: Counter = Counter()
    for r in reps:
        counts.update(r.counts)
    return RodSweep(kind, len(reps), sum(r.rods for r in reps), sum(r.checked for r in reps),
                    [f"window {w}: {v}" for w, r in enumerate(reps) for v in r.violations], dict(counts),
                    dict(Counter(k for r in reps for k in r.k_values)),
                    {"n_blocks": n_blocks, "seed": seed, "rod": rc.to_json()})


@dataclass
class NecessarySweep:
    kind: str
    windows: int
    applicable: int
    witnesses: int
    counterexamples: list
    cases: dict
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "windows": self.windows,
            "applicable": self.applicable,
            "witnesses": self.witnesses,
            "counterexamples": self.counterexamples[:50],
            "counterexample_count": len(self.counterexamples),
            "cases": dict(sorted(self.cases.items())),
            "config": self.config,
        }


def necessary_sweep(E: LoopFamily, rc: RodConfig, target: int, kind: str = "planted", n_blocks: int = 60,
                    seed: int = 0, max_windows: int = 20_000, threads: int | None = None) -> NecessarySweep:
    """Run the witness search on windows in index order until `target` of
    them were applicable."""
    if target < 1:
        raise ConfigError("target must be positive")

    def one(i):
        win = make_window(kind, rc, E.d, n_blocks, rng_for(seed, "pattern", i))
        return necessary_condition_check(win, E, rc)

    k = thread_count(threads)
    verdicts, i = [], 0
    while sum(v.status != "not-applicable" for v in verdicts) < target:
        if i >= max_windows:
            raise BudgetExceeded(f"{i} windows gave fewer than {target} applicable ones")
        verdicts += map_indexed(lambda j: one(i + j), WAVE, k)
        i += WAVE
    app = [(w, v) for w, v in enumerate(verdicts) if v.status != "not-applicable"]
    return NecessarySweep(kind, len(verdicts), len(app), sum(v.status == "witness" for _, v in app),
                          [{"window": w, **v.to_json()} for w, v in app if v.status == "counterexample"],
                          dict(Counter(v.case or v.status for _, v in app)),
                          {"n_blocks": n_blocks, "seed": seed, "rod": rc.to_json()})
