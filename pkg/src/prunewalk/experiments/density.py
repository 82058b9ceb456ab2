"""Density of retained steps, certified cut steps and rod points."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels as K
from ..lattice import LoopFamily, loop_family_new
from ..parallel import map_indexed
from ..prune import cut_mask_codes, matcher
from ..srw import ConfigError, WalkConfig, generate_codes, generate_two_sided
from .rods import RodConfig, RodError, Window, rod_block_probability, rod_cut_status, rod_points

DEVIATION_EXPONENTS = (0.6, 0.75, 0.9)


def empty_effect_family(d: int = 3) -> LoopFamily:
    """A loop with a diagonal step: walks never trace it, so nothing is pruned."""
    o = (0,) * d
    x = (1, 1) + (0,) * (d - 2)
    y = (1,) + (0,) * (d - 1)
    return loop_family_new([[o, x, y, o]])


def retained_counts(codes: np.ndarray, E: LoopFamily, times) -> np.ndarray:
    """N_t for each t in times, from the suffix minimum of pruned heights."""
    height = K.prune_scan(np.ascontiguousarray(codes), *matcher(E).args)[0]
    suffix = np.minimum.accumulate(height[::-1])[::-1]
    return np.array([int(suffix[t]) for t in times], np.int64)


@dataclass
class KappaEstimate:
    kappa_hat: float
    stderr: float
    rel_stderr: float
    n: int
    n_seeds: int
    buffer: int
    ratios: dict  # n -> list of N_n / n across seeds
    median_abs_dev: dict  # n -> median |N_n/n - kappa_hat|
    max_deviation: dict  # a -> max over seeds of |N_n - kappa_hat n| / n^a

    def to_json(self) -> dict:
        return {
            "kappa_hat": self.kappa_hat,
            "stderr": self.stderr,
            "rel_stderr": self.rel_stderr,
            "n": self.n,
            "n_seeds": self.n_seeds,
            "buffer": self.buffer,
            "median_abs_dev": {str(k): v for k, v in sorted(self.median_abs_dev.items())},
            "max_deviation": {str(k): v for k, v in sorted(self.max_deviation.items())},
        }


def estimate_kappa(E: LoopFamily, n: int, n_seeds: int, seed: int = 0, grid=None,
                   buffer: int | None = None, threads: int | None = None) -> KappaEstimate:
    """Mean of N_n / n over independent walks.

    N_n depends on the whole future; walks are run to n + buffer (default n)
    and the suffix minimum is taken there.
    """
    if n_seeds < 2:
        raise ConfigError("need at least two seeds for a stderr")
    cfg = WalkConfig(d=E.d, seed=seed, horizon=n)
    cfg.require_transient()
    grid = sorted(set(grid or ()) | {n})
    if grid[0] < 1:
        raise ConfigError("grid times must be positive")
    buf = n if buffer is None else buffer

    def one(i):
        codes = generate_codes(cfg, i, "kappa", n + buf)
        return retained_counts(codes, E, grid)

    rows = np.array(map_indexed(one, n_seeds, threads))
    ratios = {t: (rows[:, j] / t).tolist() for j, t in enumerate(grid)}
    x = np.asarray(ratios[n])
    kh = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(n_seeds))
    med = {t: float(np.median(np.abs(np.asarray(r) - kh))) for t, r in ratios.items()}
    dev = {a: float(np.max(np.abs(x * n - kh * n)) / n**a) for a in DEVIATION_EXPONENTS}
    return KappaEstimate(kh, se, se / kh if kh else math.inf, n, n_seeds, buf, ratios, med, dev)


# ------------------------------------------------------------- cut/rod

@dataclass
class CutRodSample:
    seed_index: int
    steps: int
    cut: int
    rods: int
    rod_cut: int
    containment_failures: list

    def to_json(self) -> dict:
        return {
            "index": self.seed_index,
            "steps": self.steps,
            "cut": self.cut,
            "rods": self.rods,
            "rod_cut": self.rod_cut,
            "containment_failures": self.containment_failures,
        }


@dataclass
class CutRodDensity:
    samples: list
    theta_cut: float
    cv_cut: float
    theta_rod: float
    rods_mean: float
    oracle: dict
    config: dict = field(default_factory=dict)

    @property
    def containment_failures(self) -> int:
        return sum(len(s.containment_failures) for s in self.samples)

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "theta_cut": self.theta_cut,
            "cv_cut": self.cv_cut,
            "theta_rod": self.theta_rod,
            "rods_mean": self.rods_mean,
            "oracle": self.oracle,
            "containment_failures": self.containment_failures,
            "per_seed": [s.to_json() for s in self.samples],
        }


def window_cut_sample(win: Window, E: LoopFamily, rc: RodConfig, I: tuple[int, int], index: int = 0) -> CutRodSample:
    """Certified cut steps inside I (certified on the whole window), rod
    points of I and the rod cut test, with containment of the latter in the
    former."""
    lo, hi = I
    mask = cut_mask_codes(win.codes, win.d, E)  # mask[i] is step win.start + i
    inside = mask[lo - win.start + 1:hi - win.start + 1]
    rods = rod_points(win, rc, I)
    fails = []
    n_rod_cut = 0
    for r in rods:
        st = rod_cut_status(win, E, rc, r)
        if st.cut:
            n_rod_cut += 1
            if not mask[r - win.start]:
                fails.append(r)
    return CutRodSample(index, hi - lo, int(inside.sum()), len(rods), n_rod_cut, fails)


def straight_block_count(codes: np.ndarray, x0: int, L: int) -> int:
    """Number of aligned 2L-blocks run straight along x0."""
    n = (codes.shape[0] // (2 * L)) * 2 * L
    return int((codes[:n].reshape(-1, 2 * L) == x0).all(axis=1).sum())


def cut_and_rod_density(E: LoopFamily, rc: RodConfig, n_seeds: int, size: int = 20_000,
                        margin: int = 5_000, seed: int = 0, oracle_L: int | None = None,
                        threads: int | None = None) -> CutRodDensity:
    """Cut and rod statistics on S[-h, h] with I centred and h = |I|/2 + margin.

    |I| is rounded down to a multiple of 2L. The rod-point oracle compares
    the total count of straight blocks with its binomial mean; ``oracle_L``
    sets the block half-length used there (default rc.L).
    """
    if n_seeds < 2:
        raise ConfigError("need at least two seeds")
    size = size - size % (2 * rc.L)
    if size < 2 * rc.L:
        raise RodError(f"window of {size} steps is shorter than one rod block")
    h = size // 2 + margin
    cfg = WalkConfig(d=E.d, seed=seed, horizon=h)
    lo = -(size // 2)
    I = (lo, lo + size)
    oL = rc.L if oracle_L is None else oracle_L

    def one(i):
        tw = generate_two_sided(cfg, i, h)
        win = Window(tw.codes, -h, E.d)
        smp = window_cut_sample(win, E, rc, I, i)
        return smp, straight_block_count(win.sub(*I), rc.x0, oL)

    out = map_indexed(one, n_seeds, threads)
    samples = [s for s, _ in out]
    blocks = sum(b for _, b in out)
    frac = np.array([s.cut / s.steps for s in samples])
    p = rod_block_probability(E.d, oL)
    trials = n_seeds * (size // (2 * oL))
    mean = trials * p
    sd = math.sqrt(trials * p * (1 - p))
    oracle = {
        "L": oL,
        "block_probability": p,
        "blocks": trials,
        "observed": blocks,
        "expected": mean,
        "sigma": sd,
        "z": (blocks - mean) / sd if sd > 0 else 0.0,
        "within_3sigma": abs(blocks - mean) <= 3 * sd,
    }
    return CutRodDensity(
        samples,
        float(frac.mean()),
        float(frac.std(ddof=1) / frac.mean()) if frac.mean() > 0 else math.inf,
        float(np.mean([s.rod_cut / s.steps for s in samples])),
        float(np.mean([s.rods for s in samples])),
        oracle,
        {"d": E.d, "seed": seed, "size": size, "margin": margin, "n_seeds": n_seeds, "rod": rc.to_json()},
    )
