"""Seeded simple random walk on Z^d: generation, excursions, escape
probability, erasable-excursion frequency and loop-family harvesting."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels as K
from .lattice import LoopFamily, Path, PathError, SimpleLoop, loop_family_new, origin, path_from_codes
from .parallel import map_blocks, rng_for
from .prune import matcher
from .segments import BudgetExceeded

SINGLE_STEP_BELOW = 32


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class WalkConfig:
    d: int = 3
    seed: int = 0
    horizon: int = 10_000
    truncation: str = "horizon"

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 1:
            raise ConfigError(f"dimension must be a positive integer, got {self.d!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1")
        if self.truncation not in ("horizon", "ball-exit"):
            raise ConfigError(f"unknown truncation policy {self.truncation!r}")

    def require_transient(self):
        if self.d < 3:
            raise ConfigError(f"estimator assumes a transient walk, d={self.d} < 3")


# ---------------------------------------------------------------- walks

def generate_codes(cfg: WalkConfig, index: int = 0, role: str = "walk", n: int | None = None) -> np.ndarray:
    return K.step_codes(rng_for(cfg.seed, role, index), cfg.horizon if n is None else n, cfg.d)


def generate_walk(cfg: WalkConfig, index: int = 0) -> Path:
    return path_from_codes(generate_codes(cfg, index).tolist(), cfg.d)


@dataclass(frozen=True)
class TwoSidedWalk:
    """Steps of S[-h, h] in chronological order; time t sits at row t + h of ``points``."""

    codes: np.ndarray
    half: int
    d: int

    @property
    def points(self) -> np.ndarray:
        pts = K.walk_points(self.codes, self.d)
        return pts - pts[self.half]

    def window_codes(self, a: int, b: int) -> np.ndarray:
        """Codes of the steps of S[a, b]."""
        if not -self.half <= a <= b <= self.half:
            raise PathError(f"window [{a},{b}] outside [-{self.half},{self.half}]")
        return self.codes[a + self.half:b + self.half]


def generate_two_sided(cfg: WalkConfig, index: int = 0, half: int | None = None) -> TwoSidedWalk:
    """Forward half from the walk stream, backward half S_{-n} = -S~_n from an
    independent mirror stream."""
    h = cfg.horizon if half is None else half
    fwd = generate_codes(cfg, index, "walk", h)
    back = generate_codes(cfg, index, "mirror", h)
    # step from S_{-n-1} to S_{-n} equals the (n+1)-th step of S~
    return TwoSidedWalk(np.concatenate([back[::-1], fwd]), h, cfg.d)


# ----------------------------------------------------------- excursions

@dataclass(frozen=True)
class ExcursionRecord:
    return_times: tuple[int, ...]
    excursions: tuple[Path, ...]
    flags: tuple[bool, ...] | None
    censored_length: int

    @property
    def count(self) -> int:
        return len(self.excursions)


def excursion_profile(path: Path, E: LoopFamily | None = None) -> ExcursionRecord:
    o = origin(path.d)
    if path.first != o:
        raise PathError("path must start at the origin")
    times = [0] + [t for t in range(1, path.length + 1) if path.points[t] == o]
    exc = tuple(path.window(a, b) for a, b in zip(times, times[1:]))
    flags = None
    if E is not None:
        from .segments import seg_membership

        flags = tuple(seg_membership(x, E) for x in exc)
    return ExcursionRecord(tuple(times), exc, flags, path.length - times[-1])


def return_count(codes: np.ndarray, d: int) -> int:
    pts = K.walk_points(codes, d)
    return int((~pts[1:].any(axis=1)).sum())


# ------------------------------------------------------------- escape

@dataclass(frozen=True)
class EscapeEstimate:
    gamma_hat: float
    alpha_hat: float
    stderr: float
    n_samples: int
    horizon: int
    seed: int
    note: str = "returns after the horizon are missed, so the estimate is biased upward"

    def to_json(self) -> dict:
        return {
            "estimate": self.gamma_hat,
            "alpha": self.alpha_hat,
            "stderr": self.stderr,
            "n": self.n_samples,
            "horizon": self.horizon,
            "seed": self.seed,
            "note": self.note,
        }


def alpha_of_gamma(gamma: float) -> float:
    return -1.0 / math.log(1.0 - gamma)


def first_return_times(cfg: WalkConfig, n_samples: int, threads: int | None = None,
                       horizon: int | None = None) -> np.ndarray:
    """First return times (-1 when none by the horizon), sample i always from
    the same stream."""
    cfg.require_transient()
    H = cfg.horizon if horizon is None else horizon

    def run(b, lo, hi):
        out = np.empty(hi - lo, np.int64)
        K.first_return_block(rng_for(cfg.seed, "gamma", b), hi - lo, cfg.d, H, SINGLE_STEP_BELOW, out)
        return out

    parts = map_blocks(run, n_samples, threads)
    return np.concatenate(parts) if parts else np.zeros(0, np.int64)


def _escape_from_times(times: np.ndarray, horizon: int, seed: int) -> EscapeEstimate:
    n = times.shape[0]
    if n == 0:
        raise ConfigError("zero samples")
    esc = int(((times < 0) | (times > horizon)).sum())
    g = esc / n
    se = math.sqrt(max(g * (1 - g), 0.0) / n)
    a = alpha_of_gamma(g) if 0 < g < 1 else math.nan
    return EscapeEstimate(g, a, se, n, horizon, seed)


def estimate_gamma(cfg: WalkConfig, n_samples: int, threads: int | None = None) -> EscapeEstimate:
    if n_samples < 1:
        raise ConfigError("zero samples")
    return _escape_from_times(first_return_times(cfg, n_samples, threads), cfg.horizon, cfg.seed)


def gamma_sweep(cfg: WalkConfig, n_samples: int, horizons, threads: int | None = None) -> list[EscapeEstimate]:
    """Estimates at several horizons from one set of walks run to the largest."""
    hs = sorted(int(h) for h in horizons)
    times = first_return_times(cfg, n_samples, threads, horizon=hs[-1])
    return [_escape_from_times(times, h, cfg.seed) for h in hs]


def survival_curve(times: np.ndarray, grid) -> list[tuple[int, float, float]]:
    """Fraction of walks not yet back at 0 by time t, with binomial stderr."""
    n = times.shape[0]
    ret = np.sort(times[times > 0])
    rows = []
    for t in grid:
        s = 1.0 - np.searchsorted(ret, t, side="right") / n
        rows.append((int(t), float(s), math.sqrt(max(s * (1 - s), 0.0) / n)))
    return rows


# ------------------------------------------------------ erasable returns

@dataclass(frozen=True)
class VarthetaEstimate:
    estimate: float
    stderr: float
    returned: int
    n: int
    horizon: int
    seed: int

    def to_json(self) -> dict:
        return asdict(self)


def excursion_sample(E: LoopFamily, cfg: WalkConfig, n_samples: int, threads: int | None = None,
                     role: str = "excursion"):
    """First excursions: (return time or -1, erasable flag) per sample."""
    cfg.require_transient()
    m = matcher(E)

    def run(b, lo, hi):
        buf = np.empty(cfg.horizon, np.int64)
        t = np.empty(hi - lo, np.int64)
        er = np.empty(hi - lo, np.bool_)
        K.excursion_block(rng_for(cfg.seed, role, b), hi - lo, cfg.d, cfg.horizon, *m.args, buf, t, er)
        return t, er

    parts = map_blocks(run, n_samples, threads)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def estimate_vartheta(E: LoopFamily, cfg: WalkConfig, n_samples: int, threads: int | None = None,
                      role: str = "excursion") -> VarthetaEstimate:
    """Frequency of erasable first excursions among those completed by the
    horizon; truncated excursions are dropped."""
    times, er = excursion_sample(E, cfg, n_samples, threads, role)
    ret = int((times > 0).sum())
    if ret == 0:
        raise BudgetExceeded("no completed excursions in sample")
    p = int(er.sum()) / ret
    return VarthetaEstimate(p, math.sqrt(p * (1 - p) / ret), ret, n_samples, cfg.horizon, cfg.seed)


def segment_mass_e1() -> float:
    """Total walk weight of erasable segments for the single back-and-forth loop."""
    return 18 - 12 * math.sqrt(2)


def vartheta_e1(gamma: float) -> float:
    # sum_k C_{k-1} 36^{-k} = (1 - sqrt(1 - 4/36)) / 2
    return (0.5 - math.sqrt(2) / 3) / (1 - gamma)


# ----------------------------------------------------------- harvesting

@dataclass(frozen=True)
class LoopInsertion:
    loop: SimpleLoop
    base: tuple
    index: int


def simple_loop_decomposition(loop: Path) -> list[LoopInsertion]:
    """Chronological stack scan: each revisit pops the simple loop it closes.

    Inserting the loops in reverse order of emission, each at its ``index``,
    rebuilds the input starting from (0).
    """
    o = origin(loop.d)
    if loop.first != o or loop.last != o:
        raise PathError("input must start and end at the origin")
    stack = [o]
    where = {o: 0}
    out = []
    for x in loop.points[1:]:
        if x in where:
            i = where[x]
            cyc = stack[i:] + [x]
            for y in stack[i + 1:]:
                del where[y]
            del stack[i + 1:]
            out.append(LoopInsertion(SimpleLoop(Path(tuple(tuple(a - b for a, b in zip(p, x)) for p in cyc))), x, i))
        else:
            where[x] = len(stack)
            stack.append(x)
    return out


def rebuild_from_loops(parts: list[LoopInsertion], d: int) -> Path:
    from .lattice import insert_loop, trivial_path

    cur = trivial_path(d)
    for ins in reversed(parts):
        cur = insert_loop(cur, ins.index, ins.loop)
    return cur


@dataclass
class HarvestResult:
    family: LoopFamily
    shapes: int
    held_out: VarthetaEstimate
    exact_mass: float
    target: float
    curve: list = field(default_factory=list)


def _returned_excursions(cfg: WalkConfig, n_samples: int, role: str, threads: int | None):
    def run(b, lo, hi):
        rng = rng_for(cfg.seed, role, b)
        buf = np.empty(cfg.horizon, np.int64)
        out = []
        for _ in range(hi - lo):
            tau = K.first_excursion(rng, cfg.d, cfg.horizon, buf)
            out.append(tuple(buf[:tau].tolist()) if tau > 0 else None)
        return out

    res = []
    for part in map_blocks(run, n_samples, threads):
        res.extend(part)
    return res


def harvest_loop_family(eps: float, cfg: WalkConfig, n_samples: int, threads: int | None = None,
                        gamma: float | None = None) -> HarvestResult:
    """Loop family from the most frequent first-return shapes.

    Shapes from one sample are ranked by frequency and the family is the union
    of their simple-loop decompositions. Prefixes of the ranking of doubling
    size are tried until the erasable frequency on an independent sample of the
    same size exceeds 1 - eps/2.
    """
    if not 0 < eps < 1:
        raise ConfigError("eps must lie in (0, 1)")
    cfg.require_transient()
    target = 1 - eps / 2
    shapes = Counter(x for x in _returned_excursions(cfg, n_samples, "harvest", threads) if x is not None)
    held = [x for x in _returned_excursions(cfg, n_samples, "tail", threads) if x is not None]
    if not shapes or not held:
        raise BudgetExceeded("no completed excursions to harvest")
    ranked = sorted(shapes.items(), key=lambda kv: (-kv[1], len(kv[0]), kv[0]))
    flat = np.array([c for x in held for c in x], np.int64)
    offsets = np.cumsum([0] + [len(x) for x in held]).astype(np.int64)
    g = gamma if gamma is not None else estimate_gamma(cfg, n_samples, threads).gamma_hat

    loops: dict = {}
    done = 0
    curve = []
    k = 1
    while True:
        k = min(k, len(ranked))
        for codes, _ in ranked[done:k]:
            for ins in simple_loop_decomposition(path_from_codes(list(codes), cfg.d)):
                loops.setdefault(ins.loop, None)
        done = k
        E = loop_family_new(sorted(loops, key=lambda e: (e.length, e.points)))
        hits = K.count_erasable(flat, offsets, *matcher(E).args)
        p = hits / len(held)
        curve.append((k, p))
        if p > target:
            break
        if k == len(ranked):
            raise BudgetExceeded(
                f"all {k} harvested shapes reach only {p:.4f} <= {target:.4f} on the held-out sample"
            )
        k *= 2
    est = VarthetaEstimate(p, math.sqrt(p * (1 - p) / len(held)), len(held), n_samples, cfg.horizon, cfg.seed)
    exact = sum((2 * cfg.d) ** -len(c) for c, _ in ranked[:k]) / (1 - g)
    return HarvestResult(E, k, est, exact, target, curve)


# ------------------------------------------------------------- misc

def rate_function(x: float, theta: float) -> float:
    if not (0 < x < 1 and 0 < theta < 1):
        raise ValueError("arguments must lie in (0, 1)")
    return x * math.log(x / theta) + (1 - x) * math.log((1 - x) / (1 - theta))


@dataclass(frozen=True)
class LocalTimeStats:
    counts: dict
    max_local_time: int
    argmax: tuple


def local_time_stats(path: Path) -> LocalTimeStats:
    c = Counter(path.points)
    top = max(c.values())
    return LocalTimeStats(dict(c), top, tuple(sorted(x for x, v in c.items() if v == top)))


def max_local_time_codes(codes: np.ndarray, d: int) -> int:
    keys = np.sort(K.site_keys(K.walk_points(codes, d)))
    edges = np.flatnonzero(np.diff(keys)) + 1
    runs = np.diff(np.concatenate([[0], edges, [keys.shape[0]]]))
    return int(runs.max())


def local_time_ratio(cfg: WalkConfig, n_seeds: int, threads: int | None = None) -> np.ndarray:
    """xi*(n) / log n for independent walks of length cfg.horizon."""
    from .parallel import map_indexed

    def one(i):
        return max_local_time_codes(generate_codes(cfg, i, "local_time"), cfg.d) / math.log(cfg.horizon)

    return np.array(map_indexed(one, n_seeds, threads))
