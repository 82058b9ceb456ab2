"""Lattice points, finite paths, simple loops and loop families on Z^d."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

Point = tuple[int, ...]

# exact rationals up to this length, log-space beyond
EXACT_WEIGHT_MAX_LEN = 64


class PathError(ValueError):
    pass


class LoopFamilyError(ValueError):
    pass


def origin(d: int) -> Point:
    return (0,) * d


def unit(d: int, axis: int, sign: int = 1) -> Point:
    """Unit vector along ``axis`` (0-based) with the given sign."""
    return tuple(sign if i == axis else 0 for i in range(d))


def add(x: Point, y: Point) -> Point:
    return tuple(a + b for a, b in zip(x, y))


def sub(x: Point, y: Point) -> Point:
    return tuple(a - b for a, b in zip(x, y))


def norm1(x: Point) -> int:
    return sum(abs(a) for a in x)


def is_unit_step(x: Point, y: Point) -> bool:
    return norm1(sub(y, x)) == 1


def direction_code(step: Point) -> int:
    """Code of a unit step: 2*axis for +u_axis, 2*axis+1 for -u_axis."""
    for axis, c in enumerate(step):
        if c == 1:
            return 2 * axis
        if c == -1:
            return 2 * axis + 1
    raise PathError(f"not a unit step: {step}")


def direction_vectors(d: int) -> np.ndarray:
    """Array of shape (2d, d) whose row c is the unit step with code c."""
    out = np.zeros((2 * d, d), dtype=np.int64)
    for axis in range(d):
        out[2 * axis, axis] = 1
        out[2 * axis + 1, axis] = -1
    return out


@dataclass(frozen=True, order=True)
class Path:
    """Immutable finite path; ``length`` is the number of steps."""

    points: tuple[Point, ...]

    def __post_init__(self):
        if not self.points:
            raise PathError("empty path")

    @property
    def length(self) -> int:
        return len(self.points) - 1

    @property
    def d(self) -> int:
        return len(self.points[0])

    @property
    def first(self) -> Point:
        return self.points[0]

    @property
    def last(self) -> Point:
        return self.points[-1]

    @property
    def nearest_neighbor(self) -> bool:
        p = self.points
        return all(is_unit_step(p[i], p[i + 1]) for i in range(len(p) - 1))

    def __getitem__(self, i: int) -> Point:
        return self.points[i]

    def window(self, a: int, b: int) -> Path:
        """The sub-path s[a, b] (both ends included)."""
        if not 0 <= a <= b <= self.length:
            raise PathError(f"window [{a},{b}] outside [0,{self.length}]")
        return Path(self.points[a:b + 1])

    def translate(self, x: Point) -> Path:
        return Path(tuple(add(p, x) for p in self.points))

    def rooted(self) -> Path:
        """Shift so that the path starts at the origin."""
        return self.translate(tuple(-c for c in self.first))

    def steps(self) -> list[Point]:
        p = self.points
        return [sub(p[i + 1], p[i]) for i in range(len(p) - 1)]

    def to_list(self) -> list[list[int]]:
        return [list(p) for p in self.points]

    def __repr__(self):
        return f"Path({list(self.points)})"


def trivial_path(d: int) -> Path:
    return Path((origin(d),))


def validate_path(points: Sequence[Sequence[int]], require_nn: bool = False) -> Path:
    if len(points) == 0:
        raise PathError("empty input")
    pts = tuple(tuple(int(c) for c in p) for p in points)
    d = len(pts[0])
    if d < 1:
        raise PathError("dimension must be at least 1")
    for i, p in enumerate(pts):
        if len(p) != d:
            raise PathError(f"point {i} has dimension {len(p)}, expected {d}")
    if require_nn:
        for i in range(len(pts) - 1):
            if not is_unit_step(pts[i], pts[i + 1]):
                raise PathError(f"step {i + 1} from {pts[i]} to {pts[i + 1]} is not a unit step")
    return Path(pts)


def path_from_codes(codes: Iterable[int], d: int, start: Point | None = None) -> Path:
    x = list(start) if start is not None else [0] * d
    pts = [tuple(x)]
    for c in codes:
        x[c // 2] += 1 if c % 2 == 0 else -1
        pts.append(tuple(x))
    return Path(tuple(pts))


def concat(a: Path, b: Path, mode: str = "direct") -> Path:
    if a.d != b.d:
        raise PathError("dimension mismatch")
    if mode == "direct":
        if a.last != b.first:
            raise PathError(f"direct concatenation needs a.last == b.first, got {a.last} and {b.first}")
        return Path(a.points + b.points[1:])
    if mode == "translated":
        if b.first != origin(b.d):
            raise PathError("translated concatenation needs b to start at the origin")
        x = a.last
        return Path(a.points + tuple(add(x, p) for p in b.points[1:]))
    raise PathError(f"unknown concatenation mode {mode!r}")


def insert_loop(eta: Path, j: int, e: Path | SimpleLoop) -> Path:
    """Insert the rooted closed path ``e`` right after the j-th point of ``eta``."""
    ep = e.path if isinstance(e, SimpleLoop) else e
    if not 0 <= j <= eta.length:
        raise PathError(f"insertion index {j} outside [0,{eta.length}]")
    if ep.first != origin(ep.d) or ep.last != ep.first:
        raise PathError("inserted path must start and end at the origin")
    x = eta.points[j]
    mid = tuple(add(x, p) for p in ep.points)
    return Path(eta.points[:j] + mid + eta.points[j + 1:])


def local_time(eta: Path, x: Point) -> int:
    if len(x) != eta.d:
        raise PathError("dimension mismatch")
    return sum(1 for p in eta.points if p == x)


def local_times(eta: Path) -> Counter:
    return Counter(eta.points)


def max_local_time(eta: Path) -> int:
    return max(local_times(eta).values())


def path_probability(eta: Path, d: int | None = None):
    """Walk weight (2d)^-|eta|, exact for short paths and a float beyond.

    Zero if some step is not a unit step.
    """
    d = eta.d if d is None else d
    if eta.first != origin(eta.d):
        raise PathError("path must start at the origin")
    if not eta.nearest_neighbor:
        return Fraction(0) if eta.length <= EXACT_WEIGHT_MAX_LEN else 0.0
    if eta.length <= EXACT_WEIGHT_MAX_LEN:
        return Fraction(1, (2 * d) ** eta.length)
    return math.exp(log_path_probability(eta, d))


def log_path_probability(eta: Path, d: int | None = None) -> float:
    d = eta.d if d is None else d
    if not eta.nearest_neighbor:
        return -math.inf
    return -eta.length * math.log(2 * d)


def is_simple_loop(path: Path) -> bool:
    pts = path.points
    if len(pts) < 2:
        return False
    o = origin(path.d)
    if pts[0] != o or pts[-1] != o:
        return False
    return len(set(pts[:-1])) == len(pts) - 1


@dataclass(frozen=True, order=True)
class SimpleLoop:
    path: Path

    def __post_init__(self):
        if not is_simple_loop(self.path):
            raise LoopFamilyError(f"not a simple loop: {list(self.path.points)}")

    @classmethod
    def from_points(cls, points) -> SimpleLoop:
        return cls(validate_path(points))

    @property
    def length(self) -> int:
        return self.path.length

    @property
    def points(self) -> tuple[Point, ...]:
        return self.path.points

    def steps(self) -> list[Point]:
        return self.path.steps()


def _diam1(points: Sequence[Point]) -> int:
    return max(norm1(sub(p, q)) for p in points for q in points)


@dataclass(frozen=True)
class LoopFamily:
    """Ordered finite family of simple loops.

    Distances use the l1 (graph) norm on Z^d.
    """

    loops: tuple[SimpleLoop, ...]
    strict: bool = True

    def __post_init__(self):
        if not self.loops:
            raise LoopFamilyError("loop family must be nonempty")
        d = self.loops[0].path.d
        for k, e in enumerate(self.loops):
            if e.path.d != d:
                raise LoopFamilyError(f"loop {k}: dimension {e.path.d}, expected {d}")
            if self.strict and e.length < 2:
                raise LoopFamilyError(f"loop {k}: length {e.length} < 2")
        if len(set(self.loops)) != len(self.loops):
            raise LoopFamilyError("duplicate loops in family")

    @property
    def d(self) -> int:
        return self.loops[0].path.d

    def __len__(self):
        return len(self.loops)

    def __getitem__(self, i: int) -> SimpleLoop:
        """Loop by 1-based label."""
        if not 1 <= i <= len(self.loops):
            raise IndexError(i)
        return self.loops[i - 1]

    @cached_property
    def lambdas(self) -> tuple[int, ...]:
        return tuple(e.length - 1 for e in self.loops)

    def lam(self, label: int) -> int:
        return self.loops[label - 1].length - 1

    @cached_property
    def L_E(self) -> int:
        return 1 + max(_diam1(e.points) for e in self.loops)

    @cached_property
    def D_E(self) -> int:
        return max(norm1(p) for e in self.loops for p in e.points)

    @cached_property
    def max_len(self) -> int:
        return max(e.length for e in self.loops)

    @cached_property
    def walk_compatible(self) -> bool:
        return all(e.path.nearest_neighbor for e in self.loops)

    @cached_property
    def _labels(self) -> dict:
        return {x: i + 1 for i, x in enumerate(self.loops)}

    def label_of(self, e: SimpleLoop) -> int:
        return self._labels[e]

    def to_json(self) -> dict:
        return {"d": self.d, "loops": [e.path.to_list() for e in self.loops]}

    def union(self, other: LoopFamily) -> LoopFamily:
        seen = list(self.loops)
        for e in other.loops:
            if e not in seen:
                seen.append(e)
        return LoopFamily(tuple(seen), strict=self.strict and other.strict)


def loop_family_new(loops: Sequence[SimpleLoop | Sequence], strict: bool = True) -> LoopFamily:
    out = []
    for k, e in enumerate(loops):
        if isinstance(e, SimpleLoop):
            out.append(e)
            continue
        try:
            out.append(SimpleLoop(validate_path(e)))
        except (PathError, LoopFamilyError) as exc:
            raise LoopFamilyError(f"loop {k}: {exc}") from None
    return LoopFamily(tuple(out), strict=strict)


def loop_family_from_json(obj: dict, strict: bool = True) -> LoopFamily:
    if not isinstance(obj, dict) or "d" not in obj or "loops" not in obj:
        raise LoopFamilyError('expected an object with keys "d" and "loops"')
    d = obj["d"]
    if not isinstance(d, int) or d < 1:
        raise LoopFamilyError(f"bad dimension {d!r}")
    loops = obj["loops"]
    if not isinstance(loops, list) or not loops:
        raise LoopFamilyError('"loops" must be a nonempty list')
    for k, e in enumerate(loops):
        if not isinstance(e, list) or not e:
            raise LoopFamilyError(f"loop {k}: expected a nonempty list of points")
        for i, p in enumerate(e):
            if not isinstance(p, list) or len(p) != d or not all(isinstance(c, int) for c in p):
                raise LoopFamilyError(f"loop {k}, point {i}: expected {d} integers")
    return loop_family_new(loops, strict=strict)


def load_loop_family(path: str, strict: bool = True) -> LoopFamily:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise LoopFamilyError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    try:
        return loop_family_from_json(obj, strict=strict)
    except LoopFamilyError as exc:
        raise LoopFamilyError(f"{path}: {exc}") from None


def backtrack_loop(d: int, axis: int, sign: int = 1) -> SimpleLoop:
    o = origin(d)
    return SimpleLoop(Path((o, unit(d, axis, sign), o)))


def family_e1(d: int = 3) -> LoopFamily:
    """The single loop (0, u1, 0)."""
    return LoopFamily((backtrack_loop(d, 0),))


def family_backtracks(d: int = 3) -> LoopFamily:
    """All 2d back-and-forth loops (0, +-u_i, 0)."""
    return LoopFamily(tuple(backtrack_loop(d, a, s) for a in range(d) for s in (1, -1)))


def square_loops(d: int = 3) -> list[SimpleLoop]:
    """All rooted oriented unit squares."""
    out = []
    for a in range(d):
        for b in range(d):
            if a == b:
                continue
            for sa in (1, -1):
                for sb in (1, -1):
                    x = unit(d, a, sa)
                    y = add(x, unit(d, b, sb))
                    z = unit(d, b, sb)
                    out.append(SimpleLoop(Path((origin(d), x, y, z, origin(d)))))
    return out


def family_squares(d: int = 3) -> LoopFamily:
    """Back-and-forth loops followed by unit squares."""
    return LoopFamily(family_backtracks(d).loops + tuple(square_loops(d)))


NAMED_FAMILIES = {
    "E1": family_e1,
    "backtracks": family_backtracks,
    "squares": family_squares,
}


def named_family(name: str, d: int = 3) -> LoopFamily:
    try:
        return NAMED_FAMILIES[name](d)
    except KeyError:
        raise LoopFamilyError(f"unknown family {name!r}; known: {sorted(NAMED_FAMILIES)}") from None
