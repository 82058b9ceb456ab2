"""Erasable segments and their tree / elementary-sequence encodings.

Addresses are Ulam-Harris tuples of positive integers, the root being ``()``.
Python tuple order is the lexicographic order on addresses (a proper prefix
sorts first), which is the order used throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from . import _kernels as K
from .lattice import LoopFamily, Path, PathError, add, origin, trivial_path
from .prune import first_loop_time, matcher, scan_codes

Address = tuple

MAX_ENUM_LEN = 24


class SegmentError(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


def _codes(E: LoopFamily, s: Path) -> np.ndarray:
    return matcher(E).encode(s)


def is_pruned(s: Path, E: LoopFamily) -> bool:
    return bool((scan_codes(_codes(E, s), E).pop_time < 0).all())


def _member_codes(codes: np.ndarray, m: int, E: LoopFamily) -> bool:
    h = scan_codes(codes, E).height
    return bool(h[-1] == m and h[m:].min() >= m)


def seg_membership(eta: Path, E: LoopFamily, prefix: Path | None = None) -> bool:
    """Whether eta is erasable and, given a pruned prefix, leaves it intact."""
    if eta.first != origin(eta.d):
        raise PathError("segment must start at the origin")
    if prefix is None:
        return _member_codes(_codes(E, eta), 0, E)
    if not is_pruned(prefix, E):
        raise SegmentError("prefix is not a pruned path")
    codes = np.concatenate([_codes(E, prefix), _codes(E, eta)])
    return _member_codes(codes, prefix.length, E)


def _path_of_codes(codes: tuple, vectors: list, d: int) -> Path:
    pts = [origin(d)]
    for c in codes:
        pts.append(add(pts[-1], vectors[c]))
    return Path(tuple(pts))


def enumerate_segments(E: LoopFamily, max_len: int, prefix: Path | None = None) -> list[Path]:
    """All erasable segments of length <= max_len (optionally compatible with a
    pruned prefix), sorted by (length, points).

    Every erasable segment is its single-loop pruning with one loop inserted,
    so inserting every loop at every position level by level reaches all of
    them; each candidate is re-checked before it is kept.
    """
    if max_len > MAX_ENUM_LEN:
        raise BudgetExceeded(f"max_len {max_len} exceeds the enumeration cap {MAX_ENUM_LEN}")
    m = matcher(E)
    loop_codes = [tuple(m.code_of[st] for st in e.steps()) for e in E.loops]
    seen = {()}
    frontier = [()]
    while frontier:
        nxt = []
        for c in frontier:
            for lc in loop_codes:
                if len(c) + len(lc) > max_len:
                    continue
                for j in range(len(c) + 1):
                    cand = c[:j] + lc + c[j:]
                    if cand in seen:
                        continue
                    if _member_codes(np.array(cand, np.int64), 0, E):
                        seen.add(cand)
                        nxt.append(cand)
        frontier = nxt
    vectors = [None] * len(m.code_of)
    for v, c in m.code_of.items():
        vectors[c] = v
    out = [_path_of_codes(c, vectors, E.d) for c in seen]
    if prefix is not None:
        out = [p for p in out if seg_membership(p, E, prefix)]
    out.sort(key=lambda p: (p.length, p.points))
    return out


def brute_force_counts(E: LoopFamily, max_len: int, target: Path | None = None) -> np.ndarray:
    """Number of nearest-neighbour walks of each length <= max_len whose
    pruning equals ``target`` (default: the trivial path), by exhaustive search."""
    m = matcher(E)
    tgt = np.zeros(0, np.int64) if target is None else m.encode(target)
    out = np.zeros((1, 1), np.int64)
    return K.dfs_walks(2 * E.d, max_len, *m.args, m.max_drop, tgt, out, False)


def brute_force_walks(E: LoopFamily, max_len: int, target: Path) -> list[Path]:
    m = matcher(E)
    tgt = m.encode(target)
    counts = brute_force_counts(E, max_len, target)
    out = np.full((int(counts.sum()), max(max_len, 1)), -1, np.int64)
    K.dfs_walks(2 * E.d, max_len, *m.args, m.max_drop, tgt, out, True)
    from .lattice import path_from_codes

    return [path_from_codes([int(c) for c in row if c >= 0], E.d) for row in out]


# -------------------------------------------------------------------- trees

def parse_blocks(labels: Iterable[int], E: LoopFamily) -> list[int]:
    """Split a child-label sequence into elementary blocks; returns block types."""
    labels = list(labels)
    out = []
    i = 0
    while i < len(labels):
        a = labels[i]
        if not 1 <= a <= len(E):
            raise SegmentError(f"label {a} outside 1..{len(E)}")
        lam = E.lam(a)
        if labels[i:i + lam] != [a] * lam:
            raise SegmentError(f"incomplete block of type {a} at child {i + 1}")
        out.append(a)
        i += lam
    return out


def _block_position(labels: tuple, k: int, E: LoopFamily) -> tuple[int, int]:
    """(1-based position within its block, block length) of child k (1-based)."""
    i = 0
    while True:
        lam = E.lam(labels[i])
        if k <= i + lam:
            return k - i, lam
        i += lam


def addr_str(a: Address) -> str:
    return ".".join(str(x) for x in a)


def parse_addr(s: str) -> Address:
    if s == "":
        return ()
    try:
        out = tuple(int(x) for x in s.split("."))
    except ValueError:
        raise SegmentError(f"bad address {s!r}") from None
    if any(x < 1 for x in out):
        raise SegmentError(f"bad address {s!r}")
    return out


class MarkedTree:
    """Rooted ordered tree with labelled non-root vertices.

    Stored as a map from each address with children to its tuple of child
    labels; leaves are implicit.
    """

    def __init__(self, children: Mapping[Address, tuple] | None = None):
        self.children = {tuple(a): tuple(l) for a, l in (children or {}).items() if l}

    def __eq__(self, other):
        return isinstance(other, MarkedTree) and self.children == other.children

    def __hash__(self):
        return hash(tuple(sorted(self.children.items())))

    def __repr__(self):
        return f"MarkedTree({dict(sorted(self.children.items()))})"

    def vertices(self) -> list[Address]:
        out = [()]
        stack = [()]
        while stack:
            a = stack.pop()
            for k in range(1, len(self.children.get(a, ())) + 1):
                out.append(a + (k,))
                stack.append(a + (k,))
        return sorted(out)

    def label(self, a: Address) -> int:
        return self.children[a[:-1]][a[-1] - 1]

    def to_json(self) -> dict:
        return {"nodes": {addr_str(a): list(l) for a, l in sorted(self.children.items())}}

    @classmethod
    def from_json(cls, obj: dict) -> MarkedTree:
        return cls({parse_addr(k): tuple(v) for k, v in obj["nodes"].items()})


def validate_tree(T: MarkedTree, E: LoopFamily) -> bool:
    verts = set(T.vertices())
    for a, labels in T.children.items():
        if a not in verts:
            return False
        try:
            parse_blocks(labels, E)
        except SegmentError:
            return False
    return True


def _require_tree(T: MarkedTree, E: LoopFamily):
    if not validate_tree(T, E):
        raise SegmentError("not an E-segmented marked tree")


def _traverse(T: MarkedTree, E: LoopFamily) -> list[Address]:
    f = [()]
    nxt: dict = {}
    cur = ()
    while True:
        labels = T.children.get(cur, ())
        k = nxt.get(cur, 0)
        if k < len(labels):
            nxt[cur] = k + 1
            cur = cur + (k + 1,)
        elif cur == ():
            return f
        else:
            par, j = cur[:-1], cur[-1]
            q, lam = _block_position(T.children[par], j, E)
            if q < lam:
                nxt[par] = j + 1
                cur = par + (j + 1,)
            else:
                cur = par
        f.append(cur)


def e_dfs(T: MarkedTree, E: LoopFamily) -> list[Address]:
    """Block-aware depth-first traversal: inside an elementary block the walk
    moves on to the next sibling and only returns to the parent after the
    block's last subtree."""
    _require_tree(T, E)
    return _traverse(T, E)


def _positions(T: MarkedTree, E: LoopFamily) -> dict:
    pos = {(): origin(E.d)}
    for a in T.vertices()[1:]:
        par = a[:-1]
        labels = T.children[par]
        q, _ = _block_position(labels, a[-1], E)
        pos[a] = add(pos[par], E[labels[a[-1] - 1]].points[q])
    return pos


def segment_of_tree(T: MarkedTree, E: LoopFamily) -> Path:
    _require_tree(T, E)
    pos = _positions(T, E)
    return Path(tuple(pos[a] for a in _traverse(T, E)))


def prune_one_chain(eta: Path, E: LoopFamily) -> list[tuple[int, int]]:
    """Insertions (position, label) rebuilding eta from (0), earliest first."""
    chain = []
    cur = eta
    while cur.length:
        hit = first_loop_time(cur, E)
        if hit is None:
            raise SegmentError("path is not erasable")
        tau, label = hit
        L = E[label].length
        chain.append((tau - L, label))
        cur = Path(cur.points[:tau - L + 1] + cur.points[tau + 1:])
    return chain[::-1]


def tree_of_segment(eta: Path, E: LoopFamily) -> MarkedTree:
    """Canonical tree: replay the single-loop prunings in reverse, attaching
    each loop's children to the vertex visited at the insertion time."""
    if eta.first != origin(eta.d):
        raise PathError("segment must start at the origin")
    children: dict = {}
    for j, label in prune_one_chain(eta, E):
        T = MarkedTree(children)
        f = _traverse(T, E)
        w = f[j]
        idx = len({a for a in f[:j + 1] if len(a) == len(w) + 1 and a[:-1] == w})
        lam = E.lam(label)
        n = len(w)
        moved = {}
        for a, labels in children.items():
            if len(a) > n and a[:n] == w and a[n] > idx:
                a = w + (a[n] + lam,) + a[n + 1:]
            moved[a] = labels
        old = moved.get(w, ())
        moved[w] = old[:idx] + (label,) * lam + old[idx:]
        children = moved
    return MarkedTree(children)


# ------------------------------------------------------- ES representation

class ESRep:
    """Per-address block-type sequences; addresses without blocks are omitted
    (their sequence is all zeros)."""

    def __init__(self, entries: Mapping[Address, Iterable[int]] | None = None):
        clean = {}
        for a, seq in (entries or {}).items():
            seq = list(seq)
            nz = 0
            while nz < len(seq) and seq[nz] != 0:
                nz += 1
            if any(x != 0 for x in seq[nz:]):
                raise SegmentError(f"sequence at {addr_str(a) or 'root'} is not absorbing at zero")
            if nz:
                clean[tuple(a)] = tuple(seq[:nz])
        self.entries = clean

    def __eq__(self, other):
        return isinstance(other, ESRep) and self.entries == other.entries

    def __hash__(self):
        return hash(tuple(sorted(self.entries.items())))

    def __repr__(self):
        return f"ESRep({dict(sorted(self.entries.items()))})"

    def __getitem__(self, a: Address) -> tuple:
        return self.entries.get(tuple(a), ())

    def to_json(self) -> dict:
        return {"nodes": {addr_str(a): list(s) for a, s in sorted(self.entries.items())}}

    @classmethod
    def from_json(cls, obj: dict) -> ESRep:
        return cls({parse_addr(k): v for k, v in obj["nodes"].items()})


def es_encode(T: MarkedTree, E: LoopFamily) -> ESRep:
    _require_tree(T, E)
    return ESRep({a: parse_blocks(l, E) for a, l in T.children.items()})


def _labels_of_blocks(blocks: tuple, E: LoopFamily) -> tuple:
    out = []
    for a in blocks:
        if not 1 <= a <= len(E):
            raise SegmentError(f"block type {a} outside 1..{len(E)}")
        out.extend([a] * E.lam(a))
    return tuple(out)


def es_decode(W: ESRep, E: LoopFamily) -> MarkedTree:
    T = MarkedTree({a: _labels_of_blocks(s, E) for a, s in W.entries.items()})
    verts = set(T.vertices())
    stray = [a for a in W.entries if a not in verts]
    if stray:
        raise SegmentError(f"entry at {addr_str(min(stray))} is not a vertex")
    return T


def es_vertices(W: ESRep, E: LoopFamily) -> list[Address]:
    return es_decode(W, E).vertices()


def es_of_segment(eta: Path, E: LoopFamily) -> ESRep:
    return es_encode(tree_of_segment(eta, E), E)


def segment_of_es(W: ESRep, E: LoopFamily) -> Path:
    return segment_of_tree(es_decode(W, E), E)


def es_tensor(segments: Iterable[Path], E: LoopFamily) -> tuple[ESRep, ...]:
    return tuple(es_of_segment(x, E) for x in segments)


def es_tensor_decode(Ws: Iterable[ESRep], E: LoopFamily) -> tuple[Path, ...]:
    return tuple(segment_of_es(W, E) for W in Ws)


def dump_json(obj) -> str:
    return json.dumps(obj.to_json(), sort_keys=True, separators=(",", ":"))


# --------------------------------------------------------------- boundaries

@dataclass(frozen=True, order=True)
class BoundaryAddress:
    v: Address
    pre: int
    next: int

    @property
    def parent(self) -> Address:
        return self.v[:-1]


def boundary_scan(W: ESRep, E: LoopFamily) -> list[BoundaryAddress]:
    out = []
    for u in es_vertices(W, E):
        blocks = W[u]
        b = 1
        for k in range(len(blocks) + 1):
            nxt = blocks[k] if k < len(blocks) else 0
            out.append(BoundaryAddress(u + (b,), k, nxt))
            if k < len(blocks):
                b += E.lam(blocks[k])
    return out


def _find_boundary(W: ESRep, E: LoopFamily, v) -> BoundaryAddress:
    v = v.v if isinstance(v, BoundaryAddress) else tuple(v)
    for b in boundary_scan(W, E):
        if b.v == v:
            return b
    raise SegmentError(f"{addr_str(v)} is not a boundary address")


@dataclass(frozen=True)
class RelativeDecomposition:
    v: Address
    explored: frozenset
    parent_block: frozenset
    younger: dict
    descendants: dict

    def parts(self) -> list[frozenset]:
        return [self.explored, self.parent_block] + [self.descendants[u] for u in sorted(self.descendants)]


def _younger_sets(verts: Iterable[Address], v: Address) -> dict:
    ys: dict = {q: [] for q in range(1, len(v))}
    for u in verts:
        q = len(u)
        if 1 <= q <= len(v) - 1 and u[:q - 1] == v[:q - 1] and v < u:
            ys[q].append(u)
    return {q: sorted(x) for q, x in ys.items()}


def relative_decomposition(W: ESRep, E: LoopFamily, v) -> RelativeDecomposition:
    b = _find_boundary(W, E, v)
    v = b.v
    par = v[:-1]
    verts = es_vertices(W, E)
    explored = frozenset(u for u in verts if u < v)
    parent_block = frozenset(u for u in verts if len(u) > len(par) and u[:len(par)] == par and v <= u)
    ys = _younger_sets(verts, v)
    desc = {}
    for q, us in ys.items():
        for u in us:
            desc[u] = frozenset(x for x in verts if x[:len(u)] == u)
    return RelativeDecomposition(v, explored, parent_block, ys, desc)


def is_partition(parts: list, universe: Iterable) -> bool:
    seen = set()
    for p in parts:
        if seen & p:
            return False
        seen |= p
    return seen == set(universe)


# ------------------------------------------------------- induced pieces

def _visits(f: list) -> dict:
    out: dict = {}
    for t, a in enumerate(f):
        out.setdefault(a, []).append(t)
    return out


@dataclass(frozen=True)
class InducedDecomposition:
    eta_exp: Path
    eta_par: Path
    pieces: dict
    tau_exp: int
    tau_par: int
    tau_u: dict


def induced_decomposition(eta: Path, E: LoopFamily, v) -> InducedDecomposition:
    T = tree_of_segment(eta, E)
    W = es_encode(T, E)
    b = _find_boundary(W, E, v)
    v = b.v
    par = v[:-1]
    f = _traverse(T, E)
    vis = _visits(f)
    tau_exp = vis[par][b.pre]
    tau_par = vis[par][-1]
    ys = _younger_sets(T.vertices(), v)
    tau_u = {u: (vis[u][0], vis[u][-1]) for q in ys for u in ys[q]}
    drop = set(range(tau_exp + 1, tau_par + 1))
    for lo, hi in tau_u.values():
        drop.update(range(lo + 1, hi + 1))
    keep = [t for t in range(eta.length + 1) if t not in drop]
    eta_exp = Path(tuple(eta.points[t] for t in keep))
    eta_par = eta.window(tau_exp, tau_par).rooted()
    pieces = {u: eta.window(lo, hi).rooted() for u, (lo, hi) in tau_u.items()}
    return InducedDecomposition(eta_exp, eta_par, pieces, tau_exp, tau_par, tau_u)


def insert_piece(eta: Path, t: int, piece: Path) -> Path:
    """Splice a closed rooted path into eta at index t."""
    if not 0 <= t <= eta.length:
        raise PathError(f"insertion index {t} out of range 0..{eta.length}")
    x = eta.points[t]
    return Path(eta.points[:t] + tuple(add(x, p) for p in piece.points) + eta.points[t + 1:])


# --------------------------------------------------------------- fibers

@dataclass(frozen=True)
class FiberData:
    """Truncated exploration data: the boundary address, the explored vertex
    set and the block data revealed so far (the parent's entry cut off at the
    boundary)."""

    v: Address
    explored: tuple
    res: tuple
    parent_prefix: tuple

    @property
    def pre(self) -> int:
        return len(self.parent_prefix)

    def explored_es(self) -> ESRep:
        entries = dict(self.res)
        entries[self.v[:-1]] = self.parent_prefix
        return ESRep(entries)


def fiber_data(eta: Path, E: LoopFamily, v) -> FiberData:
    W = es_of_segment(eta, E)
    b = _find_boundary(W, E, v)
    par = b.v[:-1]
    explored = tuple(sorted(u for u in es_vertices(W, E) if u < b.v))
    res = tuple((u, W[u]) for u in explored if u != par and W[u])
    return FiberData(b.v, explored, res, W[par][:b.pre])


@dataclass(frozen=True)
class FiberFrame:
    """What the data determine: backbone path, insertion times and the
    pruned prefixes governing each admissible class."""

    eta_exp: Path
    tau_exp: int
    tau_u: dict
    prefix_par: Path
    prefix_u: dict


def _concat_prefix(prefix: Path | None, pi: Path) -> Path:
    if prefix is None:
        return pi
    return Path(prefix.points + tuple(add(prefix.last, p) for p in pi.points[1:]))


def fiber_frame(h: FiberData, E: LoopFamily, prefix: Path | None = None) -> FiberFrame:
    from .prune import prune

    T = es_decode(h.explored_es(), E)
    eta_exp = segment_of_tree(T, E)
    f = _traverse(T, E)
    vis = _visits(f)
    par = h.v[:-1]
    tau_exp = vis[par][-1]
    ys = _younger_sets(T.vertices(), h.v)
    tau_u = {u: vis[u][0] for q in ys for u in ys[q]}
    prefix_par = _concat_prefix(prefix, prune(eta_exp.window(0, vis[par][0]), E))
    prefix_u = {u: _concat_prefix(prefix, prune(eta_exp.window(0, t), E)) for u, t in tau_u.items()}
    return FiberFrame(eta_exp, tau_exp, tau_u, prefix_par, prefix_u)


class FiberError(ValueError):
    pass


def fiber_factorize(eta: Path, h: FiberData, E: LoopFamily):
    """Split a fiber member into its parent piece and younger-sibling pieces."""
    try:
        own = fiber_data(eta, E, h.v)
    except SegmentError as exc:
        raise FiberError(f"path outside the fiber: {exc}") from None
    if own != h:
        raise FiberError("path outside the fiber: exploration data differ")
    dec = induced_decomposition(eta, E, h.v)
    return dec.eta_par, dec.pieces


def fiber_reconstruct(h: FiberData, eta_par: Path, pieces: Mapping, E: LoopFamily,
                      prefix: Path | None = None) -> Path:
    fr = fiber_frame(h, E, prefix)
    if set(pieces) != set(fr.tau_u):
        raise FiberError("piece addresses do not match the younger-sibling sets")
    if not seg_membership(eta_par, E, fr.prefix_par):
        raise FiberError("parent piece outside its admissible class")
    for u, x in pieces.items():
        if not seg_membership(x, E, fr.prefix_u[u]):
            raise FiberError(f"piece at {addr_str(u)} outside its admissible class")
    inserts = [(fr.tau_exp, eta_par)] + [(fr.tau_u[u], pieces[u]) for u in pieces]
    out = fr.eta_exp
    for t, x in sorted(inserts, key=lambda z: -z[0]):
        out = insert_piece(out, t, x)
    return out


def figure_tree() -> MarkedTree:
    """Two-type example tree: root children (1,2,2), first child (2,2), third
    child (2,2,1), and one more child labelled 1 under its first child."""
    return MarkedTree({(): (1, 2, 2), (1,): (2, 2), (3,): (2, 2, 1), (3, 1): (1,)})
