"""Z/2 boundary-matrix reduction and persistence diagrams.

Columns are kept as uint64 bitsets over the face-index space of the
dimension below; only pivot columns are retained, which bounds memory by
(number of faces)^2 / 64 bits per dimension block. Dimensions are
processed top-down so the clearing optimization can skip columns known
to reduce to zero. Both the cleared and uncleared paths produce
identical diagrams; tests hold them to that.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import StateError
from .filtration import Filtration

try:
    from numba import njit
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a soft dependency
    _HAVE_NUMBA = False

    def njit(*a, **k):
        def deco(f):
            return f
        return deco

_BITS = np.left_shift(np.uint64(1), np.arange(64, dtype=np.uint64))


@njit(cache=True)
def _reduce_kernel(face_rows, n_rows, cleared):  # pragma: no cover - jitted
    """Column reduction over Z/2 with uint64 bitset columns.

    Pivot columns are stored densely by their low row (at most one per
    row), bounding memory at n_rows * ceil(n_rows/64) words. Returns the
    pairing row per column (-1 if the column reduced to zero) and the
    zeroed flags.
    """
    m, w = face_rows.shape
    nwords = (n_rows + 63) >> 6
    store = np.zeros((n_rows, nwords), dtype=np.uint64)
    has_pivot = np.zeros(n_rows, dtype=np.bool_)
    zeroed = np.zeros(m, dtype=np.bool_)
    lows = np.full(m, -1, dtype=np.int64)
    col = np.zeros(nwords, dtype=np.uint64)
    one = np.uint64(1)
    for j in range(m):
        if cleared[j]:
            zeroed[j] = True
            continue
        for t in range(nwords):
            col[t] = 0
        for t in range(w):
            r = face_rows[j, t]
            col[r >> 6] ^= one << np.uint64(r & 63)
        while True:
            low = -1
            for t in range(nwords - 1, -1, -1):
                v = col[t]
                if v != 0:
                    b = 0
                    while v != 0:
                        v >>= one
                        b += 1
                    low = (t << 6) + b - 1
                    break
            if low < 0:
                zeroed[j] = True
                break
            if not has_pivot[low]:
                has_pivot[low] = True
                for t in range(nwords):
                    store[low, t] = col[t]
                lows[j] = low
                break
            for t in range(nwords):
                col[t] ^= store[low, t]
    return lows, zeroed


def _top_bit(col: np.ndarray) -> int:
    nz = np.flatnonzero(col)
    if nz.size == 0:
        return -1
    w = int(nz[-1])
    return (w << 6) + int(col[w]).bit_length() - 1


def _codes(verts: np.ndarray, n: int) -> np.ndarray:
    c = verts[:, 0].astype(np.int64)
    for t in range(1, verts.shape[1]):
        c = c * n + verts[:, t]
    return c


def _rank_lookup(verts: np.ndarray, n: int):
    """Map a sorted simplex block to dense ranks: code -> position."""
    codes = _codes(verts, n)
    span = n ** verts.shape[1]
    if span <= 8_000_000:
        table = np.full(span, -1, dtype=np.int64)
        table[codes] = np.arange(len(codes))
        return lambda q: table[q]
    lut = {int(c): i for i, c in enumerate(codes)}
    return lambda q: np.fromiter((lut[int(c)] for c in q), dtype=np.int64,
                                 count=len(q))


def _face_rows(verts: np.ndarray, rank, n: int) -> np.ndarray:
    """Row indices (into the block below) of each simplex's faces."""
    m, w = verts.shape
    rows = np.empty((m, w), dtype=np.int64)
    cols = np.arange(w)
    for drop in range(w):
        face = verts[:, cols != drop]
        rows[:, drop] = rank(_codes(face, n))
    return rows


class PersistenceDiagram:
    """Multiset of (birth, death, dim) features with critical-edge tags.

    deaths hold +inf for essential classes. birth_pairs / death_pairs are
    (m, 2) vertex-pair arrays with -1 where no critical edge exists
    (vertex births, infinite deaths, non-Rips filtrations).
    """

    def __init__(self, births, deaths, dims, birth_pairs, death_pairs,
                 n_points: int, kind: str, differentiable: bool):
        order = np.lexsort((death_pairs[:, 1], death_pairs[:, 0],
                            birth_pairs[:, 1], birth_pairs[:, 0],
                            deaths, births, dims))
        self.births = births[order]
        self.deaths = deaths[order]
        self.dims = dims[order]
        self.birth_pairs = birth_pairs[order]
        self.death_pairs = death_pairs[order]
        self.n_points = n_points
        self.kind = kind
        self.differentiable = differentiable

    @classmethod
    def from_features(cls, features, n_points: int = 0, kind: str = "given",
                      differentiable: bool = False) -> "PersistenceDiagram":
        """Build from an iterable of (birth, death, dim) triples."""
        feats = list(features)
        m = len(feats)
        births = np.array([f[0] for f in feats], dtype=np.float64)
        deaths = np.array([f[1] for f in feats], dtype=np.float64)
        dims = np.array([f[2] for f in feats], dtype=np.int32)
        none = np.full((m, 2), -1, dtype=np.int32)
        return cls(births, deaths, dims, none, none.copy(),
                   n_points, kind, differentiable)

    @property
    def features(self) -> list:
        return [(float(b), float(d), int(k))
                for b, d, k in zip(self.births, self.deaths, self.dims)]

    def __len__(self):
        return len(self.births)

    def intervals(self, dim: int) -> np.ndarray:
        """(m, 2) birth/death rows of one dimension, diagram order."""
        sel = self.dims == dim
        return np.stack([self.births[sel], self.deaths[sel]], axis=1) \
            if np.any(sel) else np.empty((0, 2))

    def lifetimes(self, dim: int, finite_only: bool = True) -> np.ndarray:
        iv = self.intervals(dim)
        life = iv[:, 1] - iv[:, 0]
        return life[np.isfinite(life)] if finite_only else life

    def betti(self, dim: int) -> int:
        """Count of features of one dimension (finite and infinite)."""
        return int(np.sum(self.dims == dim))

    def __repr__(self):
        parts = ", ".join(f"b{k}={self.betti(k)}"
                          for k in sorted(set(self.dims.tolist())))
        return f"PersistenceDiagram({parts or 'empty'}, kind={self.kind!r})"


def _reduce_block(face_rows: np.ndarray, n_rows: int, cleared: set | None):
    """Reduce one dimension block; returns (pairs, zeroed flags)."""
    m = face_rows.shape[0]
    cleared_mask = np.zeros(m, dtype=bool)
    if cleared:
        cleared_mask[list(cleared)] = True
    if _HAVE_NUMBA:
        lows, zeroed = _reduce_kernel(
            np.ascontiguousarray(face_rows, dtype=np.int64), n_rows, cleared_mask)
        pairs = [(int(lows[j]), j) for j in np.flatnonzero(lows >= 0)]
        return pairs, zeroed
    nwords = (n_rows + 63) >> 6
    pivot: dict[int, np.ndarray] = {}
    zeroed = np.zeros(m, dtype=bool)
    pairs = []
    for j in range(m):
        if cleared_mask[j]:
            zeroed[j] = True
            continue
        col = np.zeros(nwords, dtype=np.uint64)
        for r in face_rows[j]:
            col[r >> 6] ^= _BITS[r & 63]
        while True:
            low = _top_bit(col)
            if low < 0:
                zeroed[j] = True
                break
            other = pivot.get(low)
            if other is None:
                pivot[low] = col
                pairs.append((low, j))
                break
            col ^= other
    return pairs, zeroed


def compute_persistence(filtration: Filtration,
                        clearing: bool = True) -> PersistenceDiagram:
    """Standard persistence pairing over Z/2.

    Pairs faces (births) with cofaces (deaths) per dimension; unpaired
    simplices become essential classes with infinite death. Zero-length
    features (birth equal to death) are pairing artifacts and dropped.
    With `clearing` the reduction skips columns already known to vanish;
    the pairing is identical either way.
    """
    if not isinstance(filtration, Filtration):
        raise StateError("compute_persistence expects a Filtration")
    blocks = filtration.blocks
    top = max(blocks)
    n = filtration.n_vertices

    pairs_at: dict[int, list] = {}
    zeroed_at: dict[int, np.ndarray] = {}
    birth_rows_above: set = set()
    for k in range(top, 0, -1):
        cols = blocks.get(k)
        rows = blocks.get(k - 1)
        if cols is None or len(cols) == 0 or rows is None or len(rows) == 0:
            pairs_at[k] = []
            zeroed_at[k] = np.zeros(0 if cols is None else len(cols), dtype=bool)
            birth_rows_above = set()
            continue
        rank = _rank_lookup(rows.verts, n)
        face_rows = _face_rows(cols.verts, rank, n)
        cleared = birth_rows_above if clearing else None
        pairs, zeroed = _reduce_block(face_rows, len(rows), cleared)
        pairs_at[k] = pairs
        zeroed_at[k] = zeroed
        birth_rows_above = {p[0] for p in pairs}

    births, deaths, dims = [], [], []
    bpairs, dpairs = [], []

    def crit(block, i):
        if block.critical is None:
            return (-1, -1)
        return (int(block.critical[i, 0]), int(block.critical[i, 1]))

    for k in range(1, top + 1):
        rows = blocks.get(k - 1)
        cols = blocks.get(k)
        for row, colj in pairs_at.get(k, []):
            b = float(rows.values[row])
            d = float(cols.values[colj])
            if b == d:
                continue
            births.append(b)
            deaths.append(d)
            dims.append(k - 1)
            bpairs.append(crit(rows, row))
            dpairs.append(crit(cols, colj))

    # essential classes: zero column, never paired as a birth row above
    for k in range(0, min(top, filtration.max_dim) + 1):
        blk = blocks.get(k)
        if blk is None or len(blk) == 0:
            continue
        paired_rows = {p[0] for p in pairs_at.get(k + 1, [])}
        if k == 0:
            zero_idx = range(len(blk))
        else:
            zero_idx = np.flatnonzero(zeroed_at.get(k, np.zeros(len(blk), bool)))
        for i in zero_idx:
            if i in paired_rows:
                continue
            births.append(float(blk.values[i]))
            deaths.append(np.inf)
            dims.append(k)
            bpairs.append(crit(blk, i))
            dpairs.append((-1, -1))

    return PersistenceDiagram(
        births=np.asarray(births, dtype=np.float64),
        deaths=np.asarray(deaths, dtype=np.float64),
        dims=np.asarray(dims, dtype=np.int32),
        birth_pairs=np.asarray(bpairs, dtype=np.int32).reshape(-1, 2),
        death_pairs=np.asarray(dpairs, dtype=np.int32).reshape(-1, 2),
        n_points=n,
        kind=filtration.kind,
        differentiable=filtration.differentiable,
    )
