"""Filtration construction over point clouds: Rips, witness, DTM.

A filtration is stored as per-dimension blocks, each sorted by
(value, vertex tuple); the merged view is sorted by (value, dimension,
vertex tuple). Ties in filtration value are always broken
lexicographically so diagrams are deterministic across runs.

Rips simplices carry a critical vertex pair (the pair realizing the max
pairwise distance, lexicographically smallest on ties); this is the hook
the differentiable-lifetime machinery routes gradients through. Witness
and DTM filtrations do not tag critical pairs, so diagrams built from
them are not differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.spatial import cKDTree

from ..autodiff import Tensor
from ..exceptions import (
    CapacityError,
    NumericError,
    ParameterError,
    ShapeError,
)

# vertex-count ceiling per homology budget; above this the simplex count
# is no longer worth a dense enumeration
_CAPS = {1: 2048, 2: 512}

_combo_cache: dict = {}


def _combos(n: int, r: int) -> np.ndarray:
    """All r-subsets of range(n) in lexicographic order, cached, (m, r)."""
    key = (n, r)
    got = _combo_cache.get(key)
    if got is None:
        got = np.fromiter(
            (v for c in combinations(range(n), r) for v in c),
            dtype=np.int32,
        ).reshape(-1, r)
        _combo_cache[key] = got
    return got


def pairwise_distances(coords: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix via explicit differences.

    The difference route (not the Gram-matrix trick) keeps the result
    bit-identical to a naive two-loop computation, which downstream
    exact-equality cross-checks against reference reductions rely on.
    Computed in row blocks to bound transient memory.
    """
    x = np.asarray(coords, dtype=np.float64)
    n, d = x.shape
    out = np.empty((n, n))
    block = max(1, int(2e7 // max(1, n * d)))
    for s in range(0, n, block):
        diff = x[s:s + block, None, :] - x[None, :, :]
        out[s:s + block] = np.sqrt((diff * diff).sum(axis=-1))
    np.fill_diagonal(out, 0.0)
    return out


class PointCloud:
    """n points in R^d as a float64 array.

    May be built from a Tensor, in which case the tensor is kept as an
    alias so downstream gradient code can route back to it.
    """

    def __init__(self, coords):
        self.tensor = coords if isinstance(coords, Tensor) else None
        arr = self.tensor.array if self.tensor is not None else np.asarray(
            coords, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeError(f"PointCloud: expected (n, d) array, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise ShapeError("PointCloud: need at least one point")
        if not np.all(np.isfinite(arr)):
            raise NumericError("PointCloud: non-finite coordinates")
        self.coords = arr.astype(np.float64, copy=False)
        self._dist = None

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def d(self) -> int:
        return self.coords.shape[1]

    def distances(self) -> np.ndarray:
        if self._dist is None:
            self._dist = pairwise_distances(self.coords)
        return self._dist

    def __repr__(self):
        return f"PointCloud(n={self.n}, d={self.d})"


@dataclass
class SimplexBlock:
    """All simplices of one dimension, sorted by (value, vertex tuple)."""

    verts: np.ndarray       # (m, k+1) int32, each row ascending
    values: np.ndarray      # (m,) float64
    critical: np.ndarray | None  # (m, 2) int32 vertex pairs, -1 where absent

    def __len__(self):
        return self.values.size


class Filtration:
    """Sorted simplicial filtration split into per-dimension blocks."""

    def __init__(self, kind: str, n_vertices: int, max_dim: int,
                 blocks: dict[int, SimplexBlock], max_scale: float,
                 landmark_indices: np.ndarray | None = None):
        self.kind = kind
        self.n_vertices = n_vertices
        self.max_dim = max_dim          # highest homology dimension reported
        self.blocks = blocks            # simplex dims 0 .. max_dim+1
        self.max_scale = max_scale
        self.landmark_indices = landmark_indices

    @property
    def differentiable(self) -> bool:
        b1 = self.blocks.get(1)
        return b1 is not None and b1.critical is not None

    @property
    def simplices(self) -> list:
        """Merged view: list of (vertex tuple, value, dim), filtration order."""
        out = []
        dims = sorted(self.blocks)
        all_vals = np.concatenate([self.blocks[k].values for k in dims])
        all_dims = np.concatenate(
            [np.full(len(self.blocks[k]), k, dtype=np.int32) for k in dims])
        # stable sort keeps each block's lexicographic order within ties
        order = np.lexsort((all_dims, all_vals))
        flat = []
        for k in dims:
            blk = self.blocks[k]
            flat.extend((tuple(int(v) for v in blk.verts[i]), float(blk.values[i]), k)
                        for i in range(len(blk)))
        for i in order:
            out.append(flat[i])
        return out

    def __repr__(self):
        counts = {k: len(b) for k, b in sorted(self.blocks.items())}
        return f"Filtration(kind={self.kind!r}, n={self.n_vertices}, simplices={counts})"


def _sort_block(verts: np.ndarray, values: np.ndarray,
                critical: np.ndarray | None) -> SimplexBlock:
    keys = [verts[:, c] for c in range(verts.shape[1] - 1, -1, -1)]
    keys.append(values)
    order = np.lexsort(tuple(keys))
    return SimplexBlock(
        verts=np.ascontiguousarray(verts[order]),
        values=np.ascontiguousarray(values[order]),
        critical=None if critical is None else np.ascontiguousarray(critical[order]),
    )


def _check_budget(n: int, max_dim: int, what: str) -> None:
    if max_dim not in (1, 2):
        raise ParameterError(f"max_dim must be 1 or 2, got {max_dim}")
    cap = _CAPS[max_dim]
    if n > cap:
        raise CapacityError(
            f"{what}: {n} vertices exceeds the n <= {cap} budget for max_dim={max_dim}")


def rips_filtration(pc: PointCloud, max_dim: int = 1,
                    max_scale: float | None = None) -> Filtration:
    """Vietoris-Rips filtration; simplex value = max pairwise distance.

    Includes simplices up to dimension max_dim + 1 (the extra layer kills
    max_dim-dimensional cycles) with value <= max_scale. max_scale
    defaults to the cloud diameter so every feature of interest resolves.
    Dense enumeration: fine for n in the low hundreds, increasingly
    memory-hungry near the capacity guard with the default max_scale.
    """
    if not isinstance(pc, PointCloud):
        pc = PointCloud(pc)
    _check_budget(pc.n, max_dim, "rips_filtration")
    d = pc.distances()
    diameter = float(d.max()) if pc.n > 1 else 0.0
    if max_scale is None:
        max_scale = diameter if diameter > 0 else 1.0
    elif max_scale <= 0:
        raise ParameterError("max_scale must be positive")

    n = pc.n
    blocks: dict[int, SimplexBlock] = {}
    blocks[0] = SimplexBlock(
        verts=np.arange(n, dtype=np.int32).reshape(-1, 1),
        values=np.zeros(n),
        critical=np.full((n, 2), -1, dtype=np.int32),
    )
    for k in range(1, max_dim + 2):
        idx = _combos(n, k + 1)
        if idx.shape[0] == 0:
            break
        if k == 1:
            vals = d[idx[:, 0], idx[:, 1]]
            crit = idx.copy()
        else:
            face_pairs = _combos(k + 1, 2)          # lex-ordered vertex-pair slots
            pair_d = np.stack(
                [d[idx[:, a], idx[:, b]] for a, b in face_pairs], axis=1)
            vals = pair_d.max(axis=1)
            arg = pair_d.argmax(axis=1)             # first max = lex-smallest pair
            crit = np.stack(
                [idx[np.arange(len(idx)), face_pairs[arg][:, 0]],
                 idx[np.arange(len(idx)), face_pairs[arg][:, 1]]], axis=1
            ).astype(np.int32)
        keep = vals <= max_scale
        if not np.any(keep):
            break
        blocks[k] = _sort_block(idx[keep], vals[keep], crit[keep])
    return Filtration("rips", n, max_dim, blocks, max_scale)


def _maxmin_landmarks(d: np.ndarray, m: int) -> np.ndarray:
    """Greedy max-min sampling over a full distance matrix, seed index 0."""
    chosen = [0]
    mind = d[0].copy()
    for _ in range(1, m):
        nxt = int(np.argmax(mind))                  # ties: smallest index
        chosen.append(nxt)
        np.minimum(mind, d[nxt], out=mind)
    return np.asarray(chosen, dtype=np.int64)


def witness_filtration(pc: PointCloud, m: int, max_dim: int = 1) -> Filtration:
    """Lazy witness filtration on m max-min landmarks (relaxation nu = 1).

    An edge (a, b) enters at twice the relaxed witness radius,

        2 * min over witnesses w of sqrt(max(0, max(d(w,a), d(w,b))^2 - m1(w)^2))

    with m1(w) the distance from w to its nearest landmark. The factor 2
    moves witness values onto the diameter scale Rips values live on, so
    the two filtrations are directly comparable; the relaxation absorbs
    the sampling gap between landmarks. Higher simplices enter when
    their last edge does (flag completion). Witnesses are the
    non-landmark points, or every point in the degenerate m = n case.
    Vertices enter at 0; landmark 0 is point 0, for reproducibility.
    """
    if not isinstance(pc, PointCloud):
        pc = PointCloud(pc)
    if m > pc.n:
        raise ParameterError(f"witness_filtration: m={m} exceeds n={pc.n}")
    if m < 2:
        raise ParameterError("witness_filtration: need m >= 2 landmarks")
    _check_budget(m, max_dim, "witness_filtration")

    d = pc.distances()
    lm = _maxmin_landmarks(d, m)
    is_lm = np.zeros(pc.n, dtype=bool)
    is_lm[lm] = True
    wit = np.flatnonzero(~is_lm)
    if wit.size == 0:
        wit = np.arange(pc.n)
    dw = d[np.ix_(wit, lm)]                         # (n_witness, m)
    m1_sq = dw.min(axis=1) ** 2

    pairs = _combos(m, 2)
    evals = np.empty(pairs.shape[0])
    chunk = max(1, int(8e6 / max(1, dw.shape[0])))
    for s in range(0, pairs.shape[0], chunk):
        part = pairs[s:s + chunk]
        mx = np.maximum(dw[:, part[:, 0]], dw[:, part[:, 1]])
        np.square(mx, out=mx)
        mx -= m1_sq[:, None]
        evals[s:s + chunk] = 2.0 * np.sqrt(np.clip(mx.min(axis=0), 0.0, None))

    lookup = np.zeros((m, m))
    lookup[pairs[:, 0], pairs[:, 1]] = evals
    lookup += lookup.T

    blocks: dict[int, SimplexBlock] = {
        0: SimplexBlock(np.arange(m, dtype=np.int32).reshape(-1, 1),
                        np.zeros(m), None),
        1: _sort_block(pairs, evals, None),
    }
    for k in range(2, max_dim + 2):
        idx = _combos(m, k + 1)
        if idx.shape[0] == 0:
            break
        vals = lookup[idx[:, 0], idx[:, 1]].copy()
        for a, b in _combos(k + 1, 2)[1:]:
            np.maximum(vals, lookup[idx[:, a], idx[:, b]], out=vals)
        blocks[k] = _sort_block(idx, vals, None)
    top = max(float(blocks[k].values.max()) for k in blocks if len(blocks[k]))
    return Filtration("witness", m, max_dim, blocks, top, landmark_indices=lm)


def dtm_filtration(pc: PointCloud, k: int, max_dim: int = 1) -> Filtration:
    """Distance-to-measure weighted Rips filtration.

    Vertex value = root-mean of squared distances to the k nearest
    neighbors (self excluded); simplex value = max over its vertices and
    half its pairwise distances. Outliers enter late, so small-scale
    noise does not spawn long-lived features.
    """
    if not isinstance(pc, PointCloud):
        pc = PointCloud(pc)
    if not 1 <= k < pc.n:
        raise ParameterError(f"dtm_filtration: need 1 <= k < n, got k={k}, n={pc.n}")
    _check_budget(pc.n, max_dim, "dtm_filtration")

    tree = cKDTree(pc.coords)
    dd, _ = tree.query(pc.coords, k + 1)
    dd = np.atleast_2d(dd)
    dtm = np.sqrt((dd[:, 1:] ** 2).mean(axis=1))

    n = pc.n
    d = pc.distances()
    blocks: dict[int, SimplexBlock] = {
        0: SimplexBlock(np.arange(n, dtype=np.int32).reshape(-1, 1),
                        dtm.copy(), None)
    }
    for kk in range(1, max_dim + 2):
        idx = _combos(n, kk + 1)
        if idx.shape[0] == 0:
            break
        vals = dtm[idx[:, 0]].copy()
        for t in range(1, kk + 1):
            np.maximum(vals, dtm[idx[:, t]], out=vals)
        for a, b in _combos(kk + 1, 2):
            np.maximum(vals, 0.5 * d[idx[:, a], idx[:, b]], out=vals)
        blocks[kk] = _sort_block(idx, vals, None)
    top = max(float(blocks[b].values.max()) for b in blocks if len(blocks[b]))
    return Filtration("dtm", n, max_dim, blocks, top)
