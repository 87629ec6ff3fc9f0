"""Lifetime gradients routed through the critical edges of a diagram.

A Rips birth/death value is the distance between its critical vertex
pair, so d(value)/d(coords) is the unit vector along that pair. At ties
(several edges realizing the same value) the filtration already picked
the lexicographically smallest pair, which makes this a documented
subgradient choice rather than an ambiguity.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import StateError
from .filtration import PointCloud
from .reduction import PersistenceDiagram

EPS_MIN_DEFAULT = 1e-4


def _edge_grad(out: np.ndarray, coords: np.ndarray, pair, sign: float) -> None:
    u, v = int(pair[0]), int(pair[1])
    if u < 0:
        return
    diff = coords[u] - coords[v]
    norm = np.linalg.norm(diff)
    if norm == 0.0:
        return  # coincident points: distance not differentiable, subgradient 0
    unit = diff / norm
    out[u] += sign * unit
    out[v] -= sign * unit


def diagram_gradients(pd: PersistenceDiagram, pc: PointCloud,
                      eps_min: float = EPS_MIN_DEFAULT,
                      dims=None) -> dict[int, np.ndarray]:
    """d(lifetime)/d(coords) for each selected finite feature.

    Returns {feature index in pd -> (n, d) array}. Features with
    lifetime below eps_min are excluded entirely (they are treated as
    noise, contributing nothing to losses or gradients), as are infinite
    features. `dims` restricts to the given homology dimensions.
    """
    if not pd.differentiable:
        raise StateError(
            "diagram has no critical-edge tags; gradients need a Rips-built diagram")
    if not isinstance(pc, PointCloud):
        pc = PointCloud(pc)
    if pc.n != pd.n_points:
        raise StateError(
            f"cloud has {pc.n} points but diagram was built over {pd.n_points}")
    coords = pc.coords
    wanted = None if dims is None else set(int(d) for d in np.atleast_1d(dims))

    out: dict[int, np.ndarray] = {}
    for i in range(len(pd)):
        if wanted is not None and int(pd.dims[i]) not in wanted:
            continue
        death = pd.deaths[i]
        if not np.isfinite(death):
            continue
        if death - pd.births[i] < eps_min:
            continue
        g = np.zeros_like(coords)
        _edge_grad(g, coords, pd.death_pairs[i], +1.0)
        _edge_grad(g, coords, pd.birth_pairs[i], -1.0)
        out[i] = g
    return out
