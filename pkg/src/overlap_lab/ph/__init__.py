"""Persistent homology over point clouds.

filtration: Vietoris-Rips, witness, and DTM filtration construction
reduction:  Z/2 boundary-matrix reduction to persistence diagrams
gradients:  lifetime gradients routed through critical edges
distances:  bottleneck distance and trajectory-alignment score
serialize:  CSV / JSON round-trips for diagrams
"""

from .filtration import (  # noqa: F401
    Filtration,
    PointCloud,
    dtm_filtration,
    pairwise_distances,
    rips_filtration,
    witness_filtration,
)
from .reduction import PersistenceDiagram, compute_persistence  # noqa: F401
from .gradients import diagram_gradients  # noqa: F401
from .distances import bottleneck_distance, tsas  # noqa: F401
from .serialize import (  # noqa: F401
    diagram_from_csv,
    diagram_from_json,
    diagram_to_csv,
    diagram_to_json,
)
