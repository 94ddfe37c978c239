"""Persistence diagrams: fast algorithms, batched differentiable diagrams and oracles."""
from .diagrams import (
    INF,
    PersistenceDiagram,
    PersistencePair,
    RePHINEDiagram,
    RePHINETuple,
    pd_dim0_unionfind,
    pd_matrix_reduction,
    rephine_diagram,
)
from .oracle import betti_oracle, bookkeeping_diagram, gf2_rank, persistent_betti
from .batched import LayerDiagrams, PairSet, pd_for_layer, diagrams_from_values

__all__ = [
    "INF", "PersistenceDiagram", "PersistencePair", "RePHINEDiagram", "RePHINETuple",
    "pd_dim0_unionfind", "pd_matrix_reduction", "rephine_diagram",
    "betti_oracle", "bookkeeping_diagram", "gf2_rank", "persistent_betti",
    "LayerDiagrams", "PairSet", "pd_for_layer", "diagrams_from_values",
]
