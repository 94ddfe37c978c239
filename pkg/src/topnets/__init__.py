"""TopNets: topological neural networks with persistent-homology features on simplicial complexes."""
from .complex import (
    AttributedComplex,
    GeometricComplex,
    Simplex,
    SimplicialComplex,
    clique_lift,
    random_rigid_motion,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "AttributedComplex", "GeometricComplex", "Simplex", "SimplicialComplex",
    "clique_lift", "random_rigid_motion", "validate",
]
