"""Numerical workbench for totally real submanifolds of Kahler manifolds.

The package is organised as a stack: pointwise linear algebra (trlinalg),
chart geometry from potentials (kahler), discretised immersions with a
seam-aware difference calculus (immersion), the volume one-form and its
cohomology data (maslov), linearisation around critical points (linearize),
metric deformation transport (isotopy), and the solver layer (persist).
"""

from .conventions import CONVENTIONS, convention_hash
from .errors import TotrealError
from .immersion import (
    GridImmersion,
    GridOneForm,
    GridScalarField,
    GridTwoForm,
    GridVectorField,
    circle,
    clifford_torus,
    core_geodesic,
    lagrangian_graph,
    linear_torus,
    random_torus,
)
from .kahler import (
    ChartJet,
    CylinderPotential,
    FlatChart,
    FubiniStudyChart,
    HyperbolicBallChart,
    KahlerChart,
    PerturbedChart,
    PolyPotential,
    ScaleDeck,
    TranslationDeck,
    UpperHalfPlaneChart,
)
from .trlinalg import (
    CanonicalVolume,
    HermitianStructure,
    Projections,
    TangentFrame,
)

__version__ = "0.1.0"

__all__ = [
    "CONVENTIONS",
    "CanonicalVolume",
    "ChartJet",
    "CylinderPotential",
    "FlatChart",
    "FubiniStudyChart",
    "GridImmersion",
    "GridOneForm",
    "GridScalarField",
    "GridTwoForm",
    "GridVectorField",
    "HermitianStructure",
    "HyperbolicBallChart",
    "KahlerChart",
    "PerturbedChart",
    "PolyPotential",
    "Projections",
    "ScaleDeck",
    "TangentFrame",
    "TotrealError",
    "TranslationDeck",
    "UpperHalfPlaneChart",
    "circle",
    "clifford_torus",
    "convention_hash",
    "core_geodesic",
    "lagrangian_graph",
    "linear_torus",
    "random_torus",
    "__version__",
]
