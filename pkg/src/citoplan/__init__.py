"""Contact-implicit trajectory optimization on uncertain terrain.

The package plans trajectories for planar rigid-body systems that must make
and break contact, treats terrain friction and height as Gaussian random
variables through expected-residual complementarity costs, and validates the
resulting open-loop controls with a time-stepping rigid-body simulator.
"""
from citoplan.dynamics import (
    GRAVITY,
    Link,
    PlanarModel,
    PlanarState,
    TerrainSpec,
    block,
    cart,
    hopper,
    make_model,
)

__all__ = [
    "GRAVITY",
    "Link",
    "PlanarModel",
    "PlanarState",
    "TerrainSpec",
    "block",
    "cart",
    "hopper",
    "make_model",
]

__version__ = "0.1.0"
