"""Spectral toolkit for moduli of continuity, Littlewood-Paley blocks,
modified paraproducts and Carleman-inequality probes on the torus."""

from paraweight.spectral import SpectralField, TorusGrid
from paraweight.modulus import (
    CarlemanWeight,
    Modulus,
    build_weight,
    check_weight_ode,
    get_modulus,
    osgood_tail,
    osgood_verdict,
    validate_modulus,
)

__all__ = [
    "CarlemanWeight",
    "Modulus",
    "SpectralField",
    "TorusGrid",
    "build_weight",
    "check_weight_ode",
    "get_modulus",
    "osgood_tail",
    "osgood_verdict",
    "validate_modulus",
]

__version__ = "0.1.0"
