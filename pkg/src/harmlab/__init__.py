"""Numerical laboratory for equivariant harmonic maps into NPC model spaces.

Subpackages: ``harmlab.npc`` (model spaces and CAT(0) operations),
``harmlab.wp`` (the stratified cusp-product target), ``harmlab.domain``
(gain graphs and the discrete energy), ``harmlab.solver`` (relaxation and
diagnostics) and ``harmlab.experiments`` (configs, scenarios and output).
"""

from harmlab.domain import EquivariantMap, GainGraph, cycle, energy, grid, random_map
from harmlab.npc import GeometryInputError
from harmlab.solver import Schedule, minimize, uniqueness_test
from harmlab.wp.strata import model_target

__version__ = "0.1.0"

__all__ = [
    "EquivariantMap", "GainGraph", "GeometryInputError", "Schedule", "cycle", "energy", "grid",
    "minimize", "model_target", "random_map", "uniqueness_test",
]
