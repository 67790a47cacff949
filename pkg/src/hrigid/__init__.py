"""Numerical tools for horizontal rigidity of functions R^2 -> R.

A function ``f`` is horizontally rigid when ``graph(f(c .))`` is isometric
to ``graph(f)`` for every scale ``c > 0``.  The package samples chord
directions of graphs, classifies their shape on the sphere, searches for
rigid isometries between rescaled graphs, and solves the functional
equation ``g(x) = h g(c x + u) + v`` that rigidity reduces to.
"""

__version__ = "0.1.0"

from .errors import HRigidError
from .expr import ScalarField, evaluate, parse
from .sphere import RigidIsometry, compose, direction, psi, rotation_about_x
from .directions import (ArcProfile, Case, CaseLabel, DirectionSet, classify,
                         estimate_profile, sample_direction_set)
from .funceq import (FuncEqSystem, Grid, Kind, ScaleEntry, SolutionFamily,
                     classify_solution, fit_exponent, fit_shift)
from .rigidity import (Decision, RigidityConfig, direction_obstruction, find_isometry,
                       full_rigidity_pipeline, rotation_lemma_check, sample_graph,
                       subcase_a2_reduce, translation_test)

__all__ = [
    "HRigidError", "ScalarField", "evaluate", "parse", "RigidIsometry", "compose",
    "direction", "psi", "rotation_about_x", "ArcProfile", "Case", "CaseLabel",
    "DirectionSet", "classify", "estimate_profile", "sample_direction_set",
    "FuncEqSystem", "Grid", "Kind", "ScaleEntry", "SolutionFamily",
    "classify_solution", "fit_exponent", "fit_shift", "Decision", "RigidityConfig",
    "direction_obstruction", "find_isometry", "full_rigidity_pipeline",
    "rotation_lemma_check", "sample_graph", "subcase_a2_reduce", "translation_test",
]
