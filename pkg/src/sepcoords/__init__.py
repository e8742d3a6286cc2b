"""Orthogonal separable coordinates on spheres: Killing tensors, integrability checks,
tree combinatorics and chart construction."""

__version__ = "0.1.0"

from .bivector import DEFAULT_TOL, BivectorForm, PointFrame, Tolerances, act_isometry, sample_frames
from .charts import (
    Chart,
    DressedTree,
    EllipticParams,
    chart_from_tree,
    elliptic_chart,
    elliptic_form,
    emit_gridlines,
    sphere_compose,
    stackel_of_chart,
    verify_orthogonal,
)
from .integrability import (
    NormalFormDiag,
    ResidualReport,
    StackelError,
    StackelSystem,
    act_permutation,
    commutation_residual,
    eigen_simplicity,
    killing_residual,
    nijenhuis_residual,
    stackel_from_killing,
    verify_stackel,
)
from .trees import Tree, count_faces, dyslectic_classes, enumerate_trees, graft, parse_tree, serialize_tree

__all__ = [
    "__version__", "DEFAULT_TOL", "BivectorForm", "PointFrame", "Tolerances", "act_isometry",
    "sample_frames", "Chart", "DressedTree", "EllipticParams", "chart_from_tree", "elliptic_chart",
    "elliptic_form", "emit_gridlines", "sphere_compose", "stackel_of_chart", "verify_orthogonal",
    "NormalFormDiag", "ResidualReport", "StackelError", "StackelSystem", "act_permutation",
    "commutation_residual", "eigen_simplicity", "killing_residual", "nijenhuis_residual",
    "stackel_from_killing", "verify_stackel", "Tree", "count_faces", "dyslectic_classes",
    "enumerate_trees", "graft", "parse_tree", "serialize_tree",
]
