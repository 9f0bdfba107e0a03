"""Workbench for homogeneous-linear circuit transformations and matrix-word
compilations, with exact rational/Laurent-eps arithmetic throughout."""

__all__ = [
    "poly",
    "circuit",
    "transforms",
    "matrixword",
    "families",
    "verify",
    "cli",
]
