"""Probability distributions over rankings built from riffled independence."""

from . import config, dense, formats, fourier, perm, riffle, structure, synth, tree
from .dense import DenseDistribution, SampleSet
from .fourier import FourierCoefficients
from .kernels import BACKEND
from .riffle import HierarchicalModel, InterleavingDistribution, NonDecomposableObservation
from .structure import LearnedHierarchy, learn_hierarchy
from .tree import TreeNode

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DenseDistribution",
    "FourierCoefficients",
    "HierarchicalModel",
    "InterleavingDistribution",
    "LearnedHierarchy",
    "NonDecomposableObservation",
    "SampleSet",
    "TreeNode",
    "config",
    "dense",
    "formats",
    "fourier",
    "learn_hierarchy",
    "perm",
    "riffle",
    "structure",
    "synth",
    "tree",
]
