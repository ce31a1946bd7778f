"""Entropy of Bayesian evidence distributions via Gaussian-mixture surrogates."""

from .entropy import (EntropyEstimate, gauss_lattice_entropy, gaussian_entropy,
                      linear_evidence_entropy, mc_entropy, mobius_entropy)
from .gmm import GaussianNoise, GmmSurrogate, build_surrogate
from .qmc import LatticeRule, PointSet, lattice_points, map_to_gaussian, norm_ppf

__all__ = [
    "EntropyEstimate", "GaussianNoise", "GmmSurrogate", "LatticeRule", "PointSet",
    "build_surrogate", "gauss_lattice_entropy", "gaussian_entropy", "lattice_points",
    "linear_evidence_entropy", "map_to_gaussian", "mc_entropy", "mobius_entropy", "norm_ppf",
]
__version__ = "0.1.0"
