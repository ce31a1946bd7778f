"""Forward models: weighted Gaussian deconvolution and an elliptic PDE.

Both expose ``input_dim``, ``output_dim``, ``__call__(x)`` and a batched
``evaluate_many(X)``. Noise is not part of a model; surrogates add it.
"""

from __future__ import annotations

import math
import warnings
from typing import Callable

import numpy as np

from .fem import Mesh, PoissonAssembler, build_mesh
from .gmm import GaussianNoise, ModelEvaluationError

OBSERVATION_POINTS = ((0.25, 0.25), (0.25, 0.50), (0.75, 0.50))


class ForwardModel:
    input_dim: int
    output_dim: int

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError

    def evaluate_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty((X.shape[0], self.output_dim))
        for i, x in enumerate(X):
            try:
                out[i] = self(x)
            except Exception as exc:
                raise ModelEvaluationError(i, exc) from exc
        return out


def gaussian_kernel(t, gamma: float):
    return np.exp(-0.5 * (np.asarray(t) / gamma) ** 2) / (math.sqrt(2.0 * math.pi) * gamma)


class DeconvolutionModel(ForwardModel):
    """y = A x with A_jk = g(t_j - t_k) (1 - t_k)^4 / (K - 1), t_k = (k-1)/(K-1).

    The prior is N(0, sigma_x^2 I) and the noise N(0, sigma_eps^2 I).
    """

    def __init__(self, k_dim: int, gamma: float, prior_sigma: float, noise_sigma: float):
        self.k_dim = k_dim
        self.gamma = gamma
        self.prior_sigma = prior_sigma
        self.noise_sigma = noise_sigma
        t = np.arange(k_dim) / (k_dim - 1)
        self.grid = t
        self.matrix = gaussian_kernel(t[:, None] - t[None, :], gamma) * (1.0 - t[None, :]) ** 4 / (k_dim - 1)
        self.matrix.flags.writeable = False
        self.input_dim = self.output_dim = k_dim

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.k_dim,):
            raise ValueError(f"expected a vector of length {self.k_dim}")
        return self.matrix @ x

    def evaluate_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.k_dim:
            raise ValueError(f"expected vectors of length {self.k_dim}")
        return X @ self.matrix.T

    def noise(self) -> GaussianNoise:
        return GaussianNoise.isotropic(self.k_dim, self.noise_sigma**2)

    @property
    def prior_var(self) -> float:
        return self.prior_sigma**2


def build_deconvolution(K: int = 20, gamma: float = 0.1, sigma_x: float = 10.0,
                        sigma_eps: float = 2.0) -> DeconvolutionModel:
    if K < 2:
        raise ValueError("deconvolution needs K >= 2 grid points")
    if gamma <= 0 or sigma_x <= 0 or sigma_eps <= 0:
        raise ValueError("gamma and standard deviations must be positive")
    return DeconvolutionModel(K, gamma, sigma_x, sigma_eps)


def kl_basis(points, K: int) -> np.ndarray:
    """0.1 j^-2 sin(pi j s1) sin(pi j s2) for j = 1..K, shape (len(points), K)."""
    s = np.atleast_2d(np.asarray(points, dtype=float))
    j = np.arange(1, K + 1)
    return 0.1 * np.sin(np.pi * np.outer(s[:, 0], j)) * np.sin(np.pi * np.outer(s[:, 1], j)) / j**2


def diffusion_coefficient(x, s) -> float | np.ndarray:
    """a(s, x) = 1 + 0.1 sum_j j^-2 (x_j - 1/2) sin(pi j s1) sin(pi j s2)."""
    x = np.asarray(x, dtype=float)
    s_arr = np.asarray(s, dtype=float)
    vals = 1.0 + kl_basis(s_arr, x.size) @ (x - 0.5)
    return float(vals[0]) if s_arr.ndim == 1 else vals


def _default_source(s):
    return 10.0 * s[:, 0]


class EllipticModel(ForwardModel):
    """u at the observation points, where -div(a(., x) grad u) = f on (0,1)^2.

    The coefficient is evaluated at triangle centroids (one-point rule),
    as is the source. Inputs outside [0,1]^K are accepted and counted in
    ``out_of_cube``.
    """

    def __init__(self, mesh: Mesh, kl_terms: int = 100,
                 obs_points=OBSERVATION_POINTS,
                 source: Callable[[np.ndarray], np.ndarray] = _default_source):
        self.mesh = mesh
        self.kl_terms = kl_terms
        self.obs_points = tuple(tuple(map(float, p)) for p in obs_points)
        obs_nodes = [mesh.node_index(p) for p in self.obs_points]
        self._asm = PoissonAssembler(mesh)
        reduced = self._asm._reduced[obs_nodes]
        if np.any(reduced < 0):
            raise ValueError("observation points must be interior nodes")
        self._obs = reduced
        self._basis = kl_basis(self._asm.centroids, kl_terms)
        self._rhs = self._asm.load(np.asarray(source(self._asm.centroids), dtype=float))
        self.input_dim = kl_terms
        self.output_dim = len(self.obs_points)
        self.out_of_cube = 0

    def coefficients(self, X) -> np.ndarray:
        """Centroid coefficient values, shape (n_inputs, n_triangles)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return 1.0 + (X - 0.5) @ self._basis.T

    def solve_nodal(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        coef = self.coefficients(x)[0]
        return self._asm.expand(self._asm.solve(coef, self._rhs))

    def __call__(self, x) -> np.ndarray:
        return self.evaluate_many(np.asarray(x, dtype=float)[None, :])[0]

    def evaluate_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.kl_terms:
            raise ValueError(f"expected vectors of length {self.kl_terms}")
        outside = np.any((X < 0.0) | (X > 1.0), axis=1)
        if np.any(outside):
            self.out_of_cube += int(outside.sum())
            warnings.warn("elliptic model evaluated outside [0,1]^K", RuntimeWarning, stacklevel=2)
        coefs = self.coefficients(X)
        out = np.empty((X.shape[0], self.output_dim))
        for i in range(X.shape[0]):
            try:
                out[i] = self._asm.solve(coefs[i], self._rhs)[self._obs]
            except Exception as exc:
                raise ModelEvaluationError(i, exc) from exc
        return out


def build_elliptic(n: int = 64, K: int = 100, obs_points=OBSERVATION_POINTS,
                   source=_default_source) -> EllipticModel:
    if n % 4:
        raise ValueError("mesh size n must be divisible by 4 so observation points are nodes")
    return EllipticModel(build_mesh(n), K, obs_points, source)
