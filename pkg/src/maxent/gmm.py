"""Gaussian-mixture surrogate of the evidence density.

Each prior point x_m is pushed through the forward model and becomes the
centre of a Gaussian component N(G(x_m), Gamma) with the noise covariance
shared by all components and equal weights 1/M.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular

from ._kernels import mixture_logsumexp


class ModelEvaluationError(RuntimeError):
    """A forward-model evaluation failed while building a surrogate."""

    def __init__(self, index: int, cause: Exception):
        super().__init__(f"forward model failed at prior point {index}: {cause}")
        self.index = index


class GaussianNoise:
    """Additive noise N(0, Gamma) with a cached Cholesky factor.

    Raises ``ValueError`` at construction if Gamma is not symmetric
    positive definite.
    """

    def __init__(self, covariance):
        cov = np.atleast_2d(np.asarray(covariance, dtype=float))
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError("noise covariance must be a square matrix")
        scale = max(np.max(np.abs(cov)), 1e-300)
        if np.max(np.abs(cov - cov.T)) > 1e-12 * scale:
            raise ValueError("noise covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValueError("noise covariance is not positive definite") from None
        self.covariance = cov
        self.chol = chol
        self.log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
        for arr in (self.covariance, self.chol):
            arr.flags.writeable = False

    @classmethod
    def isotropic(cls, dim: int, variance: float) -> "GaussianNoise":
        return cls(variance * np.eye(dim))

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    def whiten(self, y) -> np.ndarray:
        """Map rows of ``y`` to ``L^{-1} y`` so that |.|_Gamma becomes Euclidean."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return solve_triangular(self.chol, y.T, lower=True).T

    def sq_norm(self, z) -> np.ndarray:
        """Gamma-weighted squared norm z^T Gamma^{-1} z, row-wise."""
        w = self.whiten(z)
        return np.sum(w * w, axis=1)


class GmmSurrogate:
    """Equal-weight Gaussian mixture with shared covariance.

    Parameters
    ----------
    centers : array, shape (M, d)
        Component means, kept in the order given.
    noise : GaussianNoise
        Shared component covariance.
    """

    def __init__(self, centers, noise: GaussianNoise):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        if centers.shape[0] < 1:
            raise ValueError("a surrogate needs at least one component")
        if centers.shape[1] != noise.dim:
            raise ValueError(
                f"centre dimension {centers.shape[1]} does not match noise dimension {noise.dim}"
            )
        if not np.all(np.isfinite(centers)):
            raise ValueError("surrogate centres must be finite")
        self.centers = centers.copy()
        self.centers.flags.writeable = False
        self.noise = noise
        self.log_norm = -0.5 * noise.dim * math.log(2.0 * math.pi) - 0.5 * noise.log_det
        # lexicographic order fixes the summation order independently of input order
        white = noise.whiten(centers)
        order = np.lexsort(white.T[::-1])
        self._white = np.ascontiguousarray(white[order])

    @property
    def count(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def log_density(self, y) -> np.ndarray | float:
        """log of (1/M) sum_m N(y; z_m, Gamma), by max-shifted log-sum-exp.

        Accepts one point of length d or an (n, d) batch.
        """
        y_arr = np.asarray(y, dtype=float)
        single = y_arr.ndim == 1
        y2 = np.atleast_2d(y_arr)
        if y2.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got {y2.shape[1]}")
        w = np.ascontiguousarray(self.noise.whiten(y2))
        out = np.empty(w.shape[0])
        mixture_logsumexp(w, self._white, out)
        out += self.log_norm - math.log(self.count)
        return float(out[0]) if single else out

    def density(self, y):
        return np.exp(self.log_density(y))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n points: a uniform component index, then Gaussian noise."""
        if n < 1:
            raise ValueError("sample size must be at least 1")
        idx = rng.integers(0, self.count, size=n)
        xi = rng.standard_normal((n, self.dim))
        return self.centers[idx] + xi @ self.noise.chol.T

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Exact mean and covariance of the mixture."""
        mean = self.centers.mean(axis=0)
        dev = self.centers - mean
        return mean, dev.T @ dev / self.count + self.noise.covariance

    def translated(self, t) -> "GmmSurrogate":
        return GmmSurrogate(self.centers + np.asarray(t, float), self.noise)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["m"] + [f"z_{j + 1}" for j in range(self.dim)])
            for m, row in enumerate(self.centers, 1):
                writer.writerow([m] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, noise: GaussianNoise) -> "GmmSurrogate":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 1:], noise)


def push_forward(model, points) -> np.ndarray:
    """Evaluate ``model`` at every row of ``points``, in order."""
    pts = np.atleast_2d(np.asarray(getattr(points, "points", points), dtype=float))
    if pts.shape[1] != model.input_dim:
        raise ValueError(
            f"prior points have dimension {pts.shape[1]}, model expects {model.input_dim}"
        )
    batch = getattr(model, "evaluate_many", None)
    if batch is not None:
        return batch(pts)
    out = np.empty((pts.shape[0], model.output_dim))
    for i, x in enumerate(pts):
        try:
            out[i] = model(x)
        except Exception as exc:
            raise ModelEvaluationError(i, exc) from exc
    return out


def build_surrogate(model, prior_points, noise: GaussianNoise) -> GmmSurrogate:
    if model.output_dim != noise.dim:
        raise ValueError("model output dimension must equal the noise dimension")
    return GmmSurrogate(push_forward(model, prior_points), noise)
