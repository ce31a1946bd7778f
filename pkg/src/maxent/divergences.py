"""Closed-form divergences between Gaussians and the entropy-difference bounds.

For p1 = N(m1, S1), p2 = N(m2, S2) on R^l, with dm = m1 - m2:

KL(p1 || p2) = 1/2 [tr(S2^-1 S1) + dm' S2^-1 dm - l + log det S2 - log det S1]

chi^2(p1, p2) = int p1^2 / p2 - 1. Completing the square in the exponent
-(z-m1)' S1^-1 (z-m1) + 1/2 (z-m2)' S2^-1 (z-m2) with
    P = 2 S1^-1 - S2^-1,  b = 2 S1^-1 m1 - S2^-1 m2,
    c = 2 m1' S1^-1 m1 - m2' S2^-1 m2
gives
    log int p1^2 / p2 = 1/2 log det S2 - log det S1 - 1/2 log det P
                        + 1/2 (b' P^-1 b - c),
finite iff P is positive definite, i.e. iff 2 S2 - S1 is.

Squared Hellinger distance (in [0, 1]) is 1 - BC with Bhattacharyya
coefficient BC = det(S1)^1/4 det(S2)^1/4 det(Sb)^-1/2 exp(-dm' Sb^-1 dm / 8),
Sb = (S1 + S2) / 2.

Second log-moments. Write log p2(z) = a - q(z) / 2 with
a = -1/2 (l log 2 pi + log det S2) and q(z) = (z-m2)' S2^-1 (z-m2). Under
z ~ N(m, S), with B = S2^-1 S and e = m - m2,
    E q   = tr B + e' S2^-1 e,
    Var q = 2 tr(B^2) + 4 e' S2^-1 S S2^-1 e,
so E log^2 p2 = (a - E q / 2)^2 + Var q / 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gmm import GaussianNoise
from .gmm import push_forward


def _chol(mat: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise ValueError(f"{what} is not positive definite") from None


def _logdet(chol: np.ndarray) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


@dataclass(frozen=True)
class GaussianPair:
    mean1: np.ndarray
    cov1: np.ndarray
    mean2: np.ndarray
    cov2: np.ndarray

    def __post_init__(self):
        m1, m2 = (np.atleast_1d(np.asarray(m, float)) for m in (self.mean1, self.mean2))
        c1, c2 = (np.atleast_2d(np.asarray(c, float)) for c in (self.cov1, self.cov2))
        l = m1.size
        if m2.size != l or c1.shape != (l, l) or c2.shape != (l, l):
            raise ValueError("Gaussian pair dimensions disagree")
        _chol(c1, "cov1")
        _chol(c2, "cov2")
        object.__setattr__(self, "mean1", m1)
        object.__setattr__(self, "mean2", m2)
        object.__setattr__(self, "cov1", c1)
        object.__setattr__(self, "cov2", c2)

    @property
    def dim(self) -> int:
        return self.mean1.size


def gaussian_entropy_cov(cov) -> float:
    cov = np.atleast_2d(np.asarray(cov, float))
    return 0.5 * cov.shape[0] * (1.0 + math.log(2.0 * math.pi)) + 0.5 * _logdet(_chol(cov, "covariance"))


def kl_divergence(p: GaussianPair) -> float:
    l1, l2 = _chol(p.cov1, "cov1"), _chol(p.cov2, "cov2")
    s2inv_s1 = np.linalg.solve(p.cov2, p.cov1)
    dm = p.mean1 - p.mean2
    maha = float(dm @ np.linalg.solve(p.cov2, dm))
    kl = 0.5 * (np.trace(s2inv_s1) + maha - p.dim + _logdet(l2) - _logdet(l1))
    return max(kl, 0.0)


def chi2_divergence(p: GaussianPair) -> float:
    """chi^2(p1, p2); ``math.inf`` when 2 cov2 - cov1 is not positive definite."""
    s1inv = np.linalg.inv(p.cov1)
    s2inv = np.linalg.inv(p.cov2)
    P = 2.0 * s1inv - s2inv
    P = 0.5 * (P + P.T)
    try:
        lp = np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        return math.inf
    b = 2.0 * s1inv @ p.mean1 - s2inv @ p.mean2
    c = 2.0 * p.mean1 @ s1inv @ p.mean1 - p.mean2 @ s2inv @ p.mean2
    pb = np.linalg.solve(P, b)
    log_int = (0.5 * _logdet(_chol(p.cov2, "cov2")) - _logdet(_chol(p.cov1, "cov1"))
               - 0.5 * _logdet(lp) + 0.5 * (b @ pb - c))
    if log_int > 709.0:  # beyond float range
        return math.inf
    return max(math.expm1(log_int), 0.0)


def hellinger_sq(p: GaussianPair) -> float:
    sb = 0.5 * (p.cov1 + p.cov2)
    dm = p.mean1 - p.mean2
    log_bc = (0.25 * _logdet(_chol(p.cov1, "cov1")) + 0.25 * _logdet(_chol(p.cov2, "cov2"))
              - 0.5 * _logdet(_chol(sb, "mean covariance"))
              - 0.125 * float(dm @ np.linalg.solve(sb, dm)))
    return min(max(-math.expm1(log_bc), 0.0), 1.0) + 0.0  # no -0.0


def _identical(p: GaussianPair) -> bool:
    return bool(np.array_equal(p.mean1, p.mean2) and np.array_equal(p.cov1, p.cov2))


def gaussian_divergences(p: GaussianPair) -> dict:
    if _identical(p):
        return {"kl": 0.0, "chi2": 0.0, "hellinger_sq": 0.0}
    return {"kl": kl_divergence(p), "chi2": chi2_divergence(p), "hellinger_sq": hellinger_sq(p)}


def expected_log_sq(mean, cov, mean2, cov2) -> float:
    """E log^2 N(z; mean2, cov2) for z ~ N(mean, cov)."""
    mean, mean2 = np.atleast_1d(mean).astype(float), np.atleast_1d(mean2).astype(float)
    cov, cov2 = np.atleast_2d(cov).astype(float), np.atleast_2d(cov2).astype(float)
    l = mean.size
    a = -0.5 * (l * math.log(2.0 * math.pi) + _logdet(_chol(cov2, "cov2")))
    B = np.linalg.solve(cov2, cov)
    e = mean - mean2
    s2e = np.linalg.solve(cov2, e)
    eq = np.trace(B) + e @ s2e
    var_q = 2.0 * np.trace(B @ B) + 4.0 * s2e @ cov @ s2e
    return float((a - 0.5 * eq) ** 2 + 0.25 * var_q)


def check_entropy_bounds(p: GaussianPair) -> dict:
    """Both upper bounds on |Ent(p1) - Ent(p2)| next to the exact difference."""
    lhs = abs(gaussian_entropy_cov(p.cov1) - gaussian_entropy_cov(p.cov2))
    div = gaussian_divergences(p)
    kl, chi2 = div["kl"], div["chi2"]
    m22 = expected_log_sq(p.mean2, p.cov2, p.mean2, p.cov2)
    m12 = expected_log_sq(p.mean1, p.cov1, p.mean2, p.cov2)
    if math.isinf(chi2):
        chi2_bound = math.inf
    else:
        chi2_bound = math.sqrt(m22) * math.sqrt(chi2) + chi2
    kl_bound = math.sqrt(2.0) * math.sqrt(m12 + m22) * math.sqrt(kl) + kl
    return {"lhs": lhs, "chi2_bound": chi2_bound, "kl_bound": kl_bound}


def delta_k(model_a, model_b, prior_points, noise: GaussianNoise) -> float:
    """Prior-predictive RMS discrepancy sqrt(mean |G_a(x) - G_b(x)|^2_Gamma)."""
    if (model_a.input_dim, model_a.output_dim) != (model_b.input_dim, model_b.output_dim):
        raise ValueError("models must share input and output dimensions")
    diff = push_forward(model_a, prior_points) - push_forward(model_b, prior_points)
    return math.sqrt(float(np.mean(noise.sq_norm(diff))))
