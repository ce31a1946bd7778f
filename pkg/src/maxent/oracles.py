"""Registered reference computations, frozen to text fixtures.

Each oracle returns its values together with the configuration (and seed,
where randomness is involved) that produced them. ``oracle_freeze`` writes
``<out_dir>/<name>.txt``: ``#`` header lines with the configuration, then one
value per line at 12 significant digits. Regenerating a fixture reproduces
the file byte for byte.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.linalg

from .divergences import delta_k
from .entropy import linear_evidence_entropy
from .gmm import GaussianNoise, GmmSurrogate
from .models import build_deconvolution, build_elliptic
from .qmc import default_rule, mobius_quadrature
from .seeding import child_rng

ORACLE_SEED = 20240917


def _jk_deconv_default():
    model = build_deconvolution()
    noise = model.noise()
    value = linear_evidence_entropy(model.matrix, model.prior_var, noise)
    # independent determinant through an LU factorization
    cov = model.prior_var * model.matrix @ model.matrix.T + noise.covariance
    lu, _ = scipy.linalg.lu_factor(cov)
    log_det = float(np.sum(np.log(np.abs(np.diag(lu)))))
    check = 0.5 * cov.shape[0] * (1.0 + math.log(2.0 * math.pi)) + 0.5 * log_det
    if abs(check - value) > 1e-8:
        raise FloatingPointError(f"Cholesky and LU log-determinants disagree: {value} vs {check}")
    return [value], {"K": 20, "gamma": 0.1, "sigma_x": 10.0, "sigma_eps": 2.0}


def _elliptic_ref(n: int):
    def oracle():
        model = build_elliptic(n, 100)
        return list(model(np.full(100, 0.5))), {"n": n, "K": 100, "x": "all 1/2"}
    return oracle


def _mobius_gauss_norm():
    d, var, count = 3, 0.1, 2**16
    rule = default_rule("cubature", d, count).randomized(child_rng(ORACLE_SEED, count, 0, "entropy"))
    norm = (2.0 * math.pi * var) ** (-d / 2)

    def density(y):
        return norm * np.exp(-0.5 * np.sum(y * y, axis=1) / var)

    return [mobius_quadrature(density, rule)], {"d": d, "variance": var, "N": count,
                                                "seed": ORACLE_SEED}


def _deconv_rowsums():
    model = build_deconvolution()
    return list(model(np.ones(model.input_dim))), {"K": 20, "gamma": 0.1, "x": "all ones"}


def _delta_k_elliptic():
    rng = child_rng(ORACLE_SEED, 64, 0, "surrogate")
    points = rng.random((64, 100))
    fine = build_elliptic(64, 100)
    noise = GaussianNoise.isotropic(3, 0.1)
    values = [delta_k(build_elliptic(n, 100), fine, points, noise) for n in (16, 32)]
    return values, {"coarse_n": "16, 32", "fine_n": 64, "K": 100, "noise_var": 0.1,
                    "points": 64, "seed": ORACLE_SEED}


def small_surrogate() -> GmmSurrogate:
    """The fixed d=2, M=8 surrogate used by the unbiasedness checks."""
    rng = child_rng(ORACLE_SEED, 8, 0, "surrogate")
    return GmmSurrogate(rng.normal(0.0, 1.0, (8, 2)), GaussianNoise(np.diag([0.5, 0.3])))


ORACLES: dict[str, Callable[[], tuple[list, dict]]] = {
    "jk_deconv_default": _jk_deconv_default,
    "elliptic_ref_n256": _elliptic_ref(256),
    "elliptic_ref_n32": _elliptic_ref(32),
    "mobius_gauss_norm": _mobius_gauss_norm,
    "deconv_rowsums": _deconv_rowsums,
    "delta_k_elliptic": _delta_k_elliptic,
}


def format_value(v: float) -> str:
    return f"{float(v):#.12g}"


def compute(name: str) -> tuple[list, dict]:
    try:
        oracle = ORACLES[name]
    except KeyError:
        raise KeyError(f"unknown oracle {name!r}; known: {sorted(ORACLES)}") from None
    return oracle()


def render(name: str, values, config: dict) -> str:
    lines = [f"# oracle: {name}"]
    lines += [f"# {k} = {v}" for k, v in config.items()]
    lines += [format_value(v) for v in values]
    return "\n".join(lines) + "\n"


def oracle_freeze(name: str, out_dir="fixtures") -> Path:
    values, config = compute(name)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.txt"
    path.write_text(render(name, values, config))
    return path


def read_fixture(path) -> list[float]:
    text = Path(path).read_text()
    return [float(line) for line in text.splitlines() if line and not line.startswith("#")]
