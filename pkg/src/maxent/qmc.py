"""Randomly shifted rank-1 lattice rules and the transforms built on them.

Point sets live either in the unit cube or on the real line. The unit-cube
rule is

    X_m = frac(z * m / M + shift),  m = 1, ..., M

optionally followed by the tent map ``1 - |2x - 1|``. Points are pushed to
the real line either through the standard normal inverse CDF (Gaussian
priors) or through the Mobius map ``-cot(pi x)`` (cubature over R^d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Literal

import numpy as np
from scipy.special import ndtr

Variant = Literal["plain", "tent"]

# clamp applied before the inverse CDF; frac() can return exactly 0.0
_U_MIN = 2.0**-53
_U_MAX = 1.0 - 2.0**-53

# Surrogates sample priors whose coordinates matter less and less (decaying
# weights); entropy cubature runs in d <= 20 roughly equal-weight axes.
SURROGATE_VECTOR = "lattice-32001-1024-1048576.3600.txt"
CUBATURE_VECTOR = "lattice-lnb-750-24.txt"


@dataclass(frozen=True)
class LatticeRule:
    """A randomly shifted rank-1 lattice rule with ``count`` points.

    Parameters
    ----------
    generating_vector : array of int, shape (dim,)
        Entries in ``{0, ..., count - 1}``.
    count : int
        Number of points M.
    shift : array of float, shape (dim,), optional
        Shift in ``[0, 1)^dim``; zero if omitted.
    variant : {"plain", "tent"}
        Whether to apply the tent map after shifting.
    """

    generating_vector: np.ndarray
    count: int
    shift: np.ndarray = field(default=None)  # type: ignore[assignment]
    variant: Variant = "plain"

    def __post_init__(self):
        z = np.asarray(self.generating_vector)
        if z.ndim != 1 or z.size == 0:
            raise ValueError("generating vector must be a non-empty 1-d array")
        if not np.issubdtype(z.dtype, np.integer):
            raise ValueError("generating vector must hold integers")
        if int(self.count) <= 0:
            raise ValueError("lattice point count must be positive")
        if np.any(z < 0) or np.any(z >= self.count):
            raise ValueError(
                f"generating vector entries must lie in [0, {self.count - 1}]"
            )
        shift = np.zeros(z.size) if self.shift is None else np.asarray(self.shift, float)
        if shift.shape != z.shape:
            raise ValueError("shift length must equal the lattice dimension")
        if np.any(shift < 0.0) or np.any(shift >= 1.0):
            raise ValueError("shift components must lie in [0, 1)")
        if self.variant not in ("plain", "tent"):
            raise ValueError(f"unknown lattice variant {self.variant!r}")
        z = z.astype(np.int64)
        z.flags.writeable = False
        shift = shift.copy()
        shift.flags.writeable = False
        object.__setattr__(self, "generating_vector", z)
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "shift", shift)

    @property
    def dim(self) -> int:
        return self.generating_vector.size

    def with_shift(self, shift) -> "LatticeRule":
        return LatticeRule(self.generating_vector, self.count, shift, self.variant)

    def randomized(self, rng: np.random.Generator) -> "LatticeRule":
        """Same rule with one uniform shift drawn from ``rng``."""
        return self.with_shift(rng.random(self.dim))


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray
    domain_tag: Literal["unit_cube", "real_line"]

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def lattice_points(rule: LatticeRule, rng: np.random.Generator | None = None) -> PointSet:
    """Generate the M points of ``rule`` in order m = 1, ..., M.

    If ``rng`` is given, a single shift is drawn from it and used for every
    point, replacing ``rule.shift``.
    """
    if rng is not None:
        rule = rule.randomized(rng)
    m = np.arange(1, rule.count + 1, dtype=np.int64)
    # exact integer arithmetic for the unshifted lattice
    base = np.remainder(np.outer(m, rule.generating_vector), rule.count) / rule.count
    pts = base + rule.shift
    pts -= np.floor(pts)
    if rule.variant == "tent":
        pts = 1.0 - np.abs(2.0 * pts - 1.0)
    return PointSet(pts, "unit_cube")


# Wichura's AS 241 (PPND16) coefficients
_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)


def _poly(coeffs, x):
    out = np.full_like(x, coeffs[-1])
    for c in coeffs[-2::-1]:
        out = out * x + c
    return out


def norm_ppf(u) -> np.ndarray:
    """Standard normal inverse CDF, accurate to about 1e-15 absolute.

    AS 241 rational approximation refined by one Halley step against
    ``ndtr``. Inputs are clamped to ``[2^-53, 1 - 2^-53]``.
    """
    u = np.asarray(u, dtype=float)
    if np.any(np.isnan(u)):
        raise ValueError("NaN passed to the inverse normal CDF")
    u = np.clip(u, _U_MIN, _U_MAX)
    q = u - 0.5
    x = np.empty_like(u)

    central = np.abs(q) <= 0.425
    r = 0.180625 - q[central] ** 2
    x[central] = q[central] * _poly(_A, r) / _poly(_B, r)

    tail = ~central
    p = np.minimum(u[tail], 1.0 - u[tail])
    r = np.sqrt(-np.log(p))
    near = r <= 5.0
    val = np.empty_like(r)
    rn = r[near] - 1.6
    val[near] = _poly(_C, rn) / _poly(_D, rn)
    rf = r[~near] - 5.0
    val[~near] = _poly(_E, rf) / _poly(_F, rf)
    x[tail] = np.where(q[tail] < 0.0, -val, val)

    # Halley step; evaluate the residual on the smaller tail for accuracy
    lower = x < 0.0
    resid = np.where(lower, ndtr(x) - u, (1.0 - u) - ndtr(-x))
    e =resid * math.sqrt(2.0 * math.pi) * np.exp(0.5 * x * x)
    return x - e / (1.0 + 0.5 * x * e)


def map_to_gaussian(points: PointSet) -> PointSet:
    if points.domain_tag != "unit_cube":
        raise ValueError("map_to_gaussian expects unit-cube points")
    return PointSet(norm_ppf(points.points), "real_line")


def mobius_quadrature(
    f: Callable[[np.ndarray], np.ndarray],
    rule: LatticeRule,
    *,
    log_space: bool = False,
) -> float:
    """Mobius-transformed lattice cubature of ``f`` over R^d.

    Computes ``(1/N) sum_n prod_j psi'(X_nj) f(psi(X_n))`` with
    ``psi(x) = -cot(pi x)`` and ``psi'(x) = pi / sin(pi x)^2``.

    Parameters
    ----------
    f : callable
        Maps an (N, d) array of nodes to N values. With ``log_space=True`` it
        must instead return ``(log|f|, sign(f))``, which avoids underflow of
        f against the Jacobian weights.
    rule : LatticeRule
        Plain lattice rule of dimension d.

    Raises
    ------
    FloatingPointError
        If the accumulated sum is not finite (f does not decay fast enough
        for this rule).
    """
    if rule.variant != "plain":
        raise ValueError("Mobius cubature uses a plain lattice rule")
    x = lattice_points(rule).points
    s = np.sin(np.pi * x)
    # nodes on the cube boundary map to infinity, where f vanishes
    valid = np.all(s != 0.0, axis=1)
    x, s = x[valid], s[valid]
    y = -np.cos(np.pi * x) / s
    log_w = np.sum(math.log(math.pi) - 2.0 * np.log(np.abs(s)), axis=1)

    if log_space:
        log_abs, sign = f(y)
        log_abs = np.asarray(log_abs, float)
        sign = np.asarray(sign, float)
    else:
        vals = np.asarray(f(y), float)
        sign = np.sign(vals)
        with np.errstate(divide="ignore"):
            log_abs = np.log(np.abs(vals))
    with np.errstate(invalid="ignore"):
        terms = np.where(sign == 0.0, 0.0, sign * np.exp(log_w + log_abs))
    total = math.fsum(terms) / rule.count
    if not math.isfinite(total):
        raise FloatingPointError(
            "Mobius cubature produced a non-finite sum; the integrand lacks decay"
        )
    return total


def load_generating_vector(path, dim: int | None, max_count: int) -> np.ndarray:
    """Read the first ``dim`` components (all if None) of a generating vector file.

    The file holds one base-10 integer per line; lines starting with ``#``
    are ignored. Components are reduced modulo ``max_count``, which is how
    an extensible lattice sequence yields its embedded 2^m-point rules.
    """
    if (dim is not None and dim <= 0) or max_count <= 0:
        raise ValueError("dim and max_count must be positive")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FileNotFoundError(f"generating vector file not found: {path}") from None
    values = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            values.append(int(line.split()[0]))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-integer token {line!r}") from None
        if len(values) == dim:
            break
    if dim is None:
        if not values:
            raise ValueError(f"generating vector file {path} has no entries")
    elif len(values) < dim:
        raise ValueError(
            f"generating vector file {path} has {len(values)} entries, need {dim}"
        )
    return np.remainder(np.array(values, dtype=np.int64), max_count)


def default_vector_path(name: str) -> Path:
    return Path(str(resources.files("maxent") / "data" / name))


def default_rule(purpose: Literal["surrogate", "cubature"], dim: int, count: int,
                 variant: Variant = "plain") -> LatticeRule:
    """Unshifted rule built from one of the two bundled vectors.

    Surrogates and the Mobius cubature use different vectors so that the two
    approximation steps never share a lattice.
    """
    name = SURROGATE_VECTOR if purpose == "surrogate" else CUBATURE_VECTOR
    z = load_generating_vector(default_vector_path(name), dim, count)
    return LatticeRule(z, count, None, variant)
