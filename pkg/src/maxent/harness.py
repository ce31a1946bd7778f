"""Convergence studies: seeded realizations, RMSE over M, slope fits, reports.

A study fixes a model, a prior sampler and an entropy method, then for every
M in ``m_grid`` builds R independent surrogates, estimates their entropies
and compares them with a reference value::

    rmse(M)    = sqrt(mean_p (ref - est_p)^2)
    std_dev(M) = sample standard deviation of est_p

The slope of log2(rmse) against log2(M) is the empirical convergence rate.
Realization (M, p) draws all its randomness from the child streams of
:mod:`maxent.seeding`, so results do not depend on scheduling.
"""

from __future__ import annotations

import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from multiprocessing import get_context
from pathlib import Path
from typing import Literal

import numpy as np
from threadpoolctl import threadpool_limits

from .entropy import (EntropyEstimate, gauss_lattice_entropy, linear_evidence_entropy,
                      mc_entropy, mobius_entropy)
from .gmm import GaussianNoise, GmmSurrogate, build_surrogate
from .models import build_deconvolution, build_elliptic
from .qmc import default_rule, lattice_points, norm_ppf
from .seeding import child_rng

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

Sampler = Literal["mc", "lattice_plain", "lattice_tent"]
SAMPLERS = ("mc", "lattice_plain", "lattice_tent")
ENTROPY_METHODS = ("mc", "mobius", "gauss_lattice")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class RealizationError(RuntimeError):
    """A single realization failed; carries its (M, p) coordinate."""

    def __init__(self, m: int, p: int, message: str):
        super().__init__(f"realization M={m}, p={p} failed: {message}")
        self.m = m
        self.p = p


# ---------------------------------------------------------------- configs

@dataclass(frozen=True)
class DeconvolutionSpec:
    K: int = 20
    gamma: float = 0.1
    sigma_x: float = 10.0
    sigma_eps: float = 2.0
    kind: str = field(default="deconvolution", init=False)


@dataclass(frozen=True)
class EllipticSpec:
    n: int = 64
    K: int = 100
    noise_var: float = 0.1
    kind: str = field(default="elliptic", init=False)


@dataclass(frozen=True)
class EntropySpec:
    """Entropy method and the rule giving N from M.

    ``n_rule="proportional"`` uses N = multiplier * M; ``"fixed"`` uses N = n.
    """

    method: str = "mobius"
    n_rule: str = "proportional"
    multiplier: int = 1024
    n: int = 2**14

    def count(self, m: int) -> int:
        return self.multiplier * m if self.n_rule == "proportional" else self.n


@dataclass(frozen=True)
class ReferenceSpec:
    """``analytic`` (linear models only), ``frozen`` (given value) or ``self``.

    A ``self`` reference is one surrogate of size m0 drawn with ``sampler``
    and integrated with N = n0 by the study's entropy method.
    """

    kind: str = "analytic"
    value: float | None = None
    m0: int = 2**13
    n0: int = 2**20
    sampler: str = "lattice_tent"


@dataclass(frozen=True)
class ExperimentConfig:
    model: DeconvolutionSpec | EllipticSpec
    prior: str
    sampler: str
    entropy: EntropySpec
    m_grid: tuple[int, ...]
    realizations: int
    seed: int
    reference: ReferenceSpec
    name: str = "study"

    def __post_init__(self):
        object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        validate(self)


def _is_pow2(x: int) -> bool:
    return x >= 1 and (x & (x - 1)) == 0


def validate(cfg: ExperimentConfig) -> None:
    if cfg.realizations < 2:
        raise ConfigError("realizations R must be at least 2")
    if not cfg.m_grid:
        raise ConfigError("m_grid must not be empty")
    if not all(_is_pow2(m) for m in cfg.m_grid):
        raise ConfigError("m_grid entries must be powers of two")
    if any(b <= a for a, b in zip(cfg.m_grid, cfg.m_grid[1:])):
        raise ConfigError("m_grid must be strictly increasing")
    if cfg.sampler not in SAMPLERS:
        raise ConfigError(f"unknown sampler {cfg.sampler!r}; choose from {SAMPLERS}")
    expected_prior = "std_gaussian" if cfg.model.kind == "deconvolution" else "uniform_cube"
    if cfg.prior not in ("std_gaussian", "uniform_cube"):
        raise ConfigError(f"unknown prior {cfg.prior!r}")
    if cfg.prior != expected_prior:
        raise ConfigError(f"the {cfg.model.kind} model needs prior {expected_prior!r}")
    e = cfg.entropy
    if e.method not in ENTROPY_METHODS:
        raise ConfigError(f"unknown entropy method {e.method!r}")
    if e.n_rule not in ("proportional", "fixed"):
        raise ConfigError(f"unknown N rule {e.n_rule!r}")
    if e.multiplier < 1 or e.n < 2:
        raise ConfigError("N rule must give at least two points")
    r = cfg.reference
    if r.kind not in ("analytic", "frozen", "self"):
        raise ConfigError(f"unknown reference kind {r.kind!r}")
    if r.kind == "analytic" and cfg.model.kind != "deconvolution":
        raise ConfigError("an analytic reference exists for the deconvolution model only")
    if r.kind == "frozen" and (r.value is None or not math.isfinite(r.value)):
        raise ConfigError("a frozen reference needs a finite value")
    if r.kind == "self" and (r.sampler not in SAMPLERS or r.m0 < 1 or r.n0 < 2):
        raise ConfigError("self reference needs a valid sampler, m0 >= 1 and n0 >= 2")
    if isinstance(cfg.model, EllipticSpec) and cfg.model.n % 4:
        raise ConfigError("elliptic mesh size n must be divisible by 4")


def default_config(experiment: str) -> ExperimentConfig:
    """Published protocol defaults for ``deconv`` or ``elliptic``."""
    if experiment == "deconv":
        return ExperimentConfig(
            model=DeconvolutionSpec(),
            prior="std_gaussian",
            sampler="mc",
            entropy=EntropySpec(method="gauss_lattice", n_rule="fixed", n=2**15),
            m_grid=tuple(2**k for k in range(4, 11)),
            realizations=30,
            seed=2024,
            reference=ReferenceSpec(kind="analytic"),
            name="deconv",
        )
    if experiment == "elliptic":
        return ExperimentConfig(
            model=EllipticSpec(),
            prior="uniform_cube",
            sampler="mc",
            entropy=EntropySpec(method="mobius", n_rule="proportional", multiplier=1024),
            m_grid=tuple(2**k for k in range(4, 11)),
            realizations=30,
            seed=2024,
            reference=ReferenceSpec(kind="self", m0=2**13, n0=2**20, sampler="lattice_tent"),
            name="elliptic",
        )
    raise ConfigError(f"unknown experiment {experiment!r}; choose deconv or elliptic")


_MODEL_KEYS = {"deconvolution": {"K", "gamma", "sigma_x", "sigma_eps"},
               "elliptic": {"n", "K", "noise_var"}}


def _take(table: dict, allowed: set, where: str) -> dict:
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{where}]: {sorted(unknown)}")
    return dict(table)


def config_from_dict(data: dict) -> list[ExperimentConfig]:
    """Configs for one study; ``sampler`` may be a list sharing one reference."""
    data = _take(data, {"name", "model", "sampling", "entropy", "reference"}, "top level")
    model_tbl = dict(data.get("model", {}))
    kind = model_tbl.pop("kind", "deconvolution")
    if kind not in _MODEL_KEYS:
        raise ConfigError(f"unknown model kind {kind!r}")
    base = default_config("deconv" if kind == "deconvolution" else "elliptic")
    try:
        spec_cls = DeconvolutionSpec if kind == "deconvolution" else EllipticSpec
        model = spec_cls(**_take(model_tbl, _MODEL_KEYS[kind], "model"))
        samp = _take(data.get("sampling", {}),
                     {"prior", "sampler", "m_grid", "realizations", "seed"}, "sampling")
        ent = replace(base.entropy, **_take(data.get("entropy", {}),
                                            {"method", "n_rule", "multiplier", "n"}, "entropy"))
        ref = replace(base.reference, **_take(data.get("reference", {}),
                                              {"kind", "value", "m0", "n0", "sampler"}, "reference"))
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    samplers = samp.get("sampler", base.sampler)
    if isinstance(samplers, str):
        samplers = [samplers]
    seed = samp.get("seed", base.seed)
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    return [
        ExperimentConfig(
            model=model,
            prior=samp.get("prior", base.prior),
            sampler=s,
            entropy=ent,
            m_grid=tuple(samp.get("m_grid", base.m_grid)),
            realizations=int(samp.get("realizations", base.realizations)),
            seed=seed,
            reference=ref,
            name=str(data.get("name", base.name)),
        )
        for s in samplers
    ]


def load_config(path) -> list[ExperimentConfig]:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)


# ------------------------------------------------------------ realizations

@lru_cache(maxsize=4)
def _setup(model_spec):
    """Model and noise for a spec; cached per process."""
    if model_spec.kind == "deconvolution":
        model = build_deconvolution(model_spec.K, model_spec.gamma,
                                    model_spec.sigma_x, model_spec.sigma_eps)
        return model, model.noise()
    model = build_elliptic(model_spec.n, model_spec.K)
    return model, GaussianNoise.isotropic(model.output_dim, model_spec.noise_var)


@lru_cache(maxsize=16)
def _rule(purpose: str, dim: int, count: int, variant: str):
    return default_rule(purpose, dim, count, variant)


def prior_points(cfg_model, prior: str, sampler: str, m: int,
                 rng: np.random.Generator) -> np.ndarray:
    """M prior samples drawn by ``sampler``, in evaluation order."""
    model, _ = _setup(cfg_model)
    d = model.input_dim
    if sampler == "mc":
        if prior == "std_gaussian":
            u = rng.standard_normal((m, d))
        else:
            u = rng.random((m, d))
    else:
        variant = "tent" if sampler == "lattice_tent" else "plain"
        u = lattice_points(_rule("surrogate", d, m, variant), rng).points
        if prior == "std_gaussian":
            u = norm_ppf(u)
    if prior == "std_gaussian":
        return cfg_model.sigma_x * u
    return u


def surrogate_for(cfg_model, prior: str, sampler: str, m: int,
                  rng: np.random.Generator) -> GmmSurrogate:
    model, noise = _setup(cfg_model)
    return build_surrogate(model, prior_points(cfg_model, prior, sampler, m, rng), noise)


def estimate(s: GmmSurrogate, spec: EntropySpec, n: int,
             rng: np.random.Generator) -> EntropyEstimate:
    if spec.method == "mc":
        return mc_entropy(s, n, rng)
    rule = _rule("cubature", s.dim, n, "plain")
    if spec.method == "mobius":
        return mobius_entropy(s, rule, rng)
    return gauss_lattice_entropy(s, rule, rng)


def realization(cfg: ExperimentConfig, m: int, p: int) -> float:
    s = surrogate_for(cfg.model, cfg.prior, cfg.sampler, m,
                      child_rng(cfg.seed, m, p, "surrogate"))
    est = estimate(s, cfg.entropy, cfg.entropy.count(m),
                   child_rng(cfg.seed, m, p, "entropy"))
    return est.value


def reference_value(cfg: ExperimentConfig) -> float:
    r = cfg.reference
    if r.kind == "frozen":
        return float(r.value)
    if r.kind == "analytic":
        model, noise = _setup(cfg.model)
        return linear_evidence_entropy(model.matrix, model.prior_var, noise)
    s = surrogate_for(cfg.model, cfg.prior, r.sampler, r.m0,
                      child_rng(cfg.seed, r.m0, 0, "reference_surrogate"))
    est = estimate(s, cfg.entropy, r.n0, child_rng(cfg.seed, r.m0, 0, "reference_entropy"))
    if not math.isfinite(est.value):
        raise FloatingPointError("reference entropy is not finite")
    return est.value


def worker_count() -> int:
    raw = os.environ.get("MAXENT_THREADS")
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"MAXENT_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"MAXENT_THREADS must be a positive integer, got {raw!r}")
    return n


_WORKER_CFG: ExperimentConfig | None = None
_WORKER_LIMITS = None


def _init_worker(cfg: ExperimentConfig) -> None:
    global _WORKER_CFG, _WORKER_LIMITS
    _WORKER_CFG = cfg
    _WORKER_LIMITS = threadpool_limits(1)


def _safe_realization(cfg: ExperimentConfig, m: int, p: int):
    try:
        value = realization(cfg, m, p)
    except Exception as exc:  # reported with its coordinate by the caller
        return m, p, None, f"{type(exc).__name__}: {exc}"
    if not math.isfinite(value):
        return m, p, None, "non-finite entropy estimate"
    return m, p, value, None


def _mp_context():
    # fork needs no __main__ guard in the caller; workers re-pin BLAS anyway
    import multiprocessing
    if "fork" in multiprocessing.get_all_start_methods():
        return get_context("fork")
    return get_context("spawn")


def _pool_task(task):
    return _safe_realization(_WORKER_CFG, *task)


# ----------------------------------------------------------------- reports

@dataclass(frozen=True)
class ReportRow:
    M: int
    rmse: float
    std_dev: float
    mean_estimate: float


@dataclass(frozen=True)
class ConvergenceReport:
    rows: tuple[ReportRow, ...]
    slope: float
    intercept: float
    reference: float
    estimates: np.ndarray = field(repr=False)  # (len(m_grid), R)
    name: str = "study"
    sampler: str = "mc"

    def __post_init__(self):
        for r in self.rows:
            if not all(math.isfinite(v) for v in (r.rmse, r.std_dev, r.mean_estimate)):
                raise FloatingPointError(f"non-finite statistics at M={r.M}")


def fit_slope(m_values, rmse_values) -> tuple[float, float]:
    """Least-squares line through (log2 M, log2 rmse); returns (slope, intercept)."""
    x = np.log2(np.asarray(m_values, float))
    y = np.log2(np.asarray(rmse_values, float))
    if x.size < 2:
        raise ValueError("slope fit needs at least two points")
    xm, ym = x.mean(), y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))
    return slope, float(ym - slope * xm)


def summarize(m_grid, estimates: np.ndarray, reference: float,
              name: str = "study", sampler: str = "mc") -> ConvergenceReport:
    estimates = np.asarray(estimates, float)
    rows = []
    for m, est in zip(m_grid, estimates):
        rows.append(ReportRow(
            M=int(m),
            rmse=float(np.sqrt(np.mean((reference - est) ** 2))),
            std_dev=float(np.std(est, ddof=1)),
            mean_estimate=float(np.mean(est)),
        ))
    slope, intercept = fit_slope([r.M for r in rows], [r.rmse for r in rows])
    return ConvergenceReport(tuple(rows), slope, intercept, float(reference),
                             estimates, name, sampler)


def run_convergence(cfg: ExperimentConfig, reference: float | None = None,
                    workers: int | None = None) -> ConvergenceReport:
    """Run all R x len(m_grid) realizations of ``cfg`` and summarize them.

    ``reference`` overrides the configured reference (used to share one
    reference across the samplers of a study). ``workers`` defaults to
    ``MAXENT_THREADS`` or the CPU count.
    """
    validate(cfg)
    workers = worker_count() if workers is None else workers
    tasks = [(m, p) for m in cfg.m_grid for p in range(1, cfg.realizations + 1)]
    with threadpool_limits(1):
        ref = reference_value(cfg) if reference is None else float(reference)
        if workers <= 1 or len(tasks) == 1:
            results = [_safe_realization(cfg, m, p) for m, p in tasks]
        else:
            with ProcessPoolExecutor(max_workers=min(workers, len(tasks)),
                                     mp_context=_mp_context(),
                                     initializer=_init_worker, initargs=(cfg,)) as pool:
                results = list(pool.map(_pool_task, tasks, chunksize=1))
    index = {m: i for i, m in enumerate(cfg.m_grid)}
    estimates = np.empty((len(cfg.m_grid), cfg.realizations))
    for m, p, value, err in results:
        if err is not None:
            raise RealizationError(m, p, err)
        estimates[index[m], p - 1] = value
    return summarize(cfg.m_grid, estimates, ref, cfg.name, cfg.sampler)


def run_study(cfgs: list[ExperimentConfig],
              workers: int | None = None) -> dict[str, ConvergenceReport]:
    """Run several samplers of one study against a single frozen reference."""
    if not cfgs:
        raise ConfigError("empty study")
    with threadpool_limits(1):
        ref = reference_value(cfgs[0])
    return {c.sampler: run_convergence(c, ref, workers) for c in cfgs}


def _svg(report: ConvergenceReport) -> str:
    w, h, left, right, top, bottom = 640, 420, 70, 20, 20, 50
    ms = np.array([r.M for r in report.rows], float)
    x = np.log2(ms)
    series = {"rmse": np.array([r.rmse for r in report.rows]),
              "std_dev": np.array([r.std_dev for r in report.rows])}
    positive = np.concatenate([v[v > 0] for v in series.values()])
    fit = report.intercept + report.slope * x
    ylo = min(np.log2(positive).min(), fit.min()) - 0.5
    yhi = max(np.log2(positive).max(), fit.max()) + 0.5
    xlo, xhi = x.min() - 0.5, x.max() + 0.5

    def px(v):
        return left + (v - xlo) / (xhi - xlo) * (w - left - right)

    def py(v):
        return top + (yhi - v) / (yhi - ylo) * (h - top - bottom)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
           f'viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">',
           f'<rect x="{left}" y="{top}" width="{w - left - right}" '
           f'height="{h - top - bottom}" fill="none" stroke="black"/>']
    for xv, m in zip(x, ms):
        out.append(f'<text x="{px(xv):.2f}" y="{h - bottom + 18}" '
                   f'text-anchor="middle">{int(m)}</text>')
    for e in range(math.ceil(ylo / math.log2(10)), math.floor(yhi / math.log2(10)) + 1):
        yv = e * math.log2(10)
        out.append(f'<text x="{left - 6}" y="{py(yv) + 4:.2f}" text-anchor="end">1e{e}</text>')
        out.append(f'<line x1="{left}" y1="{py(yv):.2f}" x2="{left + 5}" y2="{py(yv):.2f}" stroke="black"/>')
    out.append(f'<text x="{(left + w - right) / 2:.2f}" y="{h - 12}" text-anchor="middle">M</text>')
    out.append(f'<polyline points="{" ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, fit))}" '
               'fill="none" stroke="gray" stroke-dasharray="6,4"/>')
    out.append(f'<text x="{px(x[-1]):.2f}" y="{py(fit[-1]) - 10:.2f}" text-anchor="end" '
               f'fill="gray">slope {report.slope:.2f}</text>')
    for (label, vals), colour, dy in zip(series.items(), ("#1f77b4", "#d62728"), (0, 16)):
        for a, b in zip(x, vals):
            if b > 0:
                out.append(f'<circle cx="{px(a):.2f}" cy="{py(math.log2(b)):.2f}" r="4" fill="{colour}"/>')
        out.append(f'<text x="{left + 10}" y="{top + 16 + dy}" fill="{colour}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(report: ConvergenceReport, out_dir) -> tuple[Path, Path]:
    """Write ``convergence.csv`` and ``convergence.svg`` into ``out_dir``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "convergence.csv"
        with csv_path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["M", "rmse", "std_dev", "mean_estimate"])
            for r in report.rows:
                writer.writerow([r.M, repr(r.rmse), repr(r.std_dev), repr(r.mean_estimate)])
        svg_path = out_dir / "convergence.svg"
        svg_path.write_text(_svg(report))
    except OSError as exc:
        raise OSError(f"cannot write report to {out_dir}: {exc.strerror or exc}") from exc
    return csv_path, svg_path


def write_summary(report: ConvergenceReport, cfg: ExperimentConfig, out_dir) -> Path:
    """Slope, reference and config as JSON, next to the CSV."""
    path = Path(out_dir) / "summary.json"
    data = {"slope": report.slope, "intercept": report.intercept,
            "reference": report.reference, "config": asdict(cfg)}
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path
