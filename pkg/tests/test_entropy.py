import math
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

from maxent.entropy import (EntropyEstimate, gauss_lattice_entropy, gaussian_entropy,
                            linear_evidence_entropy, mc_entropy, mobius_entropy)
from maxent.gmm import GaussianNoise, GmmSurrogate
from maxent.models import build_deconvolution
from maxent.oracles import read_fixture
from maxent.qmc import default_rule

H1 = 0.5 * (1.0 + math.log(2.0 * math.pi))
FIXTURES = Path(__file__).parent / "fixtures"


def trapezoid_entropy(s: GmmSurrogate, n: int = 400_001) -> float:
    z = s.centers[:, 0]
    y = np.linspace(z.min() - 10.0, z.max() + 10.0, n)
    p = np.exp(s.log_density(y[:, None]))
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(p > 0, -p * np.log(p), 0.0)
    return float(integrate.trapezoid(integrand, y))


class TestEstimateRecord:
    def test_std_error_only_for_mc(self):
        with pytest.raises(ValueError):
            EntropyEstimate(1.0, None, 1, 2, "mc")
        with pytest.raises(ValueError):
            EntropyEstimate(1.0, 0.1, 1, 2, "mobius_cubature")
        assert EntropyEstimate(1.0, None, 1, 2, "analytic").as_dict()["method"] == "analytic"


class TestAnalytic:
    def test_gaussian_entropy_examples(self):
        assert gaussian_entropy(GaussianNoise([[1.0]])) == pytest.approx(1.4189385332, abs=1e-10)
        assert gaussian_entropy(GaussianNoise(np.eye(2))) == pytest.approx(2.8378770664, abs=1e-10)
        assert gaussian_entropy(GaussianNoise([[math.e**2]])) == pytest.approx(2.4189385332,
                                                                              abs=1e-10)

    def test_linear_zero_matrix(self):
        noise = GaussianNoise(np.diag([1.0, 3.0]))
        assert linear_evidence_entropy(np.zeros((2, 4)), 2.0, noise) == pytest.approx(
            gaussian_entropy(noise), abs=1e-14)

    def test_linear_identity(self):
        d = 5
        val = linear_evidence_entropy(np.eye(d), 3.0, GaussianNoise(np.eye(d)))
        assert val == pytest.approx(d * H1 + 0.5 * d * math.log(4.0), abs=1e-12)

    def test_deconvolution_fixture(self):
        model = build_deconvolution()
        val = linear_evidence_entropy(model.matrix, model.prior_var, model.noise())
        frozen = read_fixture(FIXTURES / "jk_deconv_default.txt")[0]
        assert val == pytest.approx(frozen, abs=1e-9)

    def test_linear_errors(self):
        noise = GaussianNoise(np.eye(2))
        with pytest.raises(ValueError):
            linear_evidence_entropy(np.full((2, 2), np.nan), 1.0, noise)
        with pytest.raises(ValueError):
            linear_evidence_entropy(np.eye(2), 0.0, noise)
        with pytest.raises(ValueError):
            linear_evidence_entropy(np.eye(3), 1.0, noise)


class TestMonteCarlo:
    def test_single_gaussian_1d(self):
        s = GmmSurrogate([[0.0]], GaussianNoise([[1.0]]))
        est = mc_entropy(s, 10**6, np.random.default_rng(0))
        assert est.method == "mc" and est.n_count == 10**6 and est.m_count == 1
        assert abs(est.value - H1) < 3 * est.std_error

    def test_single_gaussian_20d(self):
        s = GmmSurrogate(np.zeros((1, 20)), GaussianNoise.isotropic(20, 4.0))
        est = mc_entropy(s, 10**6, np.random.default_rng(1))
        assert abs(est.value - (20 * H1 + 10 * math.log(4.0))) < 3 * est.std_error

    def test_two_components_vs_cubature(self):
        s = GmmSurrogate([[0.0], [3.0]], GaussianNoise([[1.0]]))
        est = mc_entropy(s, 10**6, np.random.default_rng(2))
        ref = mobius_entropy(s, default_rule("cubature", 1, 2**16), np.random.default_rng(3))
        assert abs(est.value - ref.value) < 3 * est.std_error

    def test_needs_two_samples(self):
        s = GmmSurrogate([[0.0]], GaussianNoise([[1.0]]))
        with pytest.raises(ValueError):
            mc_entropy(s, 1, np.random.default_rng(0))

    def test_std_error_rate(self):
        s = GmmSurrogate([[0.0], [2.0], [5.0]], GaussianNoise([[1.0]]))
        ns = [2**k for k in range(8, 17)]
        se = [mc_entropy(s, n, np.random.default_rng(n)).std_error for n in ns]
        slope = np.polyfit(np.log(ns), np.log(se), 1)[0]
        assert abs(slope + 0.5) < 0.05

    def test_translation_same_seed(self):
        s = GmmSurrogate([[0.0, 1.0], [2.0, -1.0]], GaussianNoise(np.diag([0.5, 1.5])))
        a = mc_entropy(s, 4096, np.random.default_rng(4)).value
        b = mc_entropy(s.translated([3.0, -7.0]), 4096, np.random.default_rng(4)).value
        assert b == pytest.approx(a, abs=1e-10)


class TestMobiusEntropy:
    def test_standard_normal(self):
        s = GmmSurrogate([[0.0]], GaussianNoise([[1.0]]))
        est = mobius_entropy(s, default_rule("cubature", 1, 2**12), np.random.default_rng(0))
        assert est.method == "mobius_cubature" and est.std_error is None
        assert est.value == pytest.approx(H1, abs=1e-5)

    def test_three_dim(self):
        s = GmmSurrogate(np.zeros((1, 3)), GaussianNoise.isotropic(3, 0.1))
        est = mobius_entropy(s, default_rule("cubature", 3, 2**14), np.random.default_rng(1))
        assert est.value == pytest.approx(3 * H1 + 0.5 * math.log(0.1**3), abs=1e-4)

    def test_unstandardized_three_dim(self):
        s = GmmSurrogate(np.zeros((1, 3)), GaussianNoise.isotropic(3, 0.1))
        est = mobius_entropy(s, default_rule("cubature", 3, 2**14), np.random.default_rng(1),
                             standardize=False)
        assert est.value == pytest.approx(3 * H1 + 0.5 * math.log(0.1**3), abs=1e-4)

    def test_vs_trapezoid(self):
        rng = np.random.default_rng(12)
        s = GmmSurrogate(rng.normal(0, 2, (4, 1)), GaussianNoise([[0.6]]))
        est = mobius_entropy(s, default_rule("cubature", 1, 2**14), rng)
        assert est.value == pytest.approx(trapezoid_entropy(s), abs=1e-6)

    def test_translation(self):
        s = GmmSurrogate([[0.0, 1.0], [2.0, -1.0]], GaussianNoise(np.diag([0.5, 1.5])))
        rule = default_rule("cubature", 2, 2**12).with_shift([0.3, 0.6])
        a = mobius_entropy(s, rule).value
        b = mobius_entropy(s.translated([30.0, -70.0]), rule).value
        assert b == pytest.approx(a, abs=1e-9)

    def test_dimension_mismatch(self):
        s = GmmSurrogate([[0.0]], GaussianNoise([[1.0]]))
        with pytest.raises(ValueError):
            mobius_entropy(s, default_rule("cubature", 2, 16))


class TestGaussLattice:
    def test_exact_for_single_gaussian(self):
        s = GmmSurrogate(np.zeros((1, 4)), GaussianNoise(np.diag([1.0, 2.0, 0.5, 3.0])))
        est = gauss_lattice_entropy(s, default_rule("cubature", 4, 64), np.random.default_rng(0))
        assert est.value == pytest.approx(gaussian_entropy(s.noise), abs=1e-12)

    def test_agrees_with_mobius_low_dim(self):
        rng = np.random.default_rng(4)
        s = GmmSurrogate(rng.normal(0, 0.7, (8, 2)), GaussianNoise(np.diag([0.5, 0.3])))
        a = gauss_lattice_entropy(s, default_rule("cubature", 2, 2**16), rng).value
        b = mobius_entropy(s, default_rule("cubature", 2, 2**16), rng).value
        # shift-to-shift spread of the inverse-CDF rule is ~6e-6 here
        assert a == pytest.approx(b, abs=3e-5)

    def test_agrees_with_mc_high_dim(self):
        model = build_deconvolution()
        rng = np.random.default_rng(5)
        s = GmmSurrogate(rng.normal(0, 10, (32, 20)) @ model.matrix.T, model.noise())
        a = gauss_lattice_entropy(s, default_rule("cubature", 20, 2**14), rng).value
        mc = mc_entropy(s, 2**17, rng)
        assert abs(a - mc.value) < 4 * mc.std_error

    def test_bounded_by_moment_matched_gaussian(self):
        rng = np.random.default_rng(6)
        s = GmmSurrogate(rng.normal(0, 3, (5, 3)), GaussianNoise(np.eye(3)))
        est = gauss_lattice_entropy(s, default_rule("cubature", 3, 2**12), rng)
        _, cov = s.moments()
        upper = 3 * H1 + 0.5 * np.linalg.slogdet(cov)[1]
        assert est.value <= upper

    def test_rejects_tent(self):
        s = GmmSurrogate([[0.0]], GaussianNoise([[1.0]]))
        with pytest.raises(ValueError):
            gauss_lattice_entropy(s, default_rule("cubature", 1, 16, "tent"))


def _integrate_2d(f, lim):
    val, _ = integrate.nquad(lambda a, b: f(np.array([a, b])), [[-lim, lim], [-lim, lim]],
                             opts={"epsabs": 1e-11, "epsrel": 1e-11, "limit": 200})
    return val


def test_analytic_entropies_by_quadrature():
    """Brute-force -int p log p for Gaussians in d = 1, 2."""
    rng = np.random.default_rng(21)
    for _ in range(4):
        var = rng.uniform(0.2, 3.0)
        f = lambda y: (-(lp := -0.5 * math.log(2 * math.pi * var) - 0.5 * y * y / var)
                       * math.exp(lp))
        num, _ = integrate.quad(f, -np.inf, np.inf, epsabs=1e-12, epsrel=1e-12)
        assert gaussian_entropy(GaussianNoise([[var]])) == pytest.approx(num, abs=1e-6)
    for _ in range(2):
        a = rng.normal(size=(2, 2))
        cov = a @ a.T + 0.5 * np.eye(2)
        inv, (_, logdet) = np.linalg.inv(cov), np.linalg.slogdet(cov)
        lim = 12 * math.sqrt(cov.max())

        def f2(y):
            lp = -math.log(2 * math.pi) - 0.5 * logdet - 0.5 * y @ inv @ y
            return -lp * math.exp(lp)

        assert gaussian_entropy(GaussianNoise(cov)) == pytest.approx(_integrate_2d(f2, lim),
                                                                     abs=1e-6)
