import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxent.fem import PoissonAssembler, SolverError, build_mesh, node_value, solve_poisson


def manufactured_error(n: int) -> float:
    mesh = build_mesh(n)
    f = lambda s: 2 * math.pi**2 * np.sin(math.pi * s[:, 0]) * np.sin(math.pi * s[:, 1])
    u = solve_poisson(mesh, lambda s: np.ones(len(s)), f)
    exact = np.sin(math.pi * mesh.nodes[:, 0]) * np.sin(math.pi * mesh.nodes[:, 1])
    return float(np.max(np.abs(u - exact)))


class TestMesh:
    @pytest.mark.parametrize("n, nodes, tris", [(64, 4225, 8192), (1, 4, 2), (2, 9, 8)])
    def test_counts(self, n, nodes, tris):
        m = build_mesh(n)
        assert m.nodes.shape == (nodes, 2) and m.triangles.shape == (tris, 3)

    def test_small_boundaries(self):
        assert build_mesh(1).boundary_mask.all()
        m = build_mesh(2)
        assert np.flatnonzero(~m.boundary_mask).tolist() == [4]
        np.testing.assert_array_equal(m.nodes[4], [0.5, 0.5])

    @pytest.mark.parametrize("n", [1, 3, 8])
    def test_orientation_and_boundary(self, n):
        m = build_mesh(n)
        p = m.nodes[m.triangles]
        area = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
        assert np.all(area > 0)
        assert area.sum() == pytest.approx(1.0)
        on_edge = np.any((m.nodes == 0.0) | (m.nodes == 1.0), axis=1)
        np.testing.assert_array_equal(m.boundary_mask, on_edge)

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            build_mesh(0)

    def test_node_lookup(self):
        m = build_mesh(4)
        assert m.node_index((0.0, 0.0)) == 0
        assert m.node_index((0.25, 0.25)) == 6
        with pytest.raises(ValueError, match="not a mesh node"):
            m.node_index((0.3, 0.3))

    def test_csv_dump(self, tmp_path):
        m = build_mesh(2)
        m.to_csv(tmp_path / "n.csv", tmp_path / "t.csv")
        assert len((tmp_path / "n.csv").read_text().splitlines()) == 10
        assert len((tmp_path / "t.csv").read_text().splitlines()) == 9


class TestSolve:
    def test_manufactured_rate(self):
        ns = [8, 16, 32, 64]
        errs = [manufactured_error(n) for n in ns]
        slope = np.polyfit(np.log([1 / n for n in ns]), np.log(errs), 1)[0]
        assert 1.8 <= slope <= 2.2
        assert errs[2] / errs[3] == pytest.approx(4.0, rel=0.05)

    def test_zero_source(self):
        m = build_mesh(8)
        u = solve_poisson(m, lambda s: np.ones(len(s)), lambda s: np.zeros(len(s)))
        assert np.all(u == 0.0)

    def test_constant_scaling(self):
        m = build_mesh(16)
        f = lambda s: 10 * s[:, 0]
        u1 = solve_poisson(m, lambda s: np.ones(len(s)), f)
        u3 = solve_poisson(m, lambda s: np.full(len(s), 3.0), f)
        np.testing.assert_allclose(u3, u1 / 3.0, atol=1e-12)

    def test_maximum_principle(self):
        m = build_mesh(16)
        u = solve_poisson(m, lambda s: np.ones(len(s)), lambda s: 1.0 + s[:, 0] * s[:, 1])
        assert np.all(u >= 0.0)
        assert np.all(u[m.boundary_mask] == 0.0)

    def test_rejects_nonpositive_coefficient(self):
        m = build_mesh(4)
        with pytest.raises(ValueError, match="positive"):
            solve_poisson(m, lambda s: np.where(s[:, 0] > 0.5, -1.0, 1.0), lambda s: s[:, 0])

    def test_cg_fallback(self, monkeypatch):
        import scipy.linalg

        def broken(*args, **kwargs):
            raise np.linalg.LinAlgError("forced")

        m = build_mesh(16)
        f = lambda s: 10 * s[:, 0]
        ref = solve_poisson(m, lambda s: np.ones(len(s)), f)
        monkeypatch.setattr(scipy.linalg, "solveh_banded", broken)
        u = solve_poisson(m, lambda s: np.ones(len(s)), f)
        np.testing.assert_allclose(u, ref, atol=1e-9)

    def test_cg_failure_reported(self, monkeypatch):
        import scipy.linalg
        import scipy.sparse.linalg as spla

        monkeypatch.setattr(scipy.linalg, "solveh_banded",
                            lambda *a, **k: (_ for _ in ()).throw(np.linalg.LinAlgError()))
        monkeypatch.setattr(spla, "cg", lambda *a, **k: (np.zeros(1), 7))
        with pytest.raises(SolverError):
            solve_poisson(build_mesh(4), lambda s: np.ones(len(s)), lambda s: s[:, 0])

    def test_node_value(self):
        m = build_mesh(4)
        u = np.arange(25.0)
        assert node_value(m, u, (0.0, 0.0)) == 0.0
        assert node_value(m, u, (0.25, 0.25)) == 6.0


class TestAssembly:
    def test_symmetric_bitwise_and_band_agrees(self):
        m = build_mesh(8)
        asm = PoissonAssembler(m)
        coef = 1.0 + np.random.default_rng(0).random(len(m.triangles))
        a = asm.matrix(coef).toarray()
        np.testing.assert_array_equal(a, a.T)
        band = asm.band(coef)
        bw = asm.bandwidth
        for j in range(asm.n_free):
            for i in range(max(0, j - bw), j + 1):
                assert band[bw + i - j, j] == pytest.approx(a[i, j], abs=1e-14)
        assert np.all(np.diag(a) > 0)

    def test_triangle_order_independent(self):
        m = build_mesh(6)
        coef = 1.0 + np.random.default_rng(1).random(len(m.triangles))
        asm = PoissonAssembler(m)
        base = asm.matrix(coef).toarray()
        perm = np.random.default_rng(2).permutation(len(m.triangles))
        asm._rows, asm._cols, asm._local = asm._rows[perm], asm._cols[perm], asm._local[perm]
        np.testing.assert_allclose(asm.matrix(coef[perm]).toarray(), base, atol=1e-14)
        np.testing.assert_allclose(asm.band(coef[perm]), PoissonAssembler(m).band(coef),
                                   atol=1e-14)


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 12), st.floats(0.2, 5.0))
def test_spd_for_positive_coefficients(n, scale):
    m = build_mesh(n)
    coef = scale * (0.5 + np.random.default_rng(n).random(len(m.triangles)))
    a = PoissonAssembler(m).matrix(coef).toarray()
    np.linalg.cholesky(a)
