"""P1 finite elements on a structured triangulation of the unit square.

The mesh has n x n squares, each split along its lower-left to upper-right
diagonal. Nodes are numbered row-major: node ``j * (n + 1) + i`` sits at
``(i / n, j / n)``. Homogeneous Dirichlet conditions are imposed by
eliminating boundary nodes; the interior nodes, again row-major, give a
banded SPD system of half-bandwidth n, solved by banded Cholesky.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._kernels import assemble_band


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    n: int
    nodes: np.ndarray          # ((n+1)^2, 2)
    triangles: np.ndarray      # (2 n^2, 3), counter-clockwise
    boundary_mask: np.ndarray  # ((n+1)^2,)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    def node_index(self, p, tol: float = 1e-12) -> int:
        p = np.asarray(p, dtype=float)
        ij = p * self.n
        rounded = np.rint(ij)
        if np.any(np.abs(ij - rounded) > tol * self.n) or np.any(rounded < 0) or np.any(rounded > self.n):
            raise ValueError(f"point {tuple(p)} is not a mesh node")
        i, j = int(rounded[0]), int(rounded[1])
        return j * (self.n + 1) + i

    def to_csv(self, node_path, triangle_path) -> None:
        with Path(node_path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node", "s1", "s2", "boundary"])
            for k, (s1, s2) in enumerate(self.nodes):
                w.writerow([k, repr(float(s1)), repr(float(s2)), int(self.boundary_mask[k])])
        with Path(triangle_path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["triangle", "v1", "v2", "v3"])
            for t, tri in enumerate(self.triangles):
                w.writerow([t, *map(int, tri)])


def build_mesh(n: int) -> Mesh:
    if n < 1:
        raise ValueError("mesh needs at least one square per side")
    g = np.arange(n + 1) / n
    s1, s2 = np.meshgrid(g, g, indexing="xy")
    nodes = np.column_stack([s1.ravel(), s2.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    i, j = i.ravel(), j.ravel()
    a = j * (n + 1) + i
    b = a + 1
    c = a + n + 2
    d = a + n + 1
    lower = np.column_stack([a, b, c])
    upper = np.column_stack([a, c, d])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper
    idx = np.arange((n + 1) ** 2)
    ii, jj = idx % (n + 1), idx // (n + 1)
    boundary = (ii == 0) | (ii == n) | (jj == 0) | (jj == n)
    for arr in (nodes, triangles, boundary):
        arr.flags.writeable = False
    return Mesh(n, nodes, triangles, boundary)


def _local_stiffness(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Unit-coefficient element matrices (T, 3, 3) and element areas."""
    p = mesh.nodes[mesh.triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    area = 0.5 * det
    # barycentric gradients
    grads = np.empty((len(p), 3, 2))
    grads[:, 1, 0] = e2[:, 1] / det
    grads[:, 1, 1] = -e2[:, 0] / det
    grads[:, 2, 0] = -e1[:, 1] / det
    grads[:, 2, 1] = e1[:, 0] / det
    grads[:, 0] = -grads[:, 1] - grads[:, 2]
    local = area[:, None, None] * np.einsum("tik,tjk->tij", grads, grads)
    return local, area


class PoissonAssembler:
    """Assembly and solve of -div(a grad u) = f, u = 0 on the boundary.

    The element geometry, the interior numbering and the band layout are
    computed once; each solve only rescales element matrices by the
    centroid values of the coefficient.
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        n = mesh.n
        self.free = np.flatnonzero(~mesh.boundary_mask)
        self.n_free = self.free.size
        self.bandwidth = max(n, 1)
        reduced = -np.ones(mesh.nodes.shape[0], dtype=np.int64)
        reduced[self.free] = np.arange(self.n_free)
        self._reduced = reduced
        local, area = _local_stiffness(mesh)
        self.area = area
        tri = reduced[mesh.triangles]
        self._rows = np.repeat(tri, 3, axis=1)
        self._cols = np.tile(tri, (1, 3))
        self._local = local.reshape(len(area), 9).copy()
        self.centroids = mesh.centroids

    def band(self, coef_t: np.ndarray) -> np.ndarray:
        coef_t = np.ascontiguousarray(coef_t, dtype=float)
        band = np.empty((self.bandwidth + 1, self.n_free))
        assemble_band(self.n_free, self.bandwidth, self._rows, self._cols,
                      self._local, coef_t, band)
        return band

    def matrix(self, coef_t: np.ndarray) -> sp.csr_matrix:
        """Reduced stiffness matrix as CSR (for inspection and tests)."""
        mask = (self._rows >= 0) & (self._cols >= 0)
        vals = (coef_t[:, None] * self._local)[mask]
        mat = sp.coo_matrix((vals, (self._rows[mask], self._cols[mask])),
                            shape=(self.n_free, self.n_free))
        return mat.tocsr()

    def load(self, f_t: np.ndarray) -> np.ndarray:
        """One-point load vector on interior nodes from centroid values f_t."""
        contrib = np.repeat((f_t * self.area / 3.0)[:, None], 3, axis=1)
        rhs = np.zeros(self.mesh.nodes.shape[0])
        np.add.at(rhs, self.mesh.triangles, contrib)
        return rhs[self.free]

    def solve(self, coef_t: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        """Interior solution for centroid coefficients ``coef_t``."""
        coef_t = np.asarray(coef_t, dtype=float)
        if np.any(~(coef_t > 0.0)):
            raise ValueError("diffusion coefficient must be positive at every centroid")
        if self.n_free == 0:
            return np.zeros(0)
        band = self.band(coef_t)
        try:
            return scipy.linalg.solveh_banded(band, rhs, lower=False, check_finite=False)
        except np.linalg.LinAlgError:
            pass
        mat = self.matrix(coef_t)
        sol, info = spla.cg(mat, rhs, rtol=1e-10, maxiter=10 * self.n_free)
        if info != 0:
            raise SolverError(f"conjugate gradients did not converge (info={info})")
        return sol

    def expand(self, interior: np.ndarray) -> np.ndarray:
        u = np.zeros(self.mesh.nodes.shape[0])
        u[self.free] = interior
        return u


def solve_poisson(mesh: Mesh, coeff, source) -> np.ndarray:
    """Nodal P1 solution of -div(coeff grad u) = source with u = 0 on the boundary.

    ``coeff`` and ``source`` are vectorised callables of an (T, 2) array of
    points, evaluated at triangle centroids.
    """
    asm = PoissonAssembler(mesh)
    c = asm.centroids
    coef_t = np.broadcast_to(np.asarray(coeff(c), dtype=float), (len(c),))
    f_t = np.broadcast_to(np.asarray(source(c), dtype=float), (len(c),))
    return asm.expand(asm.solve(coef_t, asm.load(f_t)))


def node_value(mesh: Mesh, u: np.ndarray, p) -> float:
    return float(u[mesh.node_index(p)])
