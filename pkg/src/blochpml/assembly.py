"""P1 finite element assembly for the quasi-periodic cell problems.

The weak form of the shifted Helmholtz problem in the cell splits into
alpha-independent pieces

    <A1 u, v> = int grad u . grad conj(v) - k^2 n u conj(v)
    <A2 u, v> = -2i int (d u / d x1) conj(v)
    <A3 u, v> = int u conj(v)
    <B_j u, v> = -2 pi i  u^(j) conj(v^(j))

so that D(alpha) = A1 + alpha A2 + alpha^2 A3 + sum_j c_j(alpha) B_j is cheap to
form for every quadrature node alpha. The B_j only touch the degrees of
freedom on the line x2 = H and are added as one dense block.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .errors import SupportViolation
from .geometry import CellMesh, fourier_matrix
from .numerics import PmlProfile, Wavenumber, _kval, beta, coth_factor

# number of times each expensive assembly routine ran, for reuse checks
ASSEMBLY_COUNTS: Counter = Counter()


@dataclass(frozen=True, eq=False)
class ElementData:
    """Local P1 matrices for every triangle, shape (T, 3, 3)."""

    rows: np.ndarray
    cols: np.ndarray
    area: np.ndarray
    centroid: np.ndarray
    K11: np.ndarray   # int d1 phi_b d1 phi_a
    K22: np.ndarray   # int d2 phi_b d2 phi_a
    M: np.ndarray     # int phi_b phi_a
    C: np.ndarray     # int (d1 phi_b) phi_a


@lru_cache(maxsize=16)
def element_data(mesh: CellMesh) -> ElementData:
    tri = mesh.triangles
    p = mesh.vertices[tri]
    area = mesh.areas()
    # gradients of the barycentric coordinates
    x, y = p[:, :, 0], p[:, :, 1]
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    gx = gx / (2 * area[:, None])
    gy = gy / (2 * area[:, None])
    K11 = area[:, None, None] * gx[:, :, None] * gx[:, None, :]
    K22 = area[:, None, None] * gy[:, :, None] * gy[:, None, :]
    M = area[:, None, None] / 12 * (np.ones((3, 3)) + np.eye(3))
    C = np.broadcast_to(area[:, None, None] / 3, (len(tri), 3, 3)) * gx[:, None, :]
    rows = np.repeat(tri, 3, axis=1)
    cols = np.tile(tri, (1, 3))
    return ElementData(rows, cols, area, p.mean(axis=1), K11, K22, M, np.ascontiguousarray(C))


def _global(ed: ElementData, local, n):
    return sp.coo_matrix((np.asarray(local).ravel(), (ed.rows.ravel(), ed.cols.ravel())),
                         shape=(n, n)).tocsr()


@dataclass(frozen=True, eq=False)
class DofMap:
    """Free degrees of freedom of a mesh.

    Dirichlet vertices (the surface row, and the top row when the top is
    Dirichlet) get no dof; the right column shares dofs with the left column.
    ``P`` is the (n_vertices x n_dofs) prolongation, so dof vectors map to
    vertex values by ``P @ x`` and vertex matrices restrict by ``P.T @ K @ P``.
    """

    mesh: CellMesh
    vertex_dof: np.ndarray
    P: sp.csr_matrix
    H_dofs: np.ndarray
    dirichlet_top: bool

    @property
    def n(self) -> int:
        return self.P.shape[1]

    def restrict(self, K):
        return (self.P.T @ K @ self.P).tocsc()

    def to_vertices(self, x):
        return self.P @ x


@lru_cache(maxsize=16)
def dof_map(mesh: CellMesh, dirichlet_top: bool = False) -> DofMap:
    nr = mesh.nrows + 1
    i, r = np.meshgrid(np.arange(mesh.n1 + 1), np.arange(nr), indexing="ij")
    i, r = i.ravel(), r.ravel()
    free = r > 0
    if dirichlet_top:
        free &= r < mesh.nrows
    owner = np.where(i == mesh.n1, 0, i) * nr + r
    unique = np.unique(owner[free])
    lookup = -np.ones(len(i), dtype=np.int64)
    lookup[unique] = np.arange(len(unique))
    vertex_dof = np.where(free, lookup[owner], -1)
    vids = np.nonzero(free)[0]
    P = sp.csr_matrix((np.ones(len(vids)), (vids, vertex_dof[vids])),
                      shape=(len(i), len(unique)))
    return DofMap(mesh, vertex_dof, P, vertex_dof[mesh.H_row], dirichlet_top)


@dataclass(eq=False)
class OperatorBlocks:
    """alpha-independent operators on the free dofs of a cell mesh."""

    mesh: CellMesh
    dofs: DofMap
    k: Wavenumber
    A1: sp.csc_matrix
    A2: sp.csc_matrix
    A3: sp.csc_matrix
    _fourier: dict = field(default_factory=dict, repr=False)

    def fourier(self, j_range: int) -> np.ndarray:
        """(2 j_range + 1, n_H) matrix taking H-row dof values to u^(j)."""
        if j_range not in self._fourier:
            from .geometry import trace_fourier_coeffs
            # raises on aliasing
            trace_fourier_coeffs(self.mesh, np.zeros(self.mesh.n1), j_range)
            self._fourier[j_range] = fourier_matrix(self.mesh.n1, j_range)
        return self._fourier[j_range]

    def B(self, j: int, j_range: Optional[int] = None) -> sp.csr_matrix:
        """Rank-one matrix of <B_j u, v> = -2 pi i u^(j) conj(v^(j))."""
        J = abs(j) if j_range is None else j_range
        e = np.zeros(self.dofs.n, dtype=complex)
        e[self.dofs.H_dofs] = self.fourier(J)[j + J]
        return sp.csr_matrix(-2j * np.pi * np.outer(e.conj(), e))


def assemble_blocks(mesh: CellMesh, k: Wavenumber,
                    n_index: Optional[Callable] = None) -> OperatorBlocks:
    """Assemble A1, A2, A3 on ``mesh`` (surface Dirichlet, x1-periodic).

    ``n_index(x1, x2)`` is a refractive index sampled at triangle centroids;
    it defaults to 1.
    """
    ASSEMBLY_COUNTS["blocks"] += 1
    ed = element_data(mesh)
    nv = len(mesh.vertices)
    dm = dof_map(mesh, False)
    kk = _kval(k) ** 2
    if n_index is None:
        mass_k = kk * ed.M
    else:
        nval = np.asarray(n_index(ed.centroid[:, 0], ed.centroid[:, 1]), dtype=float)
        mass_k = kk * nval[:, None, None] * ed.M
    A1 = dm.restrict(_global(ed, ed.K11 + ed.K22 - mass_k, nv)).astype(complex)
    A2 = dm.restrict(_global(ed, -2j * ed.C, nv))
    A3 = dm.restrict(_global(ed, ed.M, nv)).astype(complex)
    return OperatorBlocks(mesh, dm, k, A1, A2, A3)


def dtn_coefficients(alpha, k, j_range: int, sigma=None) -> np.ndarray:
    """c_j = beta_j(alpha), times coth(-i beta_j sigma) when ``sigma`` is given."""
    j = np.arange(-j_range, j_range + 1)
    c = beta(alpha, j, k)
    if sigma is not None:
        c = c * coth_factor(alpha, j, k, sigma)
    return c


def assemble_D(blocks: OperatorBlocks, alpha, k=None, j_range: int = 40,
               sigma=None) -> sp.csc_matrix:
    """D(alpha), or the PML-DtN operator D_sigma(alpha) when ``sigma`` is given."""
    k = blocks.k if k is None else k
    alpha = complex(alpha)
    F = blocks.fourier(j_range)
    c = dtn_coefficients(alpha, k, j_range, sigma)
    top = -2j * np.pi * (F.conj().T * c) @ F
    idx = blocks.dofs.H_dofs
    n = blocks.dofs.n
    ii, jj = np.meshgrid(idx, idx, indexing="ij")
    T = sp.coo_matrix((top.ravel(), (ii.ravel(), jj.ravel())), shape=(n, n))
    D = blocks.A1 + alpha * blocks.A2 + alpha ** 2 * blocks.A3 + T
    return D.tocsc()


# --------------------------------------------------------------------------
# sources and loads

@dataclass(frozen=True)
class SourceTerm:
    """Right-hand side f of the Helmholtz equation.

    ``evaluator(x1, x2)`` must accept arrays. A localized source declares its
    ``center`` and ``support_radius``; ``periodic=True`` marks sources that
    fill the whole cell width (used for modal test problems).
    """

    evaluator: Callable
    center: Optional[tuple] = None
    support_radius: Optional[float] = None
    periodic: bool = False

    def __call__(self, x1, x2):
        return np.asarray(self.evaluator(x1, x2), dtype=complex)


def zero_source() -> SourceTerm:
    return SourceTerm(lambda x1, x2: np.zeros(np.shape(x1), dtype=complex), periodic=True)


class LoadAssembler:
    """Load vectors -int e^{-i alpha x1} f conj(phi) for many alpha.

    f is sampled once at the three edge midpoints of every triangle; each
    call only applies the alpha-dependent phase.
    """

    def __init__(self, mesh: CellMesh, f: SourceTerm, dirichlet_top: bool = False):
        self.mesh = mesh
        self.dirichlet_top = dirichlet_top
        ed = element_data(mesh)
        p = mesh.vertices[mesh.triangles]
        mids = np.stack([(p[:, 0] + p[:, 1]) / 2, (p[:, 1] + p[:, 2]) / 2,
                         (p[:, 2] + p[:, 0]) / 2], axis=1)
        self.x1 = mids[..., 0]
        fv = f(mids[..., 0], mids[..., 1])
        self._check_support(f, mids, fv)
        # basis values at midpoints: phi_a(m_q) = 1/2 if a on edge q
        phi = np.array([[0.5, 0.0, 0.5], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5]])  # [a, q]
        self.fw = fv * (ed.area[:, None] / 3)
        self.phi = phi
        self.tri = mesh.triangles
        self.nonzero = np.any(fv != 0)
        self.mask = self._dirichlet_mask()

    def _dirichlet_mask(self):
        r = np.arange(len(self.mesh.vertices)) % (self.mesh.nrows + 1)
        mask = r == 0
        if self.dirichlet_top:
            mask |= r == self.mesh.nrows
        return mask

    def _check_support(self, f, mids, fv):
        nz = np.abs(fv) > 0
        if not np.any(nz):
            return
        x1, x2 = mids[..., 0], mids[..., 1]
        if np.any(nz & (x2 >= self.mesh.H)):
            raise SupportViolation("source is nonzero at or above x2 = H")
        if not f.periodic:
            margin = self.mesh.dx1 / 2
            if np.any(nz & (np.abs(x1) > np.pi - margin)):
                raise SupportViolation("source support reaches the cell's lateral boundary")

    def __call__(self, alpha) -> np.ndarray:
        nv = len(self.mesh.vertices)
        if not self.nonzero:
            return np.zeros(nv, dtype=complex)
        g = -self.fw * np.exp(-1j * complex(alpha) * self.x1)   # (T, q)
        local = g @ self.phi.T                                   # (T, a)
        b = np.bincount(self.tri.ravel(), weights=local.real.ravel(), minlength=nv) \
            + 1j * np.bincount(self.tri.ravel(), weights=local.imag.ravel(), minlength=nv)
        b[self.mask] = 0
        return b


def assemble_rhs(mesh: CellMesh, f: SourceTerm, alpha, dirichlet_top: bool = False):
    """Vertex load vector with zeroed Dirichlet rows."""
    return LoadAssembler(mesh, f, dirichlet_top)(alpha)


# --------------------------------------------------------------------------
# PML layer

def assemble_pml_layer(mesh_ext: CellMesh, alpha, k, profile: PmlProfile) -> sp.csc_matrix:
    """Weak form of the stretched operator on the cell plus the PML band.

    int (1/s) d2u d2v + s d1u d1v - 2i alpha s (d1 u) v - (k^2 - alpha^2) s u v,
    with s = 1 + rho chi ((x2 - H)/thickness)^m sampled at triangle centroids,
    Dirichlet on the surface and on the top of the layer.
    """
    ASSEMBLY_COUNTS["pml_layer"] += 1
    alpha = complex(alpha)
    ed = element_data(mesh_ext)
    s = profile.s(ed.centroid[:, 1], mesh_ext.H)[:, None, None]
    kk = _kval(k) ** 2
    local = ed.K22 / s + s * ed.K11 - 2j * alpha * s * ed.C - (kk - alpha ** 2) * s * ed.M
    dm = dof_map(mesh_ext, True)
    return dm.restrict(_global(ed, local, len(mesh_ext.vertices)))
