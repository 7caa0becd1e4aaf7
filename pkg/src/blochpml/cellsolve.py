"""Per-alpha cell solves and evaluation of the resulting P1 fields."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import (LoadAssembler, OperatorBlocks, SourceTerm, assemble_blocks,
                       assemble_D, assemble_pml_layer, dof_map)
from .errors import ResidualTooLarge, SingularSystem
from .geometry import CellMesh, build_cell_mesh, trace_fourier_coeffs
from .numerics import PmlProfile, Wavenumber

RESIDUAL_TOL = 1e-10
METHODS = ("exact-dtn", "pml-dtn", "pml-layer")


@dataclass(frozen=True, eq=False)
class CellSolution:
    """Nodal field w(alpha, .) on a cell mesh.

    ``nodal`` has one value per mesh vertex (Dirichlet vertices are 0, the
    right column repeats the left one). ``trace_coeffs[j + j_range]`` is the
    j-th Fourier coefficient of the trace on x2 = H.
    """

    alpha: complex
    nodal: np.ndarray
    mesh: CellMesh
    trace_coeffs: np.ndarray
    j_range: int
    residual: float
    meta: dict = field(default_factory=dict)

    def __call__(self, points):
        return evaluate_field(self, points)


def solve_cell(matrix, rhs, alpha, dofs, j_range: int = 40, meta=None,
               check_residual: bool = True) -> CellSolution:
    """Solve ``matrix @ x = rhs`` with a sparse LU factorization.

    ``rhs`` is either a dof vector or a vertex load vector (restricted here).
    """
    rhs = np.asarray(rhs, dtype=complex)
    if rhs.shape[0] != dofs.n:
        rhs = dofs.P.T @ rhs
    if not np.any(rhs):
        x = np.zeros(dofs.n, dtype=complex)
        res = 0.0
    else:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", spla.MatrixRankWarning)
                lu = spla.splu(matrix.tocsc())
            x = lu.solve(rhs)
        except (RuntimeError, spla.MatrixRankWarning) as exc:
            raise SingularSystem(f"factorization failed at alpha={alpha}: {exc}",
                                 alpha=alpha) from exc
        if not np.all(np.isfinite(x)):
            raise SingularSystem(f"non-finite solution at alpha={alpha}", alpha=alpha)
        res = float(np.linalg.norm(matrix @ x - rhs) / np.linalg.norm(rhs))
        if check_residual and res > RESIDUAL_TOL:
            raise ResidualTooLarge(f"relative residual {res:.3e} at alpha={alpha}",
                                   alpha=alpha, residual=res)
    nodal = dofs.to_vertices(x)
    mesh = dofs.mesh
    n_H = mesh.n1
    J = min(j_range, (n_H - 1) // 2)
    coeffs = trace_fourier_coeffs(mesh, nodal[mesh.H_row], J)
    return CellSolution(complex(alpha), nodal, mesh, coeffs, J, res, dict(meta or {}))


def evaluate_field(solution: CellSolution, points) -> np.ndarray:
    """Barycentric P1 interpolation of the solution at ``points`` (N, 2)."""
    tri, lam = solution.mesh.locate(points)
    vals = solution.nodal[solution.mesh.triangles[tri]]
    return np.sum(vals * lam, axis=1)


def locate_brute_force(mesh: CellMesh, points, tol: float = 1e-12):
    """Reference point location by testing every triangle."""
    pts = np.atleast_2d(points)
    out = np.empty(len(pts), dtype=np.int64)
    allt = np.arange(len(mesh.triangles))
    for n, p in enumerate(pts):
        lam = mesh.barycentric(allt, np.broadcast_to(p, (len(allt), 2)))
        hits = np.nonzero(np.all(lam >= -tol, axis=1))[0]
        out[n] = hits[0] if len(hits) else -1
    return out


class CellProblem:
    """Everything needed to produce w(alpha, .) for arbitrary alpha.

    ``method`` selects the upper boundary treatment: the truncated exact DtN
    map, the PML DtN map (coth-weighted symbols), or an explicitly meshed PML
    band with Dirichlet data on its top.
    """

    def __init__(self, surface, k: Wavenumber, source: SourceTerm, H: float,
                 h_max: float, j_range: int = 40, method: str = "exact-dtn",
                 profile: Optional[PmlProfile] = None, mesh: Optional[CellMesh] = None):
        if method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if method != "exact-dtn" and profile is None:
            raise ValueError(f"method {method!r} needs a PmlProfile")
        self.k = k
        self.method = method
        self.profile = profile
        self.j_range = j_range
        self.source = source
        if method == "pml-layer":
            self.mesh = mesh or build_cell_mesh(surface, H, h_max, layer=profile.thickness)
            self.dofs = dof_map(self.mesh, True)
            self.blocks = None
            self.loads = LoadAssembler(self.mesh, source, dirichlet_top=True)
        else:
            self.mesh = mesh or build_cell_mesh(surface, H, h_max)
            self.blocks = assemble_blocks(self.mesh, k)
            self.dofs = self.blocks.dofs
            self.blocks.fourier(j_range)
            self.loads = LoadAssembler(self.mesh, source)

    @property
    def sigma(self):
        return None if self.method == "exact-dtn" else self.profile.sigma

    def matrix(self, alpha):
        if self.method == "pml-layer":
            return assemble_pml_layer(self.mesh, alpha, self.k, self.profile)
        return assemble_D(self.blocks, alpha, self.k, self.j_range, self.sigma)

    def solve(self, alpha) -> CellSolution:
        A = self.matrix(alpha)
        b = self.loads(alpha)
        return solve_cell(A, b, alpha, self.dofs, self.j_range,
                          meta={"k": self.k.k, "method": self.method,
                                "sigma": self.sigma})

    def describe(self) -> dict:
        d = {"k": self.k.k, "method": self.method, "j_range": self.j_range,
             "H": self.mesh.H, "h_max": self.mesh.h_max, "n1": self.mesh.n1,
             "n2": self.mesh.n2, "surface": self.mesh.surface.name}
        if self.profile is not None:
            p = self.profile
            d.update(thickness=p.thickness, rho=p.rho, chi=p.chi, m=p.m,
                     sigma=p.sigma, tau=p.tau)
        return d


def write_field_csv(path, points, values) -> None:
    """CSV rows ``x1,x2,re,im``."""
    pts = np.atleast_2d(points)
    with open(path, "w") as fh:
        fh.write("x1,x2,re,im\n")
        for (x1, x2), v in zip(pts, np.asarray(values)):
            fh.write(f"{x1:.17g},{x2:.17g},{v.real:.17g},{v.imag:.17g}\n")
