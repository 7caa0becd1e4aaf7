"""Inverse Floquet-Bloch transform over straight or deformed contours."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BlochPMLError, MismatchedPoints
from .numerics import Contour, contour_quadrature


@dataclass(frozen=True, eq=False)
class FieldOnSet:
    points: np.ndarray
    values: np.ndarray
    provenance: dict = field(default_factory=dict)

    def write_csv(self, path, sidecar: bool = True) -> None:
        from .cellsolve import write_field_csv
        write_field_csv(path, self.points, self.values)
        if sidecar:
            write_provenance(str(path) + ".prov", self.provenance)


def write_provenance(path, prov: dict) -> None:
    """``key = value`` sidecar, sorted by key."""
    with open(path, "w") as fh:
        for key in sorted(prov):
            fh.write(f"{key} = {prov[key]}\n")


def line_points(x2: float = 2.4, n: int = 257) -> np.ndarray:
    """n uniform points on [-pi, pi] x {x2}."""
    x1 = np.linspace(-np.pi, np.pi, n)
    return np.column_stack([x1, np.full(n, x2)])


def reconstruct(problem, contour: Contour, n_per_piece, points,
                return_solutions: bool = False):
    """u(x) = sum_q weight_q exp(i alpha_q x1) w(alpha_q, x).

    ``problem`` is a :class:`CellProblem` (anything with ``solve(alpha)``).
    Points must lie in the meshed cell below x2 = H. The weighted sum runs
    in node order.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if np.any(pts[:, 1] >= problem.mesh.H):
        raise ValueError("evaluation points must lie below x2 = H")
    nodes, weights = contour_quadrature(contour, n_per_piece)
    tri, lam = problem.mesh.locate(pts)
    corner = problem.mesh.triangles[tri]
    total = np.zeros(len(pts), dtype=complex)
    sols = []
    for alpha, wq in zip(nodes, weights):
        try:
            sol = problem.solve(alpha)
        except BlochPMLError as exc:
            raise type(exc)(f"{exc} [quadrature node alpha={alpha}]") from exc
        w = np.sum(sol.nodal[corner] * lam, axis=1)
        total += wq * np.exp(1j * alpha * pts[:, 0]) * w
        if return_solutions:
            sols.append(sol)
    prov = dict(problem.describe())
    prov.update(contour=contour.describe(), n_nodes=len(nodes),
                n_per_piece=n_per_piece if np.ndim(n_per_piece) == 0 else list(n_per_piece))
    result = FieldOnSet(pts, total, prov)
    return (result, sols) if return_solutions else result


def _trapezoid_norm2(points, values):
    pts = np.asarray(points)
    seg = np.hypot(*np.diff(pts, axis=0).T)
    v2 = np.abs(values) ** 2
    return float(np.sum(seg * (v2[:-1] + v2[1:]) / 2))


def relative_error(a: FieldOnSet, b: FieldOnSet) -> float:
    """||a - b|| / ||b|| in L2 over the ordered point set (trapezoid rule)."""
    if a.points.shape != b.points.shape or not np.allclose(a.points, b.points, atol=1e-12):
        raise MismatchedPoints("fields are sampled on different point sets")
    num = _trapezoid_norm2(a.points, a.values - b.values)
    den = _trapezoid_norm2(b.points, b.values)
    return float(np.sqrt(num / den))
