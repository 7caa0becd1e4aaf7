"""Periodic surfaces, boundary-fitted meshes of the periodicity cell, and
Fourier analysis of the trace on the line x2 = H.

The cell is [-pi, pi] x (zeta(x1), H). Meshes are sheared structured grids:
vertex columns sit at uniformly spaced x1, each column runs from the surface to
the top in equal steps. An optional flat layer (the PML region) can be stacked
on top; its rows are uniform in x2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import GeometryError, InsufficientResolution, PointOutsideCell

TWO_PI = 2 * np.pi


class PeriodicSurface:
    """A 2pi-periodic graph x2 = zeta(x1) bounding the domain from below."""

    def __init__(self, zeta: Callable, name: str = "custom"):
        self.zeta = zeta
        self.name = name
        s = np.linspace(-np.pi, np.pi, 4097)
        z = np.asarray(zeta(s), dtype=float)
        self.sup_zeta = self._refine(s, z, -1)
        self.min_zeta = self._refine(s, z, 1)

    def _refine(self, s, z, sign):
        i = int(np.argmin(sign * z))
        lo, hi = s[max(i - 1, 0)], s[min(i + 1, len(s) - 1)]
        res = optimize.minimize_scalar(lambda x: sign * float(self.zeta(x)),
                                       bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12})
        return float(min(sign * z[i], res.fun) * sign)

    def __call__(self, x1):
        return self.zeta(x1)

    def __repr__(self):
        return f"PeriodicSurface({self.name})"


def flat_surface(c: float = 1.0) -> PeriodicSurface:
    return PeriodicSurface(lambda x: np.full(np.shape(x), float(c)), name=f"flat({c:g})")


def grating_surface() -> PeriodicSurface:
    """zeta(x1) = 1.5 + sin(x1)/3 - cos(2 x1)/4."""
    return PeriodicSurface(lambda x: 1.5 + np.sin(x) / 3 - np.cos(2 * x) / 4,
                           name="grating")


SURFACES = {"grating": grating_surface, "flat": flat_surface}


def make_surface(name: str, **params) -> PeriodicSurface:
    try:
        return SURFACES[name](**params)
    except KeyError:
        raise GeometryError(f"unknown surface {name!r}; known: {sorted(SURFACES)}") from None


@dataclass(eq=False)
class CellMesh:
    """Triangulation of one periodicity cell.

    Vertices are stored column by column: vertex ``(i, r)`` (column ``i`` in
    ``0..n1``, row ``r`` in ``0..nrows``) has index ``i * (nrows + 1) + r``.
    Column ``n1`` duplicates column 0 shifted by 2pi. Rows ``0..n2`` follow the
    surface up to ``H``; rows above ``n2`` belong to the optional flat layer.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    tags: np.ndarray
    periodic_pairs: np.ndarray
    n1: int
    n2: int
    n_layer: int
    H: float
    x2_top: float
    h_max: float
    surface: PeriodicSurface = field(repr=False)

    @property
    def nrows(self) -> int:
        return self.n2 + self.n_layer

    @property
    def dx1(self) -> float:
        return TWO_PI / self.n1

    @property
    def n_periodic_vertices(self) -> int:
        """Vertex count after identifying the right column with the left one."""
        return self.n1 * (self.nrows + 1)

    def vid(self, i, r):
        return np.asarray(i) * (self.nrows + 1) + np.asarray(r)

    @property
    def heights(self) -> np.ndarray:
        """(n1 + 1, nrows + 1) array of vertex x2 values."""
        return self.vertices[:, 1].reshape(self.n1 + 1, self.nrows + 1)

    def row(self, r: int, periodic: bool = True) -> np.ndarray:
        """Vertex indices of row ``r`` (without the duplicate right vertex)."""
        cols = np.arange(self.n1 if periodic else self.n1 + 1)
        return self.vid(cols, r)

    @property
    def bottom(self):
        return self.row(0, periodic=False)

    @property
    def top(self):
        return self.row(self.nrows, periodic=False)

    @property
    def H_row(self):
        """Unique vertices on the line x2 = H, ordered by x1."""
        return self.row(self.n2)

    def tagged(self, label: str) -> np.ndarray:
        return self.edges[self.tags == label]

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def restrict_to_H(self) -> "CellMesh":
        """The sub-mesh below x2 = H (identical vertices, renumbered)."""
        if self.n_layer == 0:
            return self
        return _build(self.surface, self.H, self.n1, self.n2, 0, 0.0, self.h_max)

    def sub_vertex_map(self) -> np.ndarray:
        """Indices into this mesh of the vertices of ``restrict_to_H()``."""
        i, r = np.meshgrid(np.arange(self.n1 + 1), np.arange(self.n2 + 1), indexing="ij")
        return self.vid(i.ravel(), r.ravel())

    # ------------------------------------------------------------------
    # point location

    def locate(self, points, tol: float = 1e-10):
        """Triangle index and barycentric coordinates of each point.

        Uses the column structure of the grid, so the cost per point is one
        search over the rows of a single column.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x1, x2 = pts[:, 0], pts[:, 1]
        if np.any(x1 < -np.pi - tol) or np.any(x1 > np.pi + tol):
            raise PointOutsideCell("x1 outside [-pi, pi]")
        u = (x1 + np.pi) / self.dx1
        col = np.clip(np.floor(u).astype(int), 0, self.n1 - 1)
        u = u - col
        Y = self.heights
        yrows = (1 - u)[:, None] * Y[col] + u[:, None] * Y[col + 1]
        below = x2 < yrows[:, 0] - tol
        above = x2 > yrows[:, -1] + tol
        if np.any(below | above):
            bad = pts[below | above][0]
            raise PointOutsideCell(f"point {tuple(bad)} is outside the meshed cell")
        r = np.array([np.searchsorted(yr, y, side="right") - 1 for yr, y in zip(yrows, x2)])
        r = np.clip(r, 0, self.nrows - 1)
        diag = (1 - u) * Y[col, r] + u * Y[col + 1, r + 1]
        q = col * self.nrows + r
        tri = 2 * q + (x2 > diag).astype(int)
        return tri, self.barycentric(tri, pts)

    def barycentric(self, tri, pts):
        p = self.vertices[self.triangles[tri]]
        a, b, c = p[:, 0], p[:, 1], p[:, 2]
        det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])
        l1 = ((pts[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
              - (c[:, 0] - a[:, 0]) * (pts[:, 1] - a[:, 1])) / det
        l2 = ((b[:, 0] - a[:, 0]) * (pts[:, 1] - a[:, 1])
              - (pts[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])) / det
        return np.column_stack([1 - l1 - l2, l1, l2])


def _build(surface, H, n1, n2, n_layer, layer, h_max) -> CellMesh:
    s = np.linspace(-np.pi, np.pi, n1 + 1)
    zeta = np.asarray(surface(s), dtype=float)
    # exact periodic duplicate, also for user surfaces that are periodic only to rounding
    zeta[-1] = zeta[0]
    t = np.arange(n2 + 1) / n2
    X2 = zeta[:, None] + t[None, :] * (H - zeta[:, None])
    X2[:, -1] = H
    if n_layer:
        X2 = np.hstack([X2, H + layer * np.arange(1, n_layer + 1)[None, :] / n_layer
                        * np.ones((n1 + 1, 1))])
    nrows = n2 + n_layer
    X1 = np.repeat(s, nrows + 1).reshape(n1 + 1, nrows + 1)
    vertices = np.column_stack([X1.ravel(), X2.ravel()])

    def vid(i, r):
        return i * (nrows + 1) + r

    i, r = np.meshgrid(np.arange(n1), np.arange(nrows), indexing="ij")
    i, r = i.ravel(), r.ravel()
    a, b, c, d = vid(i, r), vid(i + 1, r), vid(i + 1, r + 1), vid(i, r + 1)
    triangles = np.empty((2 * len(a), 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([a, b, c])
    triangles[1::2] = np.column_stack([a, c, d])

    cols = np.arange(n1)
    rows = np.arange(nrows)
    edges = np.vstack([
        np.column_stack([vid(cols, 0), vid(cols + 1, 0)]),
        np.column_stack([vid(cols, nrows), vid(cols + 1, nrows)]),
        np.column_stack([vid(0, rows), vid(0, rows + 1)]),
        np.column_stack([vid(n1, rows), vid(n1, rows + 1)]),
    ])
    tags = np.array(["bottom"] * n1 + ["top"] * n1 + ["left"] * nrows + ["right"] * nrows)
    all_rows = np.arange(nrows + 1)
    pairs = np.column_stack([vid(0, all_rows), vid(n1, all_rows)])
    return CellMesh(vertices, triangles, edges, tags, pairs, n1, n2, n_layer,
                    float(H), float(X2[0, -1]), float(h_max), surface)


def build_cell_mesh(surface: PeriodicSurface, x2_top: float, h_max: float,
                    layer: float = 0.0) -> CellMesh:
    """Sheared structured triangulation of the cell below ``x2_top``.

    ``n1 = ceil(2pi / h_max)`` columns and ``n2 = ceil((x2_top - min zeta) /
    h_max)`` rows, each quad split along its rising diagonal. With
    ``layer > 0`` a flat band ``[x2_top, x2_top + layer]`` with
    ``ceil(layer / h_max)`` rows is stacked on top; ``H`` stays at ``x2_top``.
    """
    if h_max <= 0:
        raise GeometryError("h_max must be positive")
    if x2_top <= surface.sup_zeta:
        raise GeometryError(
            f"top x2={x2_top} must lie above the surface maximum {surface.sup_zeta:.6g}")
    n1 = math.ceil(TWO_PI / h_max - 1e-9)
    n2 = math.ceil((x2_top - surface.min_zeta) / h_max - 1e-9)
    n_layer = math.ceil(layer / h_max - 1e-9) if layer > 0 else 0
    return _build(surface, x2_top, n1, n2, n_layer, layer, h_max)


def trace_fourier_coeffs(mesh: CellMesh, top_values, j_range: int) -> np.ndarray:
    """Fourier coefficients of the trace on x2 = H for j = -j_range..j_range.

    ``top_values`` holds one value per unique vertex of the H row (``n1``
    values) or per vertex including the duplicate right corner (``n1 + 1``).
    Returns an array indexed by ``j + j_range``.
    """
    v = np.asarray(top_values)
    n = mesh.n1
    if v.shape[0] == n + 1:
        v = v[:n]
    if v.shape[0] != n:
        raise ValueError(f"expected {n} trace values, got {v.shape[0]}")
    if 2 * j_range >= n:
        raise InsufficientResolution(
            f"|j| <= {j_range} needs more than {2 * j_range} trace points, mesh has {n}")
    return fourier_matrix(n, j_range) @ v


def fourier_matrix(n: int, j_range: int) -> np.ndarray:
    """Rows map trace samples at x1 = -pi + 2pi m / n to coefficient j (trapezoid rule)."""
    x = -np.pi + TWO_PI * np.arange(n) / n
    j = np.arange(-j_range, j_range + 1)
    return np.exp(-1j * np.outer(j, x)) / n


def write_mesh(mesh: CellMesh, path) -> None:
    """Plain-text dump: ``v x1 x2`` / ``t i j k`` / ``e i j LABEL`` lines."""
    with open(path, "w") as fh:
        for x1, x2 in mesh.vertices:
            fh.write(f"v {x1:.17g} {x2:.17g}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"t {a} {b} {c}\n")
        for (a, b), lab in zip(mesh.edges, mesh.tags):
            fh.write(f"e {a} {b} {lab}\n")


def read_mesh(path):
    """Parse a dump written by :func:`write_mesh` into plain arrays."""
    verts, tris, edges, tags = [], [], [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append((float(parts[1]), float(parts[2])))
            elif parts[0] == "t":
                tris.append(tuple(int(p) for p in parts[1:4]))
            elif parts[0] == "e":
                edges.append((int(parts[1]), int(parts[2])))
                tags.append(parts[3])
    return np.array(verts), np.array(tris), np.array(edges), np.array(tags)
