import numpy as np
import pytest
from scipy import integrate

from blochpml.errors import GeometryError, InsufficientResolution
from blochpml.geometry import (build_cell_mesh, flat_surface, make_surface, grating_surface,
                               read_mesh, trace_fourier_coeffs, write_mesh)


@pytest.fixture(scope="module")
def wavy():
    return build_cell_mesh(grating_surface(), 2.5, 0.1)


def test_grating_surface_values():
    s = grating_surface()
    x = np.linspace(-np.pi, np.pi, 9)
    assert s(x) == pytest.approx(1.5 + np.sin(x) / 3 - np.cos(2 * x) / 4)
    assert s(x + 2 * np.pi) == pytest.approx(s(x), abs=1e-12)
    fine = s(np.linspace(-np.pi, np.pi, 200001))
    assert s.sup_zeta == pytest.approx(fine.max(), abs=1e-9)
    assert s.min_zeta == pytest.approx(fine.min(), abs=1e-9)


def test_unknown_surface():
    with pytest.raises(GeometryError):
        make_surface("sawtooth")


def test_flat_counts():
    m = build_cell_mesh(flat_surface(0.0), 1.0, 0.5)
    assert (m.n1, m.n2) == (13, 2)
    assert m.n_periodic_vertices == 13 * 3
    # the stored array also keeps the duplicate right column
    assert len(m.vertices) == 14 * 3
    assert len(m.triangles) == 2 * 13 * 2


def test_top_below_surface():
    with pytest.raises(GeometryError):
        build_cell_mesh(grating_surface(), 1.8, 0.1)


def test_area_identity(wavy):
    s = wavy.surface
    exact, _ = integrate.quad(lambda x: 2.5 - s(x), -np.pi, np.pi, epsabs=1e-13)
    # P1 boundary is the chord interpolant of zeta; compare against the polygon
    x = np.linspace(-np.pi, np.pi, wavy.n1 + 1)
    poly = np.trapezoid(2.5 - s(x), x) if hasattr(np, "trapezoid") else np.trapz(2.5 - s(x), x)
    assert wavy.areas().sum() == pytest.approx(poly, abs=1e-10)
    # and the polygon converges to the exact area
    assert abs(poly - exact) < 1e-2


def test_area_identity_flat():
    m = build_cell_mesh(flat_surface(1.0), 2.5, 0.05)
    assert m.areas().sum() == pytest.approx(2 * np.pi * 1.5, abs=1e-8)


def test_orientation_and_nondegenerate(wavy):
    assert np.all(wavy.areas() > 1e-14 * wavy.h_max ** 2)


def test_boundary_vertices(wavy):
    v = wavy.vertices
    assert np.max(np.abs(v[wavy.bottom, 1] - wavy.surface(v[wavy.bottom, 0]))) < 1e-10
    assert np.all(v[wavy.top, 1] == 2.5)


def test_periodic_pairs(wavy):
    left, right = wavy.periodic_pairs.T
    assert len(set(left)) == len(left) == len(set(right))
    assert np.allclose(wavy.vertices[right, 0] - wavy.vertices[left, 0], 2 * np.pi, atol=1e-12)
    assert np.max(np.abs(wavy.vertices[right, 1] - wavy.vertices[left, 1])) < 1e-12


def test_boundary_tags_cover_topological_boundary(wavy):
    tri = wavy.triangles
    e = np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
    uniq, count = np.unique(e, axis=0, return_counts=True)
    boundary = {tuple(x) for x in uniq[count == 1]}
    tagged = [tuple(sorted(x)) for x in wavy.edges]
    assert len(tagged) == len(set(tagged))
    assert set(tagged) == boundary
    assert set(wavy.tags) == {"bottom", "top", "left", "right"}


def test_refinement_quadruples_triangles_flat():
    counts = [len(build_cell_mesh(flat_surface(1.0), 2.5, h).triangles)
              for h in (0.1, 0.05, 0.025)]
    assert counts[1] >= 4 * counts[0] and counts[2] >= 4 * counts[1]


def test_refinement_wavy_loses_at_most_one_row():
    # ceil rounding: n2(h/2) >= 2 n2(h) - 1
    a = build_cell_mesh(grating_surface(), 2.5, 0.1)
    b = build_cell_mesh(grating_surface(), 2.5, 0.05)
    assert b.n1 == 2 * a.n1 and b.n2 >= 2 * a.n2 - 1


def test_layer_mesh_shares_vertices(wavy):
    ext = build_cell_mesh(grating_surface(), 2.5, 0.1, layer=1.5)
    assert ext.H == 2.5 and ext.x2_top == pytest.approx(4.0)
    assert np.array_equal(ext.vertices[ext.sub_vertex_map()], wavy.vertices)
    assert np.array_equal(ext.restrict_to_H().vertices, wavy.vertices)


# trace Fourier coefficients -------------------------------------------------

def test_trace_constant(wavy):
    c = trace_fourier_coeffs(wavy, np.ones(wavy.n1), 10)
    assert c[10] == pytest.approx(1, abs=1e-14)
    assert np.max(np.abs(np.delete(c, 10))) < 1e-14


def test_trace_single_mode(wavy):
    x = wavy.vertices[wavy.H_row, 0]
    c = trace_fourier_coeffs(wavy, np.exp(1j * x), 10)
    assert abs(c[11] - 1) < 1e-13
    assert np.max(np.abs(np.delete(c, 11))) < 1e-13


def test_trace_accepts_duplicate_corner(wavy):
    x = np.linspace(-np.pi, np.pi, wavy.n1 + 1)
    v = np.cos(2 * x)
    assert trace_fourier_coeffs(wavy, v, 5) == pytest.approx(
        trace_fourier_coeffs(wavy, v[:-1], 5), abs=1e-15)


def test_trace_parseval(wavy):
    rng = np.random.default_rng(4)
    v = rng.normal(size=wavy.n1) + 1j * rng.normal(size=wavy.n1)
    J = (wavy.n1 - 1) // 2
    c = trace_fourier_coeffs(wavy, v, J)
    # with 2J + 1 = n1 every discrete mode is captured exactly
    assert np.sum(np.abs(c) ** 2) == pytest.approx(np.mean(np.abs(v) ** 2), rel=1e-12)
    c5 = trace_fourier_coeffs(wavy, v, 5)
    assert np.sum(np.abs(c5) ** 2) <= np.mean(np.abs(v) ** 2)


def test_trace_aliasing(wavy):
    with pytest.raises(InsufficientResolution):
        trace_fourier_coeffs(wavy, np.ones(wavy.n1), (wavy.n1 + 1) // 2)


def test_mesh_roundtrip(tmp_path):
    m = build_cell_mesh(grating_surface(), 2.5, 0.5)
    p = tmp_path / "mesh.txt"
    write_mesh(m, p)
    v, t, e, tags = read_mesh(p)
    assert np.array_equal(np.asarray(v), m.vertices)
    assert np.array_equal(np.asarray(t), m.triangles)
    assert np.array_equal(np.asarray(e), m.edges)
    assert list(tags) == list(m.tags)
    first = p.read_text().splitlines()[0].split()
    assert first[0] == "v" and len(first) == 3
