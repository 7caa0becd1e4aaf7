import numpy as np
import pytest

from blochpml.errors import CutoffMode
from blochpml.numerics import decompose_wavenumber
from blochpml.oracle import ModalProblem, bump, flat_cell_oracle, flat_modal_solution, green

K = decompose_wavenumber(1.2)
G = bump(1.3, 2.2)


def modal(j=1, alpha=0.1, g=G):
    return ModalProblem(K, alpha, j, 1.0, 2.5, g, (1.3, 2.2))


def test_zero_source():
    p = modal(g=lambda t: np.zeros_like(np.asarray(t, dtype=float)))
    assert not np.any(flat_modal_solution(p, np.linspace(1, 2.5, 11)))


@pytest.mark.parametrize("j, alpha", [(0, 0.1), (1, 0.1), (2, 0.1), (-3, 0.2 + 0.05j)])
def test_ode_residual(j, alpha):
    p = modal(j, alpha)
    b = p.beta
    x = np.linspace(1.05, 2.45, 41)
    # fourth-order stencil; a wider step keeps quadrature noise from being
    # amplified by 1/h^2
    h = 1e-2
    v = lambda t: flat_modal_solution(p, t)
    d2 = (-v(x + 2 * h) + 16 * v(x + h) - 30 * v(x) + 16 * v(x - h) - v(x - 2 * h)) / (12 * h ** 2)
    assert np.max(np.abs(d2 + b ** 2 * v(x) - G(x))) < 1e-6


@pytest.mark.parametrize("j, alpha", [(0, 0.1), (1, 0.1), (3, 0.1)])
def test_boundary_conditions(j, alpha):
    p = modal(j, alpha)
    assert flat_modal_solution(p, 1.0) == 0
    h = 1e-3
    f = flat_modal_solution(p, 2.5 - h * np.arange(5))
    # fourth-order one-sided difference at x2 = H
    dv = (25 * f[0] - 48 * f[1] + 36 * f[2] - 16 * f[3] + 3 * f[4]) / (12 * h)
    assert abs(dv - 1j * p.beta * f[0]) < 1e-10


def test_cutoff_mode():
    with pytest.raises(CutoffMode):
        flat_modal_solution(modal(1, 0.2), 2.0)


def test_green_symmetry():
    p = modal(2, 0.1 + 0.03j)
    rng = np.random.default_rng(2)
    x, y = rng.uniform(1, 2.5, (2, 100))
    assert np.max(np.abs(green(p, x, y) - green(p, y, x))) < 1e-13


def test_single_mode_is_fourier_pure():
    x1 = np.linspace(-np.pi, np.pi, 64, endpoint=False)
    pts = np.column_stack([x1, np.full_like(x1, 2.0)])
    w = flat_cell_oracle(K, 0.1, {1: G}, 1.0, 2.5, pts)
    c = np.fft.fft(w) / len(w)
    assert np.max(np.abs(np.delete(c, 1))) < 1e-12 * abs(c[1])
    assert np.allclose(w / np.exp(1j * x1), w[0] / np.exp(1j * x1[0]), atol=1e-14)


def test_linearity():
    g2 = bump(1.1, 1.6)
    pts = np.random.default_rng(3).uniform([-np.pi, 1.0], [np.pi, 2.5], (50, 2))
    both = flat_cell_oracle(K, 0.1, {1: lambda t: G(t) + g2(t)}, 1.0, 2.5, pts, (1.1, 1.3, 1.6, 2.2))
    split = (flat_cell_oracle(K, 0.1, {1: G}, 1.0, 2.5, pts, (1.3, 2.2))
             + flat_cell_oracle(K, 0.1, {1: g2}, 1.0, 2.5, pts, (1.1, 1.6)))
    assert np.max(np.abs(both - split)) < 1e-13 * max(1, np.max(np.abs(both)))
    two = flat_cell_oracle(K, 0.1, {1: G, -2: g2}, 1.0, 2.5, pts, (1.1, 1.3, 1.6, 2.2))
    parts = (flat_cell_oracle(K, 0.1, {1: G}, 1.0, 2.5, pts, (1.1, 1.3, 1.6, 2.2))
             + flat_cell_oracle(K, 0.1, {-2: g2}, 1.0, 2.5, pts, (1.1, 1.3, 1.6, 2.2)))
    assert np.max(np.abs(two - parts)) < 1e-13


def test_evanescent_decay():
    g = bump(1.0, 1.3)
    p = ModalProblem(K, 0.1, 3, 1.0, 2.5, g, (1.3,))
    assert abs(p.beta.real) < 1e-15 and p.beta.imag > 0
    x = np.linspace(1.0, 2.5, 61)
    v = np.abs(flat_modal_solution(p, x))
    assert np.all(v[-1] <= v[x > 1.3] + 1e-15)


def test_c_below_H_required():
    with pytest.raises(ValueError):
        ModalProblem(K, 0.1, 1, 2.5, 2.5, G)
