"""Closed-form cell solutions above a flat surface x2 = c.

For right-hand sides of the form sum_j e^{i j x1} g_j(x2) the quasi-periodic
cell problem decouples into the two-point problems

    v'' + beta^2 v = g  on (c, H),   v(c) = 0,   v'(H) = i beta v(H),

solved with the Green's function G(x, y) = -u1(min) u2(max) / beta where
u1(t) = sin(beta (t - c)) and u2(t) = exp(i beta (t - c)).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import CutoffMode
from .numerics import beta as beta_symbol


@dataclass(frozen=True)
class ModalProblem:
    k: object
    alpha: complex
    j: int
    c: float
    H: float
    g: Callable
    # optional breakpoints of g (e.g. ends of its support) to help quadrature
    breaks: tuple = ()

    def __post_init__(self):
        if not self.c < self.H:
            raise ValueError("need c < H")

    @property
    def beta(self) -> complex:
        return complex(beta_symbol(self.alpha, self.j, self.k))


def green(p: ModalProblem, x, y):
    b = p.beta
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    return -np.sin(b * (lo - p.c)) * np.exp(1j * b * (hi - p.c)) / b


def _cquad(fun, a, b):
    if b <= a:
        return 0j
    val, _ = integrate.quad(fun, a, b, complex_func=True, epsabs=1e-14,
                            epsrel=1e-12, limit=200)
    return val


def flat_modal_solution(p: ModalProblem, x2):
    """v(x2) for every entry of ``x2`` (scalar or array in [c, H])."""
    b = p.beta
    if abs(b) < 1e-10:
        raise CutoffMode(f"beta_{p.j}({p.alpha}) = 0: cutoff mode")
    x = np.atleast_1d(np.asarray(x2, dtype=float))
    if np.any(x < p.c - 1e-12) or np.any(x > p.H + 1e-12):
        raise ValueError("x2 outside [c, H]")
    u1 = lambda t: np.sin(b * (t - p.c))
    u2 = lambda t: np.exp(1j * b * (t - p.c))
    grid = np.unique(np.concatenate([[p.c, p.H], np.clip(x, p.c, p.H),
                                     [t for t in p.breaks if p.c < t < p.H]]))
    lower = np.array([_cquad(lambda t: u1(t) * p.g(t), a, bb)
                      for a, bb in zip(grid[:-1], grid[1:])])
    upper = np.array([_cquad(lambda t: u2(t) * p.g(t), a, bb)
                      for a, bb in zip(grid[:-1], grid[1:])])
    # int_c^x u1 g  and  int_x^H u2 g  at every grid point
    I1 = np.concatenate([[0], np.cumsum(lower)])
    I2 = np.concatenate([np.cumsum(upper[::-1])[::-1], [0]])
    idx = np.searchsorted(grid, np.clip(x, p.c, p.H))
    v = -(u2(x) * I1[idx] + u1(x) * I2[idx]) / b
    return v[0] if np.ndim(x2) == 0 else v


def flat_cell_oracle(k, alpha, modes: dict, c: float, H: float, points,
                     breaks: tuple = ()) -> np.ndarray:
    """w(alpha, x) for the cell right-hand side sum_j e^{i j x1} g_j(x2).

    ``modes`` maps j to the profile g_j.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x1, x2 = pts[:, 0], pts[:, 1]
    ux, inv = np.unique(x2, return_inverse=True)
    out = np.zeros(len(pts), dtype=complex)
    for j in sorted(modes):
        p = ModalProblem(k, complex(alpha), int(j), c, H, modes[j], breaks)
        v = np.atleast_1d(flat_modal_solution(p, ux))
        out += np.exp(1j * j * x1) * v[inv]
    return out


def bump(a: float, b: float, power: int = 4, amplitude: float = 1.0):
    """Polynomial bump ((t - a)(b - t))^power scaled to peak ``amplitude``."""
    peak = ((b - a) / 2) ** (2 * power)

    def g(t):
        t = np.asarray(t, dtype=float)
        return np.where((t > a) & (t < b), amplitude * ((t - a) * (b - t)) ** power / peak, 0.0)

    return g
