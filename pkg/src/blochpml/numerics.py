"""Scalar complex-branch machinery.

Square root with the cut along the negative imaginary axis, the DtN symbol
``beta_j(alpha) = sqrt(k^2 - (alpha + j)^2)`` built factor-wise, the PML
quantities ``h`` and ``coth(-i beta sigma)``, and the integration contours for
the inverse Floquet-Bloch transform together with their quadrature rules.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateExponent, HalfIntegerWavenumber, InvalidDelta

__all__ = [
    "sqrt_branch", "Wavenumber", "decompose_wavenumber", "cutoff_values",
    "beta", "beta_scalar", "h_func", "coth_factor", "coth_minus_one",
    "PmlProfile", "Segment", "Arc", "Contour", "build_contour",
    "straight_contour", "default_delta", "contour_quadrature", "split_nodes",
]


def sqrt_branch(z):
    """Square root with arg(z) taken in (-pi/2, 3pi/2].

    The cut runs along the negative imaginary axis; points on the cut take the
    value from the left half plane, so sqrt(-1) = i and sqrt(-2i) = -1 + i.
    Works elementwise on arrays.
    """
    z = np.asarray(z, dtype=complex)
    root = np.sqrt(z)
    out = np.where(np.angle(z) <= -np.pi / 2, -root, root)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class Wavenumber:
    """k = kappa + jhat with kappa the rounding error in (-1/2, 1/2)."""

    k: float
    kappa: float
    jhat: int
    # False when built with the half-integer override (kappa = 0 or +-1/2).
    assumption_ok: bool = True

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("wavenumber must be positive")
        if abs(self.kappa + self.jhat - self.k) > 1e-12 * max(1.0, self.k):
            raise ValueError("k != kappa + jhat")

    @property
    def cutoffs(self):
        return cutoff_values(self.k)

    def __float__(self):
        return float(self.k)


def decompose_wavenumber(k: float, tol: float = 1e-9,
                         allow_half_integer: bool = False) -> Wavenumber:
    """Split ``k`` into its nearest integer ``jhat`` and rounding error ``kappa``.

    Raises HalfIntegerWavenumber when k is within ``tol`` of a point of the
    grid n/2, unless ``allow_half_integer`` is set.
    """
    k = float(k)
    if not k > 0:
        raise ValueError(f"wavenumber must be positive, got {k}")
    near_half = abs(2 * k - round(2 * k)) < 2 * tol
    jhat = int(math.floor(k + 0.5))
    kappa = k - jhat
    if near_half:
        if not allow_half_integer:
            raise HalfIntegerWavenumber(
                f"k={k} is a half integer; the cutoff values are not separated")
        return Wavenumber(k, kappa, jhat, assumption_ok=False)
    return Wavenumber(k, kappa, jhat)


def _kval(k) -> float:
    return float(k.k) if isinstance(k, Wavenumber) else float(k)


def cutoff_values(k) -> list[float]:
    """All alpha in [-1/2, 1/2] with |alpha + j| = k for some integer j."""
    k = _kval(k)
    vals = set()
    for sign in (-1.0, 1.0):
        for j in range(int(math.floor(sign * k - 0.5)), int(math.ceil(sign * k + 0.5)) + 1):
            a = sign * k - j
            if -0.5 - 1e-14 <= a <= 0.5 + 1e-14:
                vals.add(round(a, 14))
    return sorted(vals)


def beta_scalar(z, k):
    """sqrt(k^2 - z^2) evaluated as sqrt(k + z) * sqrt(k - z)."""
    kv = _kval(k)
    z = np.asarray(z, dtype=complex)
    return sqrt_branch(kv + z) * sqrt_branch(kv - z)


def beta(alpha, j, k):
    """DtN symbol beta_j(alpha) = G+(alpha, j) G-(alpha, j)."""
    return beta_scalar(np.asarray(alpha, dtype=complex) + np.asarray(j), k)


def h_func(z, k, sigma):
    """h(z) = exp(-2 i sqrt(k^2 - z^2) sigma)."""
    return np.exp(-2j * beta_scalar(z, k) * sigma)


def _two_over_expm1(y):
    # 2 / (e^y - 1) without overflow for Re y >> 0
    y = np.asarray(y, dtype=complex)
    big = y.real > 1.0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        r = np.exp(-np.where(big, y, 0))
        far = 2 * r / (1 - r)
        near = 2 / np.expm1(np.where(big, 0.5, y))
    return np.where(big, far, near)


def coth_minus_one(alpha, j, k, sigma):
    """coth(-i beta_j(alpha) sigma) - 1, i.e. 2 / (h(alpha + j) - 1)."""
    y = -2j * beta(alpha, j, k) * sigma
    with np.errstate(over="ignore", invalid="ignore"):
        hm1 = np.expm1(y)
    if np.any(np.abs(hm1) < 1e-300):
        raise DegenerateExponent(
            f"h(alpha+j) = 1 for sigma={sigma}; choose a slightly different sigma")
    out = _two_over_expm1(y)
    return out[()] if np.ndim(out) == 0 else out


def coth_factor(alpha, j, k, sigma):
    """coth(-i beta_j(alpha) sigma) computed as 1 + 2 / (h - 1)."""
    return 1 + coth_minus_one(alpha, j, k, sigma)


@dataclass(frozen=True)
class PmlProfile:
    """Polynomial PML s(x2) = 1 + rho * chi * ((x2 - H) / thickness)^m above H."""

    thickness: float
    rho: float
    chi: complex = complex(np.exp(1j * np.pi / 4))
    m: int = 2

    def __post_init__(self):
        if self.thickness <= 0:
            raise ValueError("PML thickness must be positive")
        if self.rho < 0:
            raise ValueError("rho must be non-negative")
        if not (self.chi.real > 0 and self.chi.imag > 0):
            raise ValueError("chi must have positive real and imaginary parts")
        if abs(abs(self.chi) - 1) > 1e-12:
            raise ValueError("chi must have unit modulus")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")

    @property
    def sigma(self) -> complex:
        return self.thickness * (1 + self.rho * self.chi / (self.m + 1))

    @property
    def tau(self) -> float:
        s = self.sigma
        return math.atan2(s.imag, s.real)

    @property
    def tau_in_assumed_range(self) -> bool:
        """Whether tau lies in (pi/8, (pi - arctan 2) / 2)."""
        return math.pi / 8 < self.tau < (math.pi - math.atan(2)) / 2

    def s(self, x2, H):
        t = np.clip((np.asarray(x2, dtype=float) - H) / self.thickness, 0.0, None)
        return 1 + self.rho * self.chi * t ** self.m


# --------------------------------------------------------------------------
# contours

@dataclass(frozen=True)
class Segment:
    start: float
    end: float

    def point(self, t):
        return self.start + (self.end - self.start) * np.asarray(t)

    def derivative(self, t):
        return np.full(np.shape(t), self.end - self.start, dtype=complex)

    @property
    def endpoints(self):
        return complex(self.start), complex(self.end)

    def describe(self):
        return f"segment[{self.start:.17g},{self.end:.17g}]"


@dataclass(frozen=True)
class Arc:
    """Half circle of radius ``radius`` around ``center`` traversed left to right.

    ``upper=True`` bulges into the upper half plane (clockwise), otherwise into
    the lower half plane (counter-clockwise).
    """

    center: float
    radius: float
    upper: bool

    def _phase(self, t):
        s = np.pi * np.asarray(t)
        return np.exp(1j * (np.pi - s)) if self.upper else np.exp(1j * (np.pi + s))

    def point(self, t):
        return self.center + self.radius * self._phase(t)

    def derivative(self, t):
        d = -1j if self.upper else 1j
        return d * np.pi * self.radius * self._phase(t)

    @property
    def endpoints(self):
        return complex(self.center - self.radius), complex(self.center + self.radius)

    def describe(self):
        side = "upper" if self.upper else "lower"
        return f"arc[{side},c={self.center:.17g},r={self.radius:.17g}]"


@dataclass(frozen=True)
class Contour:
    """Integration path from -1/2 to 1/2 made of segments and half circles."""

    pieces: tuple
    delta: float = 0.0
    kind: str = "straight"

    def describe(self) -> str:
        return f"{self.kind}(delta={self.delta:.17g}):" + ";".join(
            p.describe() for p in self.pieces)

    def max_abs_imag(self, samples: int = 257) -> float:
        t = np.linspace(0, 1, samples)
        return max(float(np.max(np.abs(np.imag(p.point(t))))) for p in self.pieces)


def default_delta(k: Wavenumber) -> float:
    return min(abs(k.kappa), 0.5 - abs(k.kappa)) / 2


def build_contour(k: Wavenumber, delta: float | None = None) -> Contour:
    """Interval [-1/2, 1/2] with half-circle detours of radius ``delta``.

    The detour at -kappa goes through the upper half plane and the one at
    +kappa through the lower half plane, away from the branch rays
    -kappa - i[0, inf) and kappa + i[0, inf).
    """
    if not k.assumption_ok:
        raise InvalidDelta(f"k={k.k} has merged cutoffs; use straight_contour")
    if delta is None:
        delta = default_delta(k)
    kap = abs(k.kappa)
    if not (0 < delta < kap and delta < 0.5 - kap):
        raise InvalidDelta(
            f"delta={delta} must satisfy 0 < delta < {kap} and delta < {0.5 - kap}")
    arcs = sorted([Arc(-k.kappa, delta, True), Arc(k.kappa, delta, False)],
                  key=lambda a: a.center)
    a, b = arcs
    pieces = (
        Segment(-0.5, a.center - delta), a,
        Segment(a.center + delta, b.center - delta), b,
        Segment(b.center + delta, 0.5),
    )
    return Contour(pieces, float(delta), "deformed")


def straight_contour(k=None) -> Contour:
    """[-1/2, 1/2] split at the interior cutoff values of ``k`` (if given)."""
    breaks = [-0.5, 0.5]
    if k is not None:
        breaks += [c for c in cutoff_values(k) if -0.5 + 1e-12 < c < 0.5 - 1e-12]
    breaks = sorted(set(breaks))
    return Contour(tuple(Segment(a, b) for a, b in zip(breaks[:-1], breaks[1:])),
                   0.0, "straight")


def split_nodes(contour: Contour, n_total: int) -> list[int]:
    """Distribute ``n_total`` nodes over the pieces in proportion to length."""
    lengths = np.array([abs(p.endpoints[1] - p.endpoints[0]) if isinstance(p, Segment)
                        else np.pi * p.radius for p in contour.pieces])
    counts = np.maximum(2, np.floor(n_total * lengths / lengths.sum()).astype(int))
    i = 0
    while counts.sum() < n_total:
        counts[np.argsort(-lengths)[i % len(counts)]] += 1
        i += 1
    return [int(c) for c in counts]


def contour_quadrature(contour: Contour, n_per_piece):
    """Composite Gauss-Legendre rule along ``contour``.

    ``n_per_piece`` is a node count used on every piece, or one count per
    piece. Returns ``(nodes, weights)``; the weights include the complex path
    derivative so that ``sum(weights * g(nodes))`` approximates the path
    integral of g. Nodes are ordered along the path.
    """
    counts = ([int(n_per_piece)] * len(contour.pieces) if np.ndim(n_per_piece) == 0
              else [int(n) for n in n_per_piece])
    if len(counts) != len(contour.pieces) or min(counts) < 2:
        raise ValueError("need at least two nodes on every piece")
    nodes, weights = [], []
    for piece, n in zip(contour.pieces, counts):
        x, w = np.polynomial.legendre.leggauss(n)
        t = (x + 1) / 2
        nodes.append(piece.point(t))
        weights.append(piece.derivative(t) * w / 2)
    return (np.concatenate(nodes).astype(complex),
            np.concatenate(weights).astype(complex))
