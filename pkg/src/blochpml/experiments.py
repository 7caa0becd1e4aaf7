"""Experiment harness: the periodic-surface PML study and its checks.

Everything here is driven by :class:`ExperimentConfig`, which round-trips
through a plain ``key = value`` text file so every output can be regenerated
from its provenance sidecar.
"""
from __future__ import annotations

import ast
import cmath
import dataclasses
import logging
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sp
from scipy import special

from .assembly import SourceTerm, element_data
from .bloch import FieldOnSet, line_points, reconstruct, relative_error
from .cellsolve import CellProblem, evaluate_field
from .errors import BlochPMLError, BoundViolated, ConfigError, TooFewPoints
from .geometry import flat_surface, make_surface
from .numerics import (Contour, PmlProfile, Wavenumber, _two_over_expm1, build_contour,
                       decompose_wavenumber, default_delta, split_nodes, sqrt_branch,
                       straight_contour)
from .oracle import bump, flat_cell_oracle

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# source

def smoothstep(t, order: int = 8):
    """Polynomial step from 0 (t <= 0) to 1 (t >= 1) with ``order`` vanishing
    derivatives at both ends; degree 2 * order + 1.

    The polynomial is the regularized incomplete beta function
    I_t(order + 1, order + 1), which scipy evaluates without the cancellation
    of the alternating monomial sum.
    """
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return special.betainc(order + 1, order + 1, t)


def cutoff(r, inner: float = 0.1, outer: float = 0.3, order: int = 8):
    """1 for r <= inner, 0 for r >= outer, C^order in between."""
    return 1.0 - smoothstep((np.asarray(r) - inner) / (outer - inner), order)


def make_bump_source(center=(0.0, 1.8), inner: float = 0.1, outer: float = 0.3,
                      amplitude: float = 3.0, order: int = 8) -> SourceTerm:
    """f(x) = amplitude * cutoff(|x - center|): a smooth disk-shaped source."""
    c1, c2 = center

    def f(x1, x2):
        r = np.hypot(np.asarray(x1) - c1, np.asarray(x2) - c2)
        return amplitude * cutoff(r, inner, outer, order)

    return SourceTerm(f, (c1, c2), outer)


# --------------------------------------------------------------------------
# configuration

_NAMES = {"pi": math.pi, "e": math.e, "i": 1j, "j": 1j}
_FUNCS = {"sqrt": cmath.sqrt, "exp": cmath.exp, "cos": cmath.cos, "sin": cmath.sin}


def parse_number(text: str):
    """Evaluate a small arithmetic expression such as ``sqrt(5)`` or
    ``exp(i*pi/4)``. Returns float when the result is real."""
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
            return node.value
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            a, b = ev(node.left), ev(node.right)
            ops = {ast.Add: lambda: a + b, ast.Sub: lambda: a - b, ast.Mult: lambda: a * b,
                   ast.Div: lambda: a / b, ast.Pow: lambda: a ** b}
            if type(node.op) in ops:
                return ops[type(node.op)]()
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ConfigError(f"cannot parse number {text!r}")

    try:
        v = ev(ast.parse(text.strip(), mode="eval"))
    except SyntaxError:
        raise ConfigError(f"cannot parse number {text!r}") from None
    v = complex(v)
    return v.real if v.imag == 0 else v


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, complex):
        return f"{v.real:.17g}{v.imag:+.17g}j"
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, (list, tuple)):
        return ", ".join(_fmt(x) for x in v)
    if v is None:
        return "auto"
    return str(v)


@dataclass
class ExperimentConfig:
    k: list = field(default_factory=lambda: [1.0, 1.2, 1.5, math.sqrt(5)])
    surface: str = "grating"
    surface_c: float = 1.0
    source_center: tuple = (0.0, 1.8)
    source_inner_radius: float = 0.1
    source_outer_radius: float = 0.3
    source_amplitude: float = 3.0
    source_smoothness: int = 8
    H: float = 2.5
    pml_thickness: float = 1.5
    chi: complex = complex(cmath.exp(1j * math.pi / 4))
    m: int = 2
    rho: list = field(default_factory=lambda: [2.0 * n for n in range(1, 11)])
    delta: Optional[float] = None
    n_nodes: int = 80
    n_nodes_ref: int = 160
    j_range: int = 40
    h_max: float = 0.05
    line_x2: float = 2.4
    line_points: int = 257
    output_dir: str = "out"
    strict_tau: bool = False
    allow_half_integer: bool = True

    # ------------------------------------------------------------------
    @classmethod
    def keys(cls):
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def schema(cls) -> str:
        d = cls()
        return "\n".join(f"{k} = {_fmt(getattr(d, k))}" for k in cls.keys())

    def set(self, key: str, text: str) -> None:
        if key not in self.keys():
            raise ConfigError(f"unknown config key {key!r}")
        cur = getattr(type(self)(), key)
        text = text.strip()
        try:
            if key == "delta":
                val = None if text.lower() in ("auto", "none", "") else float(parse_number(text))
            elif isinstance(cur, bool):
                if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ConfigError(f"{key} expects true/false, got {text!r}")
                val = text.lower() in ("true", "1", "yes")
            elif isinstance(cur, list):
                val = [float(parse_number(x)) for x in text.split(",") if x.strip()]
            elif isinstance(cur, tuple):
                val = tuple(float(parse_number(x)) for x in text.split(","))
                if len(val) != len(cur):
                    raise ConfigError(f"{key} expects {len(cur)} values")
            elif isinstance(cur, complex):
                val = complex(parse_number(text))
            elif isinstance(cur, int):
                v = parse_number(text)
                if v != int(v):
                    raise ConfigError(f"{key} expects an integer")
                val = int(v)
            elif isinstance(cur, float):
                val = float(parse_number(text))
            else:
                val = text
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from None
        setattr(self, key, val)

    @classmethod
    def from_text(cls, text: str, overrides=()) -> "ExperimentConfig":
        cfg = cls()
        lines = list(text.splitlines()) + list(overrides)
        for n, line in enumerate(lines, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {n}: expected key = value, got {line!r}")
            key, val = line.split("=", 1)
            cfg.set(key.strip(), val)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path, overrides=()) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_text(fh.read(), overrides)

    def to_text(self) -> str:
        return "\n".join(f"{k} = {_fmt(getattr(self, k))}" for k in self.keys()) + "\n"

    def validate(self) -> None:
        if not self.k or any(k <= 0 for k in self.k):
            raise ConfigError("k must be a non-empty list of positive numbers")
        if not self.rho or any(r < 0 for r in self.rho):
            raise ConfigError("rho must be a non-empty list of non-negative numbers")
        if self.h_max <= 0 or self.H <= 0 or self.pml_thickness <= 0:
            raise ConfigError("h_max, H and pml_thickness must be positive")
        if self.n_nodes < 2 or self.n_nodes_ref < 2:
            raise ConfigError("node counts must be at least 2")
        if self.line_x2 >= self.H:
            raise ConfigError("the evaluation line must lie below H")

    # ------------------------------------------------------------------
    def make_surface(self):
        if self.surface == "flat":
            return make_surface("flat", c=self.surface_c)
        return make_surface(self.surface)

    def make_source(self) -> SourceTerm:
        return make_bump_source(self.source_center, self.source_inner_radius,
                                 self.source_outer_radius, self.source_amplitude,
                                 self.source_smoothness)

    def profile(self, rho: float) -> PmlProfile:
        return PmlProfile(self.pml_thickness, rho, self.chi, self.m)

    def wavenumber(self, k: float) -> Wavenumber:
        return decompose_wavenumber(k, allow_half_integer=self.allow_half_integer)

    def contour(self, k: Wavenumber) -> Contour:
        """Deformed contour when the cutoffs are separated, straight otherwise."""
        if k.assumption_ok:
            return build_contour(k, self.delta if self.delta is not None else default_delta(k))
        return straight_contour(k)

    def points(self) -> np.ndarray:
        return line_points(self.line_x2, self.line_points)


def nodes_per_piece(contour: Contour, n_total: int):
    if contour.kind == "deformed":
        base, extra = divmod(n_total, len(contour.pieces))
        return [max(2, base + (1 if i < extra else 0)) for i in range(len(contour.pieces))]
    return split_nodes(contour, n_total)


# --------------------------------------------------------------------------
# sweep

@dataclass
class SweepRow:
    k: float
    rho: float
    abs_sigma: float
    tau: float
    err: float
    status: str = "ok"


@dataclass
class SweepResult:
    rows: list
    slopes: dict            # k -> (slope, window_lo, window_hi) or None
    warnings: list          # (k, rho, message)
    config: ExperimentConfig
    deltas: dict            # k -> delta used (0 for straight contours)

    def errs(self, k):
        rs = [r for r in self.rows if r.k == k]
        return np.array([r.rho for r in rs]), np.array([r.err for r in rs])


class KSetup:
    """Mesh, blocks and reference solution shared by all rho for one k."""

    def __init__(self, cfg: ExperimentConfig, k_value: float):
        self.cfg = cfg
        self.k = cfg.wavenumber(k_value)
        self.surface = cfg.make_surface()
        self.source = cfg.make_source()
        self.base = CellProblem(self.surface, self.k, self.source, cfg.H, cfg.h_max,
                                cfg.j_range)
        self.contour = cfg.contour(self.k)
        self.points = cfg.points()
        self._reference = None

    def problem(self, method="exact-dtn", profile=None) -> CellProblem:
        p = CellProblem.__new__(CellProblem)
        p.__dict__.update(self.base.__dict__)
        p.method, p.profile = method, profile
        return p

    def reference(self) -> FieldOnSet:
        if self._reference is None:
            self._reference = reconstruct(self.base, self.contour,
                                          nodes_per_piece(self.contour, self.cfg.n_nodes_ref),
                                          self.points)
        return self._reference

    def pml_field(self, rho: float) -> FieldOnSet:
        prob = self.problem("pml-dtn", self.cfg.profile(rho))
        return reconstruct(prob, self.contour,
                           nodes_per_piece(self.contour, self.cfg.n_nodes), self.points)


def run_pml_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Relative L2 error on the evaluation line for every (k, rho)."""
    rows, warn_rows, deltas = [], [], {}
    for kv in sorted(cfg.k):
        setup = KSetup(cfg, kv)
        deltas[kv] = setup.contour.delta
        ref = setup.reference()
        for rho in sorted(cfg.rho):
            prof = cfg.profile(rho)
            if cfg.strict_tau and not prof.tau_in_assumed_range:
                msg = f"tau={prof.tau:.6f} outside (pi/8, (pi-arctan 2)/2); continuing"
                warnings.warn(f"k={kv}, rho={rho}: {msg}", stacklevel=2)
                warn_rows.append((kv, rho, msg))
            try:
                err = relative_error(setup.pml_field(rho), ref)
                status = "ok"
            except BlochPMLError as exc:
                log.warning("k=%s rho=%s failed: %s", kv, rho, exc)
                err, status = float("nan"), f"failed: {exc}"
            rows.append(SweepRow(kv, rho, abs(prof.sigma), prof.tau, err, status))
    slopes = {}
    for kv in sorted(cfg.k):
        rs = [r for r in rows if r.k == kv and np.isfinite(r.err)]
        try:
            slopes[kv] = fit_slope_window([r.rho for r in rs], [r.err for r in rs])
        except TooFewPoints:
            slopes[kv] = None
    return SweepResult(rows, slopes, warn_rows, cfg, deltas)


def fit_slope_window(rhos, errs, plateau_floor: Optional[float] = None):
    """Least-squares slope of -ln(err) against rho over rows with err above
    the plateau floor (default: 10 x the smallest error).

    Returns ``(slope, window_lo, window_hi)``.
    """
    rhos = np.asarray(rhos, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if plateau_floor is None:
        plateau_floor = 10 * np.min(errs) if len(errs) else 0.0
    keep = errs > plateau_floor
    if keep.sum() < 3:
        raise TooFewPoints(f"only {keep.sum()} points above the plateau floor {plateau_floor:.3g}")
    r, e = rhos[keep], errs[keep]
    slope = np.polyfit(r, -np.log(e), 1)[0]
    return float(slope), float(r.min()), float(r.max())


def fit_slope(rhos, errs, plateau_floor: Optional[float] = None) -> float:
    return fit_slope_window(rhos, errs, plateau_floor)[0]


def write_config_sidecar(path, cfg: ExperimentConfig, extra: dict) -> None:
    with open(path, "w") as fh:
        fh.write("# provenance: rerun with --config pointing at this file\n")
        for key in sorted(extra):
            fh.write(f"# {key}: {extra[key]}\n")
        fh.write(cfg.to_text())


def write_sweep(result: SweepResult, outdir) -> dict:
    """Write the error table, slopes, warnings and gnuplot data files."""
    os.makedirs(outdir, exist_ok=True)
    cfg = result.config
    extra = {f"delta[k={_fmt(k)}]": _fmt(d) for k, d in result.deltas.items()}
    paths = {"sweep": os.path.join(outdir, "sweep.csv"),
             "slopes": os.path.join(outdir, "slopes.csv")}
    with open(paths["sweep"], "w") as fh:
        fh.write("k,rho,abs_sigma,tau,err\n")
        for r in sorted(result.rows, key=lambda r: (r.k, r.rho)):
            fh.write(f"{r.k:.17g},{r.rho:.17g},{r.abs_sigma:.17g},{r.tau:.17g},{r.err:.17g}\n")
    with open(paths["slopes"], "w") as fh:
        fh.write("k,slope,window_lo,window_hi\n")
        for k in sorted(result.slopes):
            s = result.slopes[k]
            if s is None:
                fh.write(f"{k:.17g},nan,nan,nan\n")
            else:
                fh.write(f"{k:.17g},{s[0]:.17g},{s[1]:.17g},{s[2]:.17g}\n")
    failures = [r for r in result.rows if r.status != "ok"]
    if result.warnings or failures:
        paths["warnings"] = os.path.join(outdir, "warnings.csv")
        with open(paths["warnings"], "w") as fh:
            fh.write("k,rho,message\n")
            for k, rho, msg in result.warnings:
                fh.write(f"{k:.17g},{rho:.17g},{msg}\n")
            for r in failures:
                fh.write(f"{r.k:.17g},{r.rho:.17g},{r.status}\n")
    for k in sorted({r.k for r in result.rows}):
        p = os.path.join(outdir, f"err_k{k:.6g}.dat")
        with open(p, "w") as fh:
            fh.write(f"# rho err  (k = {k:.17g})\n")
            for r in sorted((r for r in result.rows if r.k == k), key=lambda r: r.rho):
                fh.write(f"{r.rho:.17g} {r.err:.17g}\n")
        paths[f"dat_{k}"] = p
    for key in ("sweep", "slopes"):
        write_config_sidecar(paths[key] + ".prov", cfg, extra)
    return paths


# --------------------------------------------------------------------------
# h(z) bounds on the extended contour

class HBound(NamedTuple):
    gamma_est: float
    min_margin: float


FAULTS = {
    None: sqrt_branch,
    # deliberately wrong branch for G+ (sign flip), used to test the harness
    "flip": lambda z: -sqrt_branch(z),
}


def verify_h_bound(k: Wavenumber, delta: float, sigma: complex,
                   samples_per_piece: int = 200, j_range: int = 40,
                   fault: Optional[str] = None) -> HBound:
    """Sample the two growth bounds on h(z) = exp(-2i sqrt(k^2 - z^2) sigma).

    ``gamma_est`` is the smallest ratio ln|h(z)| / (sqrt(delta) |sigma|
    sqrt(|Re z| + k)) over z on the contour shifted by every |j| <= j_range.
    ``min_margin`` is the smallest slack in
    |2 sqrt(k^2 - z^2) / (h(z) - 1)| <= 1 / (gamma_est |sigma|) over the upper
    half disks at -k + j and lower half disks at k + j of radius delta.
    """
    sq_plus = FAULTS[fault]
    kv = k.k
    contour = build_contour(k, delta)
    t = np.linspace(0, 1, samples_per_piece)
    base = np.concatenate([p.point(t) for p in contour.pieces])
    js = np.arange(-j_range, j_range + 1)
    z = (base[None, :] + js[:, None]).ravel()
    root = sq_plus(kv + z) * sqrt_branch(kv - z)
    log_h = (-2j * root * sigma).real
    ratio = log_h / (np.sqrt(delta) * abs(sigma) * np.sqrt(np.abs(z.real) + kv))
    gamma = float(np.min(ratio))
    if not gamma > 0:
        raise BoundViolated(f"gamma_est = {gamma:.4g} <= 0: |h| does not grow on the contour")

    # radii from 0 (the centre itself) up to delta, angles over [0, pi]
    xi = np.unique(np.concatenate([[0.0], delta * np.logspace(-8, 0, 32),
                                   np.linspace(0, delta, 33)[1:]]))
    om = np.linspace(0, np.pi, samples_per_piece)
    disk = (xi[:, None] * np.exp(1j * om[None, :])).ravel()
    worst = 0.0
    for centre, sign in ((-kv, 1), (kv, -1)):
        zz = (centre + js[:, None] + sign * disk[None, :]).ravel()
        worst = max(worst, float(np.max(np.abs(dtn_ratio(zz, kv, sigma, sq_plus)))))
    margin = 1.0 / (gamma * abs(sigma)) - worst
    return HBound(gamma, float(margin))


def dtn_ratio(z, k, sigma, sqrt_plus=sqrt_branch):
    """2 sqrt(k^2 - z^2) / (h(z) - 1), finite at z = +-k where it equals i / sigma.

    Written as (i / sigma) * y / expm1(y) with y = -2i sqrt(k^2 - z^2) sigma.
    """
    kv = float(getattr(k, "k", k))
    z = np.asarray(z, dtype=complex)
    y = -2j * sqrt_plus(kv + z) * sqrt_branch(kv - z) * sigma
    small = np.abs(y) < 1e-8
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        q = y * _two_over_expm1(np.where(small, 1.0, y)) / 2
    # y / expm1(y) = 1 - y/2 + y^2/12 + ...
    q = np.where(small, 1 - y / 2 + y * y / 12, q)
    out = 1j / sigma * q
    return out[()] if out.ndim == 0 else out


# --------------------------------------------------------------------------
# oracle and contour checks

def flat_modal_source(alpha: float, j: int, g):
    """Source whose cell right-hand side is exactly e^{i j x1} g(x2)."""
    return SourceTerm(lambda x1, x2: np.exp(1j * (j + alpha) * np.asarray(x1)) * g(x2),
                      periodic=True)


def oracle_error(h: float, k: float = 1.2, alpha: float = 0.1, c: float = 1.0,
                 H: float = 2.5, j: int = 1, support=(1.3, 2.2),
                 j_range: int = 20) -> float:
    """Relative L2 distance between the FEM cell solution and the flat oracle,
    integrated with the edge-midpoint rule on the FEM mesh."""
    kw = decompose_wavenumber(k)
    g = bump(*support)
    prob = CellProblem(flat_surface(c), kw, flat_modal_source(alpha, j, g), H, h, j_range)
    sol = prob.solve(alpha)
    mesh = prob.mesh
    p = mesh.vertices[mesh.triangles]
    mids = np.concatenate([(p[:, 0] + p[:, 1]) / 2, (p[:, 1] + p[:, 2]) / 2,
                           (p[:, 2] + p[:, 0]) / 2])
    wts = np.tile(mesh.areas(), 3) / 3
    fem = evaluate_field(sol, mids)
    exact = flat_cell_oracle(kw, alpha, {j: g}, c, H, mids, breaks=tuple(support))
    return float(np.sqrt(np.sum(wts * np.abs(fem - exact) ** 2)
                         / np.sum(wts * np.abs(exact) ** 2)))


def convergence_rates(hs, errs):
    hs, errs = np.asarray(hs, float), np.asarray(errs, float)
    return np.log(errs[:-1] / errs[1:]) / np.log(hs[:-1] / hs[1:])


def contour_check(cfg: ExperimentConfig, k_value: float = 1.2, straight_nodes: int = 320):
    """Exact-DtN fields on the evaluation line from three contours.

    Returns relative differences (deformed at delta/2 vs delta, straight vs
    deformed).
    """
    setup = KSetup(cfg, k_value)
    k = setup.k
    d0 = cfg.delta if cfg.delta is not None else default_delta(k)
    n = cfg.n_nodes
    c1, c2 = build_contour(k, d0), build_contour(k, d0 / 2)
    u1 = reconstruct(setup.base, c1, nodes_per_piece(c1, n), setup.points)
    u2 = reconstruct(setup.base, c2, nodes_per_piece(c2, n), setup.points)
    cs = straight_contour(k)
    us = reconstruct(setup.base, cs, nodes_per_piece(cs, straight_nodes), setup.points)
    return {"delta": d0, "delta_invariance": relative_error(u2, u1),
            "straight_vs_deformed": relative_error(us, u1)}


def layer_vs_dtn_gap(h: float, k: float = 1.2, alpha: float = 0.1, rho: float = 6.0,
                     cfg: Optional[ExperimentConfig] = None) -> float:
    """Relative L2 gap on the cell below H between the meshed PML layer and
    the PML DtN formulation."""
    cfg = cfg or ExperimentConfig()
    kw = decompose_wavenumber(k)
    prof = cfg.profile(rho)
    surf, src = cfg.make_surface(), cfg.make_source()
    dtn = CellProblem(surf, kw, src, cfg.H, h, cfg.j_range, "pml-dtn", prof)
    lay = CellProblem(surf, kw, src, cfg.H, h, cfg.j_range, "pml-layer", prof)
    a = dtn.solve(alpha).nodal
    b = lay.solve(alpha).nodal[lay.mesh.sub_vertex_map()]
    ed = element_data(dtn.mesh)
    M = sp.coo_matrix((ed.M.ravel(), (ed.rows.ravel(), ed.cols.ravel())),
                      shape=(len(a), len(a))).tocsr()
    d = a - b
    return float(np.sqrt(abs(np.vdot(d, M @ d)) / abs(np.vdot(a, M @ a))))
