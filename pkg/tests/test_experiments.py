import math

import numpy as np
import pytest
import sympy

from blochpml.cli import cli_main
from blochpml.errors import BoundViolated, ConfigError, TooFewPoints
from blochpml.experiments import (ExperimentConfig, cutoff, dtn_ratio, fit_slope,
                                  fit_slope_window, make_bump_source, parse_number,
                                  run_pml_sweep, smoothstep, verify_h_bound, write_sweep)
from blochpml.numerics import PmlProfile, beta_scalar, decompose_wavenumber, h_func

K12 = decompose_wavenumber(1.2)

TINY = """
# small and fast: coarse mesh, few nodes
k = 1.2, 1.5
rho = 2, 4, 6
h_max = 0.25
j_range = 10
n_nodes = 10
n_nodes_ref = 20
line_points = 17
"""


# source ---------------------------------------------------------------------------

def test_source_values():
    f = make_bump_source()
    assert f(0.0, 1.8) == 3
    assert f(0.35, 1.8) == 0 and f(0.0, 1.8 + 0.3) == 0
    assert f(0.05, 1.8) == 3
    assert 0 < f(0.2, 1.8).real < 3


def test_cutoff_endpoints():
    assert cutoff(0.1) == 1 and cutoff(0.3) == 0
    assert cutoff(0.2) == pytest.approx(0.5, abs=1e-15)


def test_smoothstep_polynomial_symbolically():
    t = sympy.symbols("t")
    n = 8
    S = t ** (n + 1) * sum(sympy.binomial(n + i, i) * sympy.binomial(2 * n + 1, n - i) * (-t) ** i
                           for i in range(n + 1))
    S = sympy.expand(S)
    assert sympy.degree(S, t) == 17
    assert S.subs(t, 0) == 0 and S.subs(t, 1) == 1
    for d in range(1, 9):
        Sd = sympy.diff(S, t, d)
        assert Sd.subs(t, 0) == 0 and Sd.subs(t, 1) == 0
    # the ninth derivative does not vanish: exactly C^8
    assert sympy.diff(S, t, 9).subs(t, 0) != 0
    x = np.linspace(0, 1, 11)
    ref = np.array([float(S.subs(t, sympy.Rational(int(round(v * 10)), 10))) for v in x])
    assert np.max(np.abs(smoothstep(x) - ref)) < 1e-14


# slope fitting ----------------------------------------------------------------------

def test_fit_slope_exact_exponential():
    rho = np.arange(2, 21, 2.0)
    assert fit_slope(rho, np.exp(-0.9 * rho)) == pytest.approx(0.9, abs=1e-12)


def test_fit_slope_reference_table():
    rho = [2, 4, 6, 8, 10, 12]
    err = [2.18e-1, 3.52e-2, 6.10e-3, 1.03e-3, 1.71e-4, 3.15e-5]
    assert fit_slope(rho, err) == pytest.approx(0.90, abs=0.02)


def test_fit_slope_noise():
    rng = np.random.default_rng(11)
    rho = np.arange(2, 21, 2.0)
    for _ in range(100):
        err = np.exp(-0.9 * rho) * (1 + 0.05 * rng.uniform(-1, 1, len(rho)))
        assert abs(fit_slope(rho, err) - 0.9) < 0.05


def test_fit_slope_window_excludes_plateau():
    rho = np.arange(2, 21, 2.0)
    err = np.maximum(np.exp(-rho), 1e-5)
    s, lo, hi = fit_slope_window(rho, err)
    assert s == pytest.approx(1.0, abs=1e-12) and (lo, hi) == (2, 8)


def test_fit_slope_too_few_points():
    with pytest.raises(TooFewPoints):
        fit_slope([2, 4, 6], [1e-1, 1e-2, 1e-3])
    with pytest.raises(TooFewPoints):
        fit_slope([2, 4], [1e-1, 1e-2], plateau_floor=0)


# configuration ----------------------------------------------------------------------

def test_config_defaults_and_parsing():
    cfg = ExperimentConfig.from_text("k = 1.2, sqrt(5)  # two k\nrho = 4\ndelta = 0.05\n"
                                     "chi = exp(i*pi/3)\nstrict_tau = true\n")
    assert cfg.k == [1.2, math.sqrt(5)] and cfg.rho == [4.0]
    assert cfg.delta == 0.05 and cfg.strict_tau
    assert cfg.chi == pytest.approx(complex(math.cos(math.pi / 3), math.sin(math.pi / 3)))
    d = ExperimentConfig()
    assert (d.H, d.pml_thickness, d.m, d.j_range, d.n_nodes, d.n_nodes_ref) == (2.5, 1.5, 2, 40, 80, 160)
    assert d.rho == [2.0 * n for n in range(1, 11)] and d.line_points == 257


def test_config_roundtrip():
    cfg = ExperimentConfig.from_text(TINY)
    again = ExperimentConfig.from_text(cfg.to_text())
    assert again == cfg
    assert set(ExperimentConfig.keys()) == {line.split(" = ")[0] for line in ExperimentConfig.schema().splitlines()}


@pytest.mark.parametrize("text", ["bogus = 1", "k = ", "k = abc", "m = 2.5", "strict_tau = maybe",
                                  "line_x2 = 3.0", "no equals sign", "source_center = 1"])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text(text)


def test_parse_number_rejects_code():
    with pytest.raises(ConfigError):
        parse_number("__import__('os')")
    assert parse_number("2**3 - 1") == 7


# sweep ------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def tiny_sweep():
    return run_pml_sweep(ExperimentConfig.from_text(TINY))


def test_sweep_rows(tiny_sweep):
    rows = tiny_sweep.rows
    assert [(r.k, r.rho) for r in rows] == sorted((r.k, r.rho) for r in rows)
    assert len(rows) == 6 and all(r.err >= 0 and r.status == "ok" for r in rows)
    assert rows[0].abs_sigma == pytest.approx(abs(PmlProfile(1.5, 2).sigma))
    # k = 1.5 runs on the straight contour
    assert tiny_sweep.deltas[1.5] == 0 and tiny_sweep.deltas[1.2] == pytest.approx(0.1)
    for k in (1.2, 1.5):
        _, e = tiny_sweep.errs(k)
        assert e[0] > e[1] > e[2]


def test_sweep_outputs(tmp_path, tiny_sweep):
    paths = write_sweep(tiny_sweep, tmp_path)
    lines = open(paths["sweep"]).read().splitlines()
    assert lines[0] == "k,rho,abs_sigma,tau,err" and len(lines) == 7
    assert open(paths["slopes"]).read().splitlines()[0] == "k,slope,window_lo,window_hi"
    dat = [p for key, p in paths.items() if key.startswith("dat_")]
    assert len(dat) == 2
    row = open(dat[0]).read().splitlines()[1].split()
    assert len(row) == 2
    # the sidecar alone reproduces the configuration
    cfg = ExperimentConfig.from_file(paths["sweep"] + ".prov")
    assert cfg == tiny_sweep.config


def test_strict_tau_warns_but_continues(tmp_path):
    cfg = ExperimentConfig.from_text(TINY + "k = 1.2\nstrict_tau = true\n")
    with pytest.warns(UserWarning, match="tau"):
        res = run_pml_sweep(cfg)
    assert len(res.rows) == 3 and all(r.status == "ok" for r in res.rows)
    assert [w[1] for w in res.warnings] == [2.0]
    paths = write_sweep(res, tmp_path)
    assert "tau=0.31" in open(paths["warnings"]).read()


# lemma check -----------------------------------------------------------------------

def test_h_bound_positive():
    for rho in (4, 8):
        g, _ = verify_h_bound(K12, 0.1, PmlProfile(1.5, rho).sigma, 200)
        assert g > 0


def test_h_bound_scales_with_sigma():
    s = PmlProfile(1.5, 4).sigma
    g1, _ = verify_h_bound(K12, 0.1, s, 200)
    g2, _ = verify_h_bound(K12, 0.1, 2 * s, 200)
    # gamma is normalized by |sigma|, so min ln|h| doubling means equal gamma
    assert g2 * abs(2 * s) >= 2 * g1 * abs(s) * (1 - 1e-12)


def test_ratio_finite_at_centres():
    s = PmlProfile(1.5, 8).sigma
    # the deviation from i/sigma is of order |beta sigma|
    for z, tol in ((1.2, 1e-15), (-1.2, 1e-15), (1.2 + 1e-12, 1e-4), (-1.2 - 1e-9j, 1e-2)):
        v = dtn_ratio(z, 1.2, s)
        assert np.isfinite(v) and v == pytest.approx(1j / s, rel=tol)
    z = 1.2 + 0.03 * np.exp(0.4j)
    direct = 2 * beta_scalar(z, 1.2) / (h_func(z, 1.2, s) - 1)
    assert dtn_ratio(z, 1.2, s) == pytest.approx(direct, rel=1e-12)


def test_h_bound_fault_injection():
    with pytest.raises(BoundViolated):
        verify_h_bound(K12, 0.1, PmlProfile(1.5, 4).sigma, 50, fault="flip")


# CLI ----------------------------------------------------------------------------------

def test_cli_missing_config(tmp_path, capsys):
    assert cli_main(["sweep", "--config", str(tmp_path / "nope.cfg")]) == 2
    err = capsys.readouterr().err
    assert "not found" in err and "n_nodes_ref" in err


def test_cli_usage_error_prints_schema(capsys):
    assert cli_main(["frobnicate"]) == 2
    assert "h_max" in capsys.readouterr().err
    assert cli_main(["sweep", "--set", "bogus=1"]) == 2


def test_cli_verify_lemma(tmp_path):
    out = f"output_dir={tmp_path}"
    assert cli_main(["verify-lemma", "--set", "k=1.2", "--set", "rho=4", "--set", out]) == 0
    assert (tmp_path / "lemma.csv").exists() and (tmp_path / "lemma.csv.prov").exists()
    assert cli_main(["verify-lemma", "--set", "k=1.2", "--set", "rho=4", "--set", out,
                     "--inject-fault", "flip"]) == 1


def test_cli_sweep_is_deterministic(tmp_path):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(TINY + "k = 1.2\n")
    outs = []
    for run in ("a", "b"):
        assert cli_main(["sweep", "--config", str(cfg), "--set", f"output_dir={tmp_path / run}"]) == 0
        outs.append((tmp_path / run / "sweep.csv").read_bytes())
    assert outs[0] == outs[1]
    assert outs[0].decode().startswith("k,rho,abs_sigma,tau,err\n")


def test_cli_solve_and_dump_mesh(tmp_path):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(TINY + f"k = 1.2\noutput_dir = {tmp_path}\n")
    assert cli_main(["solve", "--config", str(cfg)]) == 0
    assert (tmp_path / "field_k1.2_exact.csv").read_text().startswith("x1,x2,re,im\n")
    assert cli_main(["dump-mesh", "--config", str(cfg), "--layer"]) == 0
    first = (tmp_path / "mesh.txt").read_text().split("\n", 1)[0]
    assert first.startswith("v ")
