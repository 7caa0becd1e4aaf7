"""PML error against layer strength on the wavy grating.

A reduced version of the full sweep (coarser mesh, fewer quadrature nodes) so
it finishes in about a minute. Pass ``--full`` for the default configuration.

    python demos/pml_sweep.py [--full] [--out DIR]
"""
import argparse

from blochpml import ExperimentConfig, run_pml_sweep
from blochpml.experiments import write_sweep

QUICK = """
k = 1, 1.2, 1.5, sqrt(5)
rho = 2, 4, 6, 8, 10, 12
h_max = 0.1
j_range = 30
n_nodes = 40
n_nodes_ref = 80
"""


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--full", action="store_true")
    ap.add_argument("--out", default="out/demo_sweep")
    args = ap.parse_args()
    cfg = ExperimentConfig() if args.full else ExperimentConfig.from_text(QUICK)
    res = run_pml_sweep(cfg)

    ks = sorted(cfg.k)
    print("rho  " + "".join(f"  k={k:<8.4g}" for k in ks))
    for rho in sorted(cfg.rho):
        errs = {r.k: r.err for r in res.rows if r.rho == rho}
        print(f"{rho:4g} " + "".join(f"  {errs[k]:.3e}" for k in ks))
    # the slope grows with k, as in the reference table
    for k in ks:
        s = res.slopes[k]
        print(f"k={k:.4g}: slope {s[0]:.3f} over rho in [{s[1]:g}, {s[2]:g}]" if s
              else f"k={k:.4g}: too few points above the plateau")
    paths = write_sweep(res, args.out)
    print("wrote", ", ".join(sorted(paths.values())))


if __name__ == "__main__":
    main()
