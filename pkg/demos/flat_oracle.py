"""FEM cell solve against the closed-form flat-surface solution.

The single-mode source e^{i(j + alpha) x1} g(x2) on a flat surface has an
exact solution; the relative L2 error should drop by about 4x per halving.
"""
from blochpml.experiments import convergence_rates, oracle_error

hs = [0.1, 0.05, 0.025]
errs = [oracle_error(h) for h in hs]
for h, e in zip(hs, errs):
    print(f"h={h:<6g} err={e:.3e}")
print("rates:", " ".join(f"{r:.2f}" for r in convergence_rates(hs, errs)))
