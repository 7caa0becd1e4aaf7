"""Growth of |h(z)| along the extended contour and the half-disk bound.

Prints the sampled gamma_est and the half-disk margin for a few layer
strengths. The margin turns negative once gamma_est exceeds 1: at the disk
centre 2 beta / (h - 1) equals i / sigma, so no bound of the form
1 / (gamma |sigma|) with gamma > 1 can hold there.
"""
import math

from blochpml import verify_h_bound
from blochpml.numerics import PmlProfile, decompose_wavenumber

for kv in (1.2, math.sqrt(5)):
    k = decompose_wavenumber(kv)
    for delta in (0.05, 0.1):
        for rho in (2, 4, 6, 8, 12):
            g, margin = verify_h_bound(k, delta, PmlProfile(1.5, rho).sigma, 200)
            print(f"k={kv:.4g} delta={delta:<5g} rho={rho:<3g} gamma_est={g:.4f} "
                  f"margin={margin:+.4f}")
