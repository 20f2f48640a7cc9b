"""Tail of the queue-1 workload in the three load regimes.

For each load the script prints the asymptotic law and compares it with the
numerically inverted CCDF at a few points. Above rho = 1/2 the law is a pure
exponential and the two columns agree early. Below 1/2 the u^(-3/2)
correction makes the approach slow. Grids stop before the CCDF drops
under about 1e-11, the absolute accuracy of the default inversion settings.
"""
import numpy as np

from sqfqueue import ccdf_curve, sqf_tail_law, validate_symmetric

for lam in (1.8, 1.0, 0.6):
    p = validate_symmetric(lam, 2.0)
    law = sqf_tail_law(p)
    print(f"\nrho = {p.rho:.2f}  regime {p.regime.value}: "
          f"{law.prefactor:.5g} * u^{law.power:g} * exp({law.rate:.5g} u)")
    u = {1.8: [2.0, 5.0, 10.0, 20.0, 40.0], 1.0: [1.0, 2.0, 5.0, 10.0, 15.0],
         0.6: [0.6, 1.5, 3.0, 6.0, 12.0]}[lam]
    u = np.array(u)
    inv = ccdf_curve(u, params=p).value
    for x, a, b in zip(u, law.ccdf(u), inv):
        print(f"  u = {x:6.2f}   inverted {b:.6e}   asymptote {a:.6e}   ratio {a / b:.4f}")
