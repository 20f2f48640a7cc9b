"""How often is queue 1 empty as the total load grows?

Prints P(U1 = 0) under shortest-queue-first service next to the two
priority envelopes: 1 - rho (queue 1 always yields) and 1 - rho/2 (queue 1
always served first). Near saturation the value settles around 0.251.
"""
import numpy as np

from sqfqueue import empty_queue_probability, validate_symmetric

MU = 2.0

print(f"{'rho':>6} {'1-rho':>8} {'SQF':>10} {'1-rho/2':>8}")
for rho in np.concatenate([np.linspace(0.1, 0.9, 9), [0.95, 0.99, 0.999]]):
    p = validate_symmetric(rho * MU, MU)
    _, pe = empty_queue_probability(p)
    print(f"{rho:6.3f} {1 - rho:8.4f} {pe:10.6f} {1 - rho / 2:8.4f}")
