"""Learn the Chebyshev-to-Legendre change of basis from sampled values."""
import numpy as np

from isolearn.experiments import generate_poly_sample, legendre_over_chebyshev, recover_poly_mapping

np.set_printoptions(precision=6, suppress=True)
sample = generate_poly_sample(11, 6, 500, seed=1)
for D, n in ((5, 5), (4, 4), (4, 5)):
    u, report = recover_poly_mapping(sample, D, n)
    print(f"D={D} n={n} F={report.fidelity:.9f} converged={report.converged}")
    print(u.u)
print("exact 5x5 expansion:\n", legendre_over_chebyshev(5, 5))
